#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vortexlab/dataio.hpp"

namespace vortexlab::svg {

/// Deterministic metric plot (no timestamps). Kinds: "align-uniform" draws
/// validation alignment and uniformity curves; "loss" draws train/val loss.
std::string plot_metrics(const std::vector<data::MetricRecord>& records,
                         const std::string& kind);

/// Scan rendering: points colored by radial velocity (warm toward the
/// sensor), ground-truth centers as circles (port green, starboard orange),
/// predictions as crosses.
std::string render_frame(const data::PointCloudFrame& frame, const data::VortexCenters& truth,
                         const data::VortexCenters& prediction);

} // namespace vortexlab::svg

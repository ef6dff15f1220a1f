#pragma once

#include <json.hpp>

#include "vortexlab/dataio.hpp"
#include "vortexlab/rng.hpp"

namespace vortexlab::aug {

struct AugmentConfig {
    double jitter_sigma = 0.05;             // weak view, meters
    double dropout_p = 0.3;                 // strong view point dropout
    double rotation_range = 0.5235987755982988; // strong view, +-30 deg in radians
    int min_frames_kept = 3;                // strong view temporal subsampling
    // ablation switches
    bool temporal_subsampling = true;
    bool spatial_masking = true;

    void validate(int T) const;
    nlohmann::json to_json() const;
    static AugmentConfig from_json(const nlohmann::json& j);
};

/// Two views of the same flight event; the contrastive positive pair.
struct ViewPair {
    data::ScanSequence weak;
    data::ScanSequence strong;
};

/// Gaussian (y,z) jitter on every point; structure unchanged.
data::ScanSequence weak_view(const data::ScanSequence& seq, Rng& rng,
                             const AugmentConfig& cfg);

/// Temporal subsampling (k of T frames, original order), per-frame point
/// dropout re-padded to n_points, and one shared in-plane rotation about the
/// sequence centroid. v_r is never touched.
data::ScanSequence strong_view(const data::ScanSequence& seq, Rng& rng,
                               const AugmentConfig& cfg, int n_points);

/// Weak and strong views from independent substreams of rng.
ViewPair make_view_pair(const data::ScanSequence& seq, Rng& rng, const AugmentConfig& cfg,
                        int n_points);

} // namespace vortexlab::aug

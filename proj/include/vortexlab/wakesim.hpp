#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "vortexlab/dataio.hpp"
#include "vortexlab/rng.hpp"

namespace vortexlab::sim {

/// Simulator ground truth for one counter-rotating pair. Port is the
/// positive-circulation vortex at larger y; circulations are m^2/s.
struct VortexPairState {
    double y_port = 0.0, z_port = 0.0;
    double y_star = 0.0, z_star = 0.0;
    double gamma_port = 0.0; // > 0
    double gamma_star = 0.0; // < 0
    double core_radius = 3.0;
    double age = 0.0;
};

struct ScanGeometry {
    double y_origin = 0.0;
    double z_origin = 2.0;
    std::vector<double> elevations; // radians, strictly increasing
    std::vector<double> ranges;     // meters, strictly increasing, > 0

    void validate() const;
    static ScanGeometry regular(double phi_min, double phi_max, int n_phi, double r_min,
                                double r_max, int n_r, double y_origin = 0.0,
                                double z_origin = 2.0);
};

struct AircraftClass {
    std::string name;
    double wingspan = 0.0;      // b, meters
    double gamma0 = 0.0;        // initial circulation, m^2/s
};

struct CatalogConfig {
    std::vector<AircraftClass> classes;
    double jitter_frac = 0.10;       // +-10% on (b, gamma0)
    double z0_over_b_min = 1.0;      // initial height range in wingspans
    double z0_over_b_max = 2.2;
    double y0_min = 150.0;           // lateral trajectory start, meters from lidar
    double y0_max = 260.0;
    double crosswind_max = 2.5;      // symmetric range, m/s
    double decay_tau_min = 35.0;     // seconds
    double decay_tau_max = 90.0;
    double noise_sigma_min = 0.4;    // m/s
    double noise_sigma_max = 1.2;
    double core_radius_min = 2.5;    // meters
    double core_radius_max = 4.5;
    double dt_min = 6.0;             // frame interval, seconds
    double dt_max = 8.0;

    static CatalogConfig default_catalog();
    nlohmann::json to_json() const;
    static CatalogConfig from_json(const nlohmann::json& j);
};

struct Scenario {
    int class_id = -1;
    std::string class_name;
    double wingspan = 0.0;
    double gamma0 = 0.0;
    double z0 = 0.0;
    double y0 = 0.0;
    double crosswind = 0.0;
    double decay_tau = 60.0;
    double noise_sigma = 0.5;
    double core_radius = 3.0;
    double aerosol_keep_prob = 0.85;
    double frame_interval = 7.0; // in (0, 8)
    int n_frames = 5;

    void validate() const;
    nlohmann::json to_json() const;
    static Scenario from_json(const nlohmann::json& j);
};

/// Class-conditional scenario draw; forced_class >= 0 pins the class id
/// (used for balanced datasets), otherwise the class is drawn uniformly.
Scenario sample_scenario(Rng& rng, const CatalogConfig& catalog, int forced_class = -1);

/// Initial pair state: vortices separated by pi/4 * wingspan at height z0.
VortexPairState initial_state(const Scenario& sc);

/// Lamb-Oseen superposition of both vortices, plus both image vortices
/// mirrored at z=0 when ground_effect is set. Finite everywhere.
std::array<double, 2> induced_velocity(double qy, double qz, const VortexPairState& state,
                                       bool ground_effect);

/// Whether image vortices are active for this state (pair below 1.5 b).
bool ground_effect_active(const VortexPairState& state, double wingspan);

/// Advect both centers by mutual induction + images + crosswind with RK4
/// (substeps <= 0.25 s); circulation decays exponentially inside the stages.
VortexPairState advance_vortex_state(const VortexPairState& state, double dt,
                                     const Scenario& sc);

/// Radial-velocity scan of the current state on the (phi, range) grid.
data::PointCloudFrame render_scan(const VortexPairState& state, const ScanGeometry& geom,
                                  const Scenario& sc, Rng& rng, double timestamp = 0.0);

struct SimConfig {
    int n_sequences = 100;
    int n_frames = 5;
    bool labeled = true;
    uint64_t master_seed = 1;
    CatalogConfig catalog = CatalogConfig::default_catalog();
    ScanGeometry geometry = ScanGeometry::regular(0.02, 0.85, 50, 60.0, 420.0, 44);

    nlohmann::json to_json() const;
    static SimConfig from_json(const nlohmann::json& j);
};

/// Simulate and write a dataset directory; returns the dataset manifest.
/// Unlabeled mode strips class/centers/scenario from per-sequence manifests
/// and seals them in <out>/_oracle/labels.json.
nlohmann::json generate_dataset(const SimConfig& cfg, const std::filesystem::path& out_dir);

} // namespace vortexlab::sim

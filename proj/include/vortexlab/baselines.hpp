#pragma once

#include <array>
#include <optional>
#include <vector>

#include "vortexlab/dataio.hpp"
#include "vortexlab/nn.hpp"

namespace vortexlab::baselines {

struct DbscanConfig {
    double eps = 8.0;          // meters
    int min_pts = 10;
    double vr_threshold = 1.5; // |v_r| filter, m/s

    void validate() const;
};

/// Density clustering on (y,z); -1 marks noise. Cluster membership is
/// order-insensitive: clusters are connected components of core points and
/// border points attach to the nearest core (distance ties to the core with
/// the lexicographically smallest coordinates).
std::vector<int> dbscan_labels(const std::vector<std::array<double, 2>>& pts, double eps,
                               int min_pts);

/// Centroids of the two largest |v_r|-filtered clusters, port = larger y.
/// Falls back to duplicating one cluster or the frame centroid.
data::VortexCenters dbscan_centers(const data::PointCloudFrame& frame, const DbscanConfig& cfg);

/// |v_r|-weighted centroids of the two halves split at the weighted median y.
data::VortexCenters intensity_centroid(const data::PointCloudFrame& frame);

/// Linear extrapolation from the last two observations (>= 2 required).
std::array<data::VortexCenters, 2> constant_velocity_forecast(
    const std::vector<data::VortexCenters>& history);

struct KalmanConfig {
    double q = 0.5;     // process noise spectral density
    double r = 4.0;     // measurement noise variance
    double p0_pos = 1e4;
    double p0_vel = 1e4;

    void validate() const;
};

struct KalmanDiag {
    double max_asym = 0.0; // worst ||P - P^T||_inf seen
    bool reset = false;    // non-PD covariance was reset to the prior
};

/// Constant-velocity Kalman filter per vortex over the observed history,
/// then two pure prediction steps.
std::array<data::VortexCenters, 2> kalman_forecast(const std::vector<data::VortexCenters>& history,
                                                   const KalmanConfig& cfg,
                                                   KalmanDiag* diag = nullptr);

/// Center-coordinate-only recurrent forecaster (no point cloud access).
struct TrajForecaster {
    ParameterStore<float> params;
    int hidden = 64;
    int history = 3;
};

TrajForecaster train_trajectory_forecaster(
    const std::vector<std::vector<data::VortexCenters>>& center_tracks, int history,
    uint64_t seed, int epochs = 200, double lr0 = 1e-2);

std::array<data::VortexCenters, 2> trajectory_forecast(
    const TrajForecaster& m, const std::vector<data::VortexCenters>& history_centers);

} // namespace vortexlab::baselines

#include "vortexlab/augment.hpp"

#include <cmath>

#include "vortexlab/error.hpp"

using nlohmann::json;

namespace vortexlab::aug {

void AugmentConfig::validate(int T) const {
    if (!(dropout_p >= 0.0 && dropout_p < 1.0))
        throw config_error("augment: dropout_p must be in [0, 1)");
    if (rotation_range < 0) throw config_error("augment: rotation_range must be >= 0");
    if (min_frames_kept < 1 || min_frames_kept > T)
        throw config_error("augment: min_frames_kept must be in [1, T]");
    if (jitter_sigma < 0) throw config_error("augment: jitter_sigma must be >= 0");
}

json AugmentConfig::to_json() const {
    return {{"jitter_sigma", jitter_sigma},
            {"dropout_p", dropout_p},
            {"rotation_range", rotation_range},
            {"min_frames_kept", min_frames_kept},
            {"temporal_subsampling", temporal_subsampling},
            {"spatial_masking", spatial_masking}};
}

AugmentConfig AugmentConfig::from_json(const json& j) {
    AugmentConfig c;
    c.jitter_sigma = j.value("jitter_sigma", c.jitter_sigma);
    c.dropout_p = j.value("dropout_p", c.dropout_p);
    c.rotation_range = j.value("rotation_range", c.rotation_range);
    c.min_frames_kept = j.value("min_frames_kept", c.min_frames_kept);
    c.temporal_subsampling = j.value("temporal_subsampling", c.temporal_subsampling);
    c.spatial_masking = j.value("spatial_masking", c.spatial_masking);
    return c;
}

data::ScanSequence weak_view(const data::ScanSequence& seq, Rng& rng, const AugmentConfig& cfg) {
    data::ScanSequence out = seq;
    out.centers.reset();
    if (cfg.jitter_sigma == 0.0) return out;
    for (auto& f : out.frames)
        for (auto& p : f.points) {
            p.y += cfg.jitter_sigma * rng.normal();
            p.z += cfg.jitter_sigma * rng.normal();
        }
    return out;
}

data::ScanSequence strong_view(const data::ScanSequence& seq, Rng& rng, const AugmentConfig& cfg,
                               int n_points) {
    const int T = static_cast<int>(seq.frames.size());
    cfg.validate(T);

    // all randomness in a fixed order: frame choice, dropout, rotation angle
    std::vector<int> kept(T);
    for (int i = 0; i < T; ++i) kept[i] = i;
    if (cfg.temporal_subsampling) {
        const int k = rng.uniform_int(cfg.min_frames_kept, T);
        kept = rng.sample_without_replacement(T, k); // ascending: original order
    }

    // rotation pivot: centroid of the source sequence (origin once centered)
    double cy = 0.0, cz = 0.0;
    long n = 0;
    for (const auto& f : seq.frames)
        for (const auto& p : f.points) {
            cy += p.y;
            cz += p.z;
            ++n;
        }
    cy /= n;
    cz /= n;

    data::ScanSequence out = seq;
    out.centers.reset();
    out.frames.clear();
    for (int fi : kept) {
        data::PointCloudFrame f = seq.frames[fi];
        if (cfg.spatial_masking && cfg.dropout_p > 0.0) {
            std::vector<data::LidarPoint> survivors;
            survivors.reserve(f.points.size());
            for (const auto& p : f.points)
                if (rng.uniform() >= cfg.dropout_p) survivors.push_back(p);
            if (survivors.empty())
                survivors.push_back(f.points[rng.uniform_int(
                    0, static_cast<int>(f.points.size()) - 1)]);
            f.points = std::move(survivors);
            data::normalize_point_count(f, n_points, rng);
        }
        out.frames.push_back(std::move(f));
    }

    if (cfg.spatial_masking && cfg.rotation_range > 0.0) {
        const double theta = rng.uniform(-cfg.rotation_range, cfg.rotation_range);
        const double ct = std::cos(theta), st = std::sin(theta);
        for (auto& f : out.frames)
            for (auto& p : f.points) {
                const double dy = p.y - cy, dz = p.z - cz;
                p.y = cy + ct * dy - st * dz;
                p.z = cz + st * dy + ct * dz;
            }
    }
    return out;
}

ViewPair make_view_pair(const data::ScanSequence& seq, Rng& rng, const AugmentConfig& cfg,
                        int n_points) {
    Rng weak_rng(rng.next_u64());
    Rng strong_rng(rng.next_u64());
    ViewPair vp;
    vp.weak = weak_view(seq, weak_rng, cfg);
    vp.strong = strong_view(seq, strong_rng, cfg, n_points);
    return vp;
}

} // namespace vortexlab::aug

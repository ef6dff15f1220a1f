#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "vortexlab/augment.hpp"
#include "vortexlab/dataio.hpp"

using namespace vortexlab;
using namespace vortexlab::aug;
using data::ScanSequence;

namespace {

ScanSequence centered_sequence(int T, int n, uint64_t seed = 1) {
    Rng rng(seed);
    ScanSequence s;
    s.event_id = "ev" + std::to_string(seed);
    for (int k = 0; k < T; ++k) {
        data::PointCloudFrame f;
        f.timestamp = 7.0 * k;
        for (int i = 0; i < n; ++i)
            f.points.push_back({rng.uniform(-60, 60), rng.uniform(-40, 40), rng.uniform(-8, 8)});
        s.frames.push_back(std::move(f));
    }
    data::center_sequence(s);
    return s;
}

} // namespace

TEST_CASE("weak view with zero jitter is the identity") {
    const auto seq = centered_sequence(5, 64);
    AugmentConfig cfg;
    cfg.jitter_sigma = 0.0;
    Rng rng(2);
    const auto v = weak_view(seq, rng, cfg);
    REQUIRE(v.frames.size() == seq.frames.size());
    for (size_t k = 0; k < v.frames.size(); ++k)
        for (size_t i = 0; i < v.frames[k].points.size(); ++i) {
            CHECK(v.frames[k].points[i].y == seq.frames[k].points[i].y);
            CHECK(v.frames[k].points[i].z == seq.frames[k].points[i].z);
        }
}

TEST_CASE("weak view jitter has the configured spread and keeps structure") {
    const auto seq = centered_sequence(5, 20000);
    AugmentConfig cfg;
    cfg.jitter_sigma = 0.1;
    Rng rng(3);
    const auto v = weak_view(seq, rng, cfg);
    REQUIRE(v.frames.size() == 5);
    double s2 = 0;
    long n = 0;
    for (size_t k = 0; k < 5; ++k) {
        CHECK(v.frames[k].points.size() == seq.frames[k].points.size());
        for (size_t i = 0; i < v.frames[k].points.size(); ++i) {
            const double dy = v.frames[k].points[i].y - seq.frames[k].points[i].y;
            const double dz = v.frames[k].points[i].z - seq.frames[k].points[i].z;
            CHECK(v.frames[k].points[i].vr == seq.frames[k].points[i].vr);
            s2 += dy * dy + dz * dz;
            n += 2;
        }
    }
    const double std_emp = std::sqrt(s2 / n);
    CHECK(std_emp > 0.09);
    CHECK(std_emp < 0.11);
}

TEST_CASE("strong view with all augmentations off is the identity") {
    const auto seq = centered_sequence(5, 64);
    AugmentConfig cfg;
    cfg.dropout_p = 0.0;
    cfg.rotation_range = 0.0;
    cfg.min_frames_kept = 5;
    Rng rng(4);
    const auto v = strong_view(seq, rng, cfg, 64);
    REQUIRE(v.frames.size() == 5);
    for (size_t k = 0; k < 5; ++k)
        for (size_t i = 0; i < 64; ++i) {
            CHECK(v.frames[k].points[i].y == seq.frames[k].points[i].y);
            CHECK(v.frames[k].points[i].z == seq.frames[k].points[i].z);
        }
}

TEST_CASE("forced rotation by pi/2 about the origin is an exact isometry") {
    // rotation_range zero-width interval at pi/2 via min==max is not
    // expressible; instead feed a crafted rng-free path by checking the
    // isometry property over random draws
    const auto seq = centered_sequence(5, 256);
    AugmentConfig cfg;
    cfg.dropout_p = 0.0;
    cfg.min_frames_kept = 5;
    cfg.rotation_range = 3.14159265358979; // up to +-pi
    Rng rng(5);
    const auto v = strong_view(seq, rng, cfg, 256);
    for (size_t k = 0; k < 5; ++k)
        for (size_t i = 0; i < 256; ++i) {
            const auto& a = seq.frames[k].points[i];
            const auto& b = v.frames[k].points[i];
            const double ra = std::hypot(a.y, a.z), rb = std::hypot(b.y, b.z);
            CHECK(std::abs(ra - rb) < 1e-9);
            CHECK(a.vr == b.vr);
        }
    // one shared angle: the frame-0 rotation maps frame 1 points exactly too
    const auto& a0 = seq.frames[0].points[0];
    const auto& b0 = v.frames[0].points[0];
    const double theta = std::atan2(b0.z, b0.y) - std::atan2(a0.z, a0.y);
    for (size_t k = 0; k < 5; ++k)
        for (size_t i = 0; i < 256; i += 37) {
            const auto& a = seq.frames[k].points[i];
            const auto& b = v.frames[k].points[i];
            const double ey = a.y * std::cos(theta) - a.z * std::sin(theta);
            const double ez = a.y * std::sin(theta) + a.z * std::cos(theta);
            CHECK(b.y == doctest::Approx(ey).epsilon(1e-7));
            CHECK(b.z == doctest::Approx(ez).epsilon(1e-7));
        }
}

TEST_CASE("dropout keeps roughly 70 percent before re-padding") {
    // count surviving distinct originals over a large frame
    const auto seq = centered_sequence(1, 100000);
    AugmentConfig cfg;
    cfg.dropout_p = 0.3;
    cfg.rotation_range = 0.0;
    cfg.min_frames_kept = 1;
    Rng rng(6);
    const auto v = strong_view(seq, rng, cfg, 100000);
    std::set<std::pair<double, double>> uniq;
    for (const auto& p : v.frames[0].points) uniq.insert({p.y, p.z});
    const double kept = static_cast<double>(uniq.size()) / 100000.0;
    CHECK(kept > 0.66);
    CHECK(kept < 0.74);
    CHECK(v.frames[0].points.size() == 100000); // re-padded to N
}

TEST_CASE("temporal subsampling keeps a strictly increasing frame subset") {
    const auto seq = centered_sequence(5, 32);
    AugmentConfig cfg;
    for (uint64_t s = 0; s < 200; ++s) {
        Rng rng(s);
        const auto v = strong_view(seq, rng, cfg, 32);
        CHECK(v.frames.size() >= 3);
        CHECK(v.frames.size() <= 5);
        for (size_t k = 1; k < v.frames.size(); ++k)
            CHECK(v.frames[k].timestamp > v.frames[k - 1].timestamp);
    }
}

TEST_CASE("view pairs share the event id, are seeded, and differ") {
    const auto seq = centered_sequence(5, 128);
    AugmentConfig cfg;
    Rng r1(9), r2(9);
    const auto p1 = make_view_pair(seq, r1, cfg, 128);
    const auto p2 = make_view_pair(seq, r2, cfg, 128);
    CHECK(p1.weak.event_id == seq.event_id);
    CHECK(p1.strong.event_id == seq.event_id);
    // identical seeds give identical pairs
    CHECK(p1.weak.frames[0].points[0].y == p2.weak.frames[0].points[0].y);
    CHECK(p1.strong.frames[0].points[0].y == p2.strong.frames[0].points[0].y);
    CHECK(p1.strong.frames.size() == p2.strong.frames.size());
    // weak and strong views differ somewhere
    bool differ = p1.weak.frames.size() != p1.strong.frames.size();
    if (!differ)
        for (size_t k = 0; k < p1.weak.frames.size() && !differ; ++k)
            for (size_t i = 0; i < p1.weak.frames[k].points.size() && !differ; ++i)
                differ = p1.weak.frames[k].points[i].y != p1.strong.frames[k].points[i].y;
    CHECK(differ);
}

TEST_CASE("ablation switches disable their augmentations") {
    const auto seq = centered_sequence(5, 64);
    AugmentConfig cfg;
    cfg.temporal_subsampling = false;
    Rng rng(11);
    const auto v = strong_view(seq, rng, cfg, 64);
    CHECK(v.frames.size() == 5);

    AugmentConfig cfg2;
    cfg2.spatial_masking = false;
    Rng rng2(12);
    const auto v2 = strong_view(seq, rng2, cfg2, 64);
    // no dropout, no rotation: kept frames match the source exactly
    for (size_t k = 0; k < v2.frames.size(); ++k) {
        bool found = false;
        for (const auto& f : seq.frames)
            if (f.timestamp == v2.frames[k].timestamp) {
                found = true;
                for (size_t i = 0; i < 64; ++i)
                    CHECK(f.points[i].y == v2.frames[k].points[i].y);
            }
        CHECK(found);
    }
}

TEST_CASE("config validation rejects bad fields") {
    AugmentConfig cfg;
    cfg.dropout_p = 1.0;
    CHECK_THROWS(cfg.validate(5));
    cfg = AugmentConfig{};
    cfg.min_frames_kept = 6;
    CHECK_THROWS(cfg.validate(5));
    cfg = AugmentConfig{};
    cfg.rotation_range = -0.1;
    CHECK_THROWS(cfg.validate(5));
}

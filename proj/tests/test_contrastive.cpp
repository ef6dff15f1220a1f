#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "vortexlab/augment.hpp"
#include "vortexlab/contrastive.hpp"
#include "vortexlab/dataio.hpp"
#include "testutil.hpp"

using namespace vortexlab;
using namespace vortexlab::ssl;

namespace {

Tensor<double> random_unit_rows(int n, int d, Rng& rng) {
    Tensor<double> z = Tensor<double>::zeros({n, d});
    for (int r = 0; r < n; ++r) {
        double s2 = 0;
        for (int c = 0; c < d; ++c) {
            z.at(r, c) = rng.normal();
            s2 += z.at(r, c) * z.at(r, c);
        }
        const double inv = 1.0 / std::sqrt(s2);
        for (int c = 0; c < d; ++c) z.at(r, c) *= inv;
    }
    return z;
}

double loss_of(const Tensor<double>& z, double tau) {
    Tape<double> tape;
    return tape.val(info_nce(tape, tape.leaf(z, true), tau)).data[0];
}

data::ScanSequence toy_sequence(int T, int n, uint64_t seed) {
    Rng rng(seed);
    data::ScanSequence s;
    s.event_id = "c" + std::to_string(seed);
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

TEST_CASE("info_nce: single pair has zero loss") {
    Rng rng(1);
    const auto z = random_unit_rows(2, 16, rng);
    CHECK(loss_of(z, 0.07) == 0.0);
}

TEST_CASE("info_nce: identical positives with orthogonal negatives, closed form") {
    // B=2 in d>=4: pairs (e0,e0) and (e1,e1); all cross similarities zero
    Tensor<double> z = Tensor<double>::zeros({4, 4});
    z.at(0, 0) = 1.0; // weak views
    z.at(1, 1) = 1.0;
    z.at(2, 0) = 1.0; // strong views, identical to their anchors
    z.at(3, 1) = 1.0;
    const double tau = 0.07;
    const double expect = std::log(1.0 + 2.0 * std::exp(-1.0 / tau));
    CHECK(loss_of(z, tau) == doctest::Approx(expect).epsilon(1e-9));
    CHECK(loss_of(z, tau) == doctest::Approx(1.25e-6).epsilon(0.01));
}

TEST_CASE("info_nce: random embeddings calibrate to ln(2B-1) in high dimension") {
    const int B = 32;
    const double expect = std::log(2.0 * B - 1.0); // ln 63
    double mean = 0;
    for (int trial = 0; trial < 100; ++trial) {
        Rng rng = rng_stream(4242, {static_cast<uint64_t>(trial)});
        const auto z = random_unit_rows(2 * B, 1024, rng);
        mean += loss_of(z, 0.07);
    }
    mean /= 100.0;
    CHECK(mean > 0.9 * expect);
    CHECK(mean < 1.1 * expect);
}

TEST_CASE("info_nce: invariant under a shared orthogonal transform") {
    Rng rng(7);
    const int n = 12, d = 8;
    const auto z = random_unit_rows(n, d, rng);
    // random orthogonal matrix via Gram-Schmidt
    std::vector<std::vector<double>> q(d, std::vector<double>(d));
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) q[i][j] = rng.normal();
        for (int k = 0; k < i; ++k) {
            double dot = 0;
            for (int j = 0; j < d; ++j) dot += q[i][j] * q[k][j];
            for (int j = 0; j < d; ++j) q[i][j] -= dot * q[k][j];
        }
        double nrm = 0;
        for (int j = 0; j < d; ++j) nrm += q[i][j] * q[i][j];
        nrm = std::sqrt(nrm);
        for (int j = 0; j < d; ++j) q[i][j] /= nrm;
    }
    Tensor<double> zr = Tensor<double>::zeros({n, d});
    for (int r = 0; r < n; ++r)
        for (int i = 0; i < d; ++i) {
            double acc = 0;
            for (int j = 0; j < d; ++j) acc += q[i][j] * z.at(r, j);
            zr.at(r, i) = acc;
        }
    CHECK(std::abs(loss_of(z, 0.07) - loss_of(zr, 0.07)) < 1e-9);
}

TEST_CASE("info_nce: strictly decreases as a positive pair tightens") {
    // B=2; rotate the second view of pair 0 toward its anchor
    auto make = [](double angle) {
        Tensor<double> z = Tensor<double>::zeros({4, 3});
        z.at(0, 0) = 1.0;
        z.at(1, 1) = 1.0;
        z.at(2, 0) = std::cos(angle);
        z.at(2, 2) = std::sin(angle);
        z.at(3, 1) = 1.0;
        return z;
    };
    double last = 1e300;
    for (double angle : {1.2, 0.9, 0.6, 0.3, 0.05}) {
        const double l = loss_of(make(angle), 0.07);
        CHECK(l < last);
        last = l;
    }
}

TEST_CASE("info_nce: rejects non-unit rows and odd counts") {
    Tape<double> tape;
    Tensor<double> bad = Tensor<double>::full({4, 4}, 0.9);
    CHECK_THROWS_AS(info_nce(tape, tape.leaf(bad, false), 0.07), std::invalid_argument);
    Rng rng(3);
    const auto odd = random_unit_rows(3, 4, rng);
    CHECK_THROWS_AS(info_nce(tape, tape.leaf(odd, false), 0.07), std::invalid_argument);
    const auto ok = random_unit_rows(4, 4, rng);
    CHECK_THROWS_AS(info_nce(tape, tape.leaf(ok, false), 0.0), std::invalid_argument);
}

TEST_CASE("alignment: trivial values and brute-force agreement") {
    std::vector<std::vector<double>> a{{1, 0}, {0, 1}};
    CHECK(alignment(a, a) == 0.0);
    std::vector<std::vector<double>> b{{1, 0}, {0.6, 0.8}};
    // first pair identical, second at distance sqrt(0.2^2+0.2^2)... compute directly
    double d2 = (0.6 - 0.0) * (0.6 - 0.0) + (0.8 - 1.0) * (0.8 - 1.0);
    CHECK(alignment(a, b) == doctest::Approx(d2 / 2.0).epsilon(1e-12));
    // single pair at euclidean distance d gives d^2
    std::vector<std::vector<double>> p{{0, 0}}, q{{3, 4}};
    CHECK(alignment(p, q) == doctest::Approx(25.0).epsilon(1e-12));
    CHECK(alignment(p, q, 1.0) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK_THROWS_AS(alignment({}, {}), std::invalid_argument);
    CHECK(alignment(a, b) >= 0.0);
}

TEST_CASE("uniformity: trivial values, antipodal pair, brute-force agreement") {
    std::vector<std::vector<double>> same{{1, 0}, {1, 0}, {1, 0}};
    CHECK(uniformity(same) == doctest::Approx(0.0).epsilon(1e-12));
    std::vector<std::vector<double>> anti{{1, 0}, {-1, 0}};
    CHECK(uniformity(anti, 2.0) == doctest::Approx(-8.0).epsilon(1e-12));

    Rng rng(11);
    const auto z = random_unit_rows(100, 64, rng);
    std::vector<std::vector<double>> zv(100, std::vector<double>(64));
    for (int r = 0; r < 100; ++r)
        for (int c = 0; c < 64; ++c) zv[r][c] = z.at(r, c);
    double acc = 0;
    long pairs = 0;
    for (int i = 0; i < 100; ++i)
        for (int j = i + 1; j < 100; ++j) {
            double d2 = 0;
            for (int c = 0; c < 64; ++c) d2 += (zv[i][c] - zv[j][c]) * (zv[i][c] - zv[j][c]);
            acc += std::exp(-2.0 * d2);
            ++pairs;
        }
    CHECK(uniformity(zv) == doctest::Approx(std::log(acc / pairs)).epsilon(1e-9));
    CHECK(uniformity(zv) <= 0.0);
    CHECK_THROWS_AS(uniformity({{1.0, 0.0}}), std::invalid_argument);
}

TEST_CASE("gradient check: full two-view InfoNCE through the whole model") {
    model::EncoderConfig cfg;
    cfg.mlp_widths = {8, 16};
    cfg.hidden_dim = 12;
    cfg.proj_dims = {10, 6};
    cfg.center_hidden = 8;
    cfg.forecast_hidden = 8;
    const auto params = init_params<double>(cfg, 118);

    aug::AugmentConfig acfg;
    std::vector<data::ScanSequence> seqs{toy_sequence(5, 16, 119), toy_sequence(5, 16, 120)};
    std::vector<aug::ViewPair> pairs;
    for (size_t i = 0; i < seqs.size(); ++i) {
        Rng arng = rng_stream(99, {static_cast<uint64_t>(i)});
        pairs.push_back(aug::make_view_pair(seqs[i], arng, acfg, 16));
    }
    std::vector<const data::ScanSequence*> views;
    for (const auto& p : pairs) views.push_back(&p.weak);
    for (const auto& p : pairs) views.push_back(&p.strong);

    auto build = [&](Tape<double>& tape, const model::ParamNodes& pn) {
        const auto pb = model::pack_sequences<double>(views);
        const int points = tape.leaf(pb.points, false);
        const auto er = model::encode_frames(tape, pn, cfg, points, pb.frame_starts);
        std::vector<int> z_ids;
        for (size_t q = 0; q < views.size(); ++q) {
            const int h = model::aggregate_sequence(tape, pn, cfg, er.pooled,
                                                    pb.seq_frame_begin[q], pb.seq_frame_count[q]);
            z_ids.push_back(model::project(tape, pn, cfg, h));
        }
        return info_nce(tape, tape.concat_rows(z_ids), 0.07);
    };
    {
        Tape<double> probe;
        std::set<std::string> all;
        for (const auto& [k, v] : params.params) all.insert(k);
        const auto pn = model::register_params(probe, params, all);
        build(probe, pn);
        REQUIRE(vxtest::relu_margin(probe) > 1e-4);
        REQUIRE(vxtest::pool_margin(probe) > 5e-5);
    }
    CHECK(vxtest::fd_check_params(params, build) < 1e-5);
}

TEST_CASE("pretrain: deterministic metrics, architecture-complete checkpoint") {
    std::vector<data::ScanSequence> raw;
    for (uint64_t i = 0; i < 24; ++i) raw.push_back(toy_sequence(5, 32, 200 + i));

    PretrainConfig cfg;
    cfg.enc.mlp_widths = {8, 16};
    cfg.enc.hidden_dim = 12;
    cfg.enc.proj_dims = {10, 6};
    cfg.enc.center_hidden = 8;
    cfg.enc.forecast_hidden = 8;
    cfg.epochs = 2;
    cfg.batch_size = 4;
    cfg.n_points = 32;
    cfg.seed = 5;
    cfg.split_seed = 5;

    const auto r1 = pretrain(raw, cfg);
    const auto r2 = pretrain(raw, cfg);
    REQUIRE(r1.metrics.size() == r2.metrics.size());
    for (size_t i = 0; i < r1.metrics.size(); ++i) {
        CHECK(r1.metrics[i].loss == r2.metrics[i].loss); // bitwise
        CHECK(r1.metrics[i].uniformity == r2.metrics[i].uniformity);
    }
    // two epochs logged for train and val
    int train_rows = 0;
    for (const auto& m : r1.metrics)
        if (m.split == "train") ++train_rows;
    CHECK(train_rows == 2);

    const auto reference = model::init_params<float>(cfg.enc, 0);
    CHECK(r1.checkpoint.tensors.size() == reference.params.size());
    for (const auto& [name, t] : reference.params) {
        REQUIRE(r1.checkpoint.tensors.count(name) == 1);
        CHECK(r1.checkpoint.tensors.at(name).shape == t.shape);
    }
    CHECK_THROWS(pretrain({}, cfg));
}

TEST_CASE("initialization loss sits near ln(2B-1) on a real batch") {
    std::vector<data::ScanSequence> raw;
    for (uint64_t i = 0; i < 16; ++i) raw.push_back(toy_sequence(5, 64, 400 + i));
    model::EncoderConfig cfg;
    cfg.mlp_widths = {16, 32};
    cfg.hidden_dim = 24;
    cfg.proj_dims = {16, 8};
    const auto params = init_params<float>(cfg, 90);
    aug::AugmentConfig acfg;

    std::vector<aug::ViewPair> pairs;
    for (size_t i = 0; i < raw.size(); ++i) {
        Rng arng = rng_stream(91, {static_cast<uint64_t>(i)});
        pairs.push_back(aug::make_view_pair(raw[i], arng, acfg, 64));
    }
    std::vector<const data::ScanSequence*> views;
    for (const auto& p : pairs) views.push_back(&p.weak);
    for (const auto& p : pairs) views.push_back(&p.strong);

    Tape<float> tape;
    const auto pn = model::register_params(tape, params, {});
    const auto pb = model::pack_sequences<float>(views);
    const int points = tape.leaf(pb.points, false);
    const auto er = model::encode_frames(tape, pn, cfg, points, pb.frame_starts);
    std::vector<int> z_ids;
    for (size_t q = 0; q < views.size(); ++q) {
        const int h = model::aggregate_sequence(tape, pn, cfg, er.pooled, pb.seq_frame_begin[q],
                                                pb.seq_frame_count[q]);
        z_ids.push_back(model::project(tape, pn, cfg, h));
    }
    const double loss = tape.val(info_nce(tape, tape.concat_rows(z_ids), 0.07)).data[0];
    const double ref = std::log(2.0 * 16 - 1.0);
    CHECK(loss > 0.8 * ref);
    CHECK(loss < 1.2 * ref);
}

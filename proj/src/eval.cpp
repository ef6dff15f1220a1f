#include "vortexlab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "vortexlab/error.hpp"
#include "vortexlab/tape.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace vortexlab::eval {

double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median: empty");
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string config_hash(const json& j) {
    const std::string s = j.dump();
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {
double sq_dist(const data::Vec2& a, const data::Vec2& b) {
    const double dy = a.y - b.y, dz = a.z - b.z;
    return dy * dy + dz * dz;
}
double dist(const data::Vec2& a, const data::Vec2& b) { return std::sqrt(sq_dist(a, b)); }
} // namespace

double rmse_centers(const std::vector<data::VortexCenters>& preds,
                    const std::vector<data::VortexCenters>& labels) {
    if (preds.size() != labels.size() || preds.empty())
        throw std::invalid_argument("rmse_centers: count mismatch");
    double acc = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
        // best of the two assignments, chosen by summed distance
        const double straight =
            dist(preds[i].port, labels[i].port) + dist(preds[i].star, labels[i].star);
        const double swapped =
            dist(preds[i].port, labels[i].star) + dist(preds[i].star, labels[i].port);
        if (straight <= swapped)
            acc += sq_dist(preds[i].port, labels[i].port) + sq_dist(preds[i].star, labels[i].star);
        else
            acc += sq_dist(preds[i].port, labels[i].star) + sq_dist(preds[i].star, labels[i].port);
    }
    return std::sqrt(acc / (2.0 * static_cast<double>(preds.size())));
}

ForecastScores forecast_eval(const std::vector<data::ScanSequence>& test_seqs,
                             const std::vector<std::vector<data::VortexCenters>>& abs_centers,
                             const ForecastFn& method, int history) {
    if (test_seqs.empty()) throw std::invalid_argument("forecast_eval: empty test set");
    std::vector<data::VortexCenters> p1, p2, l1, l2;
    for (size_t i = 0; i < test_seqs.size(); ++i) {
        if (static_cast<int>(abs_centers[i].size()) < history + 2)
            throw std::invalid_argument("forecast_eval: sequence shorter than history + horizons");
        std::vector<data::VortexCenters> hist(abs_centers[i].begin(),
                                              abs_centers[i].begin() + history);
        const auto pred = method(test_seqs[i], hist);
        p1.push_back(pred[0]);
        p2.push_back(pred[1]);
        l1.push_back(abs_centers[i][history]);
        l2.push_back(abs_centers[i][history + 1]);
    }
    return {rmse_centers(p1, l1), rmse_centers(p2, l2)};
}

double linear_probe(const std::vector<std::vector<double>>& train_x,
                    const std::vector<int>& train_y,
                    const std::vector<std::vector<double>>& test_x,
                    const std::vector<int>& test_y, int n_classes, uint64_t seed, int epochs,
                    double lr) {
    if (train_x.empty() || test_x.empty()) throw std::invalid_argument("linear_probe: empty split");
    std::set<int> distinct(train_y.begin(), train_y.end());
    if (distinct.size() < 2) throw std::invalid_argument("linear_probe: single-class dataset");
    const int d = static_cast<int>(train_x[0].size());
    const int n = static_cast<int>(train_x.size());

    ParameterStore<float> params;
    Rng rng = rng_stream(seed, {Rng::key("probe-init")});
    params.params["probe.w"] = glorot_uniform<float>(n_classes, d, rng);
    params.params["probe.b"] = Tensor<float>::zeros({1, n_classes});
    std::set<std::string> trainable{"probe.w", "probe.b"};
    AdamState<float> adam;

    const int B = std::min(64, n);
    const long steps_per_epoch = (n + B - 1) / B;
    long step = 0;
    const long total_steps = steps_per_epoch * epochs;
    for (int epoch = 1; epoch <= epochs; ++epoch) {
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng srng = rng_stream(seed, {Rng::key("probe-shuffle"), static_cast<uint64_t>(epoch)});
        srng.shuffle(order);
        for (long s = 0; s < steps_per_epoch; ++s) {
            const long b0 = s * B, b1 = std::min<long>((s + 1) * B, n);
            Tensor<float> x = Tensor<float>::zeros({static_cast<int>(b1 - b0), d});
            std::vector<int> pos;
            for (long b = b0; b < b1; ++b) {
                for (int c = 0; c < d; ++c)
                    x.at(static_cast<int>(b - b0), c) =
                        static_cast<float>(train_x[order[b]][c]);
                pos.push_back(static_cast<int>(b - b0) * n_classes + train_y[order[b]]);
            }
            Tape<float> tape;
            const auto pn = model::register_params(tape, params, trainable);
            const int xs = tape.leaf(std::move(x), false);
            const int logits =
                tape.add_rowvec(tape.matmul_nt(xs, pn.at("probe.w")), pn.at("probe.b"));
            const int lse = tape.row_logsumexp(logits);
            const int correct = tape.gather(logits, pos);
            const int loss_id = tape.mean_all(tape.sub(lse, correct));
            auto grads = tape.backward(loss_id);
            std::map<std::string, Tensor<float>> gmap;
            for (const auto& name : trainable) gmap[name] = tape.grad_of(grads, pn.at(name));
            adam_step(params, gmap, adam, cosine_lr(step, total_steps, lr));
            ++step;
        }
    }

    const auto& W = params.params["probe.w"];
    const auto& bias = params.params["probe.b"];
    int hits = 0;
    for (size_t i = 0; i < test_x.size(); ++i) {
        int best = 0;
        double best_v = -1e300;
        for (int c = 0; c < n_classes; ++c) {
            double v = bias.data[c];
            for (int k = 0; k < d; ++k) v += W.at(c, k) * test_x[i][k];
            if (v > best_v) {
                best_v = v;
                best = c;
            }
        }
        if (best == test_y[i]) ++hits;
    }
    return 100.0 * hits / static_cast<double>(test_x.size());
}

double ExperimentReport::median_of(const std::string& method, const std::string& variant) const {
    std::vector<double> vals;
    for (const auto& r : rows)
        if (r.method == method && r.variant == variant) vals.push_back(r.value);
    return median(vals);
}

void write_report_csv(const ExperimentReport& report, const fs::path& path,
                      const std::vector<std::string>& header) {
    std::ofstream out(path);
    if (!out) throw runtime_error_("cannot write " + path.string());
    out << "# experiment=" << report.experiment_id << " config_hash=" << report.config_hash
        << "\n";
    for (size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << "\n";
    for (const auto& r : report.rows)
        out << r.method << "," << r.variant << "," << r.seed << "," << data::format_g9(r.value)
            << "\n";
}

LabeledBench make_labeled_bench(const fs::path& labeled_dir, int n_points, bool center,
                                uint64_t split_seed, std::array<double, 3> ratios) {
    return make_labeled_bench(data::load_dataset(labeled_dir), n_points, center, split_seed,
                              ratios);
}

LabeledBench make_labeled_bench(const data::Dataset& ds, int n_points, bool center,
                                uint64_t split_seed, std::array<double, 3> ratios) {
    if (!ds.labeled) throw runtime_error_("make_labeled_bench: dataset is unlabeled");
    LabeledBench bench;
    bench.seqs = train::prepare_sequences(ds.sequences, 5, n_points, center, split_seed);
    for (const auto& s : bench.seqs) {
        if (!s.centers || !s.class_id)
            throw runtime_error_("make_labeled_bench: sequence missing labels: " + s.id());
        std::vector<data::VortexCenters> abs = *s.centers;
        for (auto& c : abs) {
            c.port.y += s.centroid_removed.y;
            c.port.z += s.centroid_removed.z;
            c.star.y += s.centroid_removed.y;
            c.star.z += s.centroid_removed.z;
        }
        bench.abs_centers.push_back(std::move(abs));
        bench.class_ids.push_back(*s.class_id);
    }
    std::set<std::string> events;
    for (const auto& s : bench.seqs) events.insert(s.event_id);
    const auto split = data::split_dataset({events.begin(), events.end()}, ratios, split_seed);
    const std::set<std::string> tr(split.train.begin(), split.train.end());
    const std::set<std::string> va(split.val.begin(), split.val.end());
    for (size_t i = 0; i < bench.seqs.size(); ++i) {
        if (tr.count(bench.seqs[i].event_id)) bench.train_idx.push_back(static_cast<int>(i));
        else if (va.count(bench.seqs[i].event_id)) bench.val_idx.push_back(static_cast<int>(i));
        else bench.test_idx.push_back(static_cast<int>(i));
    }
    return bench;
}

namespace {

std::vector<data::ScanSequence> gather_seqs(const LabeledBench& bench,
                                            const std::vector<int>& idx) {
    std::vector<data::ScanSequence> out;
    for (int i : idx) out.push_back(bench.seqs[i]);
    return out;
}

// center RMSE of a trained model over the test split, in the sequence frame
double model_center_rmse(const LabeledBench& bench, const ParameterStore<float>& params,
                         const model::EncoderConfig& enc) {
    std::vector<data::VortexCenters> preds, labels;
    for (int i : bench.test_idx) {
        preds.push_back(train::predict_centers(params, enc, bench.seqs[i]));
        labels.push_back(bench.seqs[i].centers->back());
    }
    return rmse_centers(preds, labels);
}

double heuristic_center_rmse(const LabeledBench& bench,
                             const std::function<data::VortexCenters(
                                 const data::PointCloudFrame&)>& method) {
    std::vector<data::VortexCenters> preds, labels;
    for (int i : bench.test_idx) {
        preds.push_back(method(bench.seqs[i].frames.back()));
        labels.push_back(bench.seqs[i].centers->back());
    }
    return rmse_centers(preds, labels);
}

} // namespace

ExperimentReport probe_experiment(const LabeledBench& bench, const data::Checkpoint& pretrained,
                                  const ProbeConfig& cfg, const fs::path& out_dir) {
    const auto enc = train::config_from_checkpoint(pretrained);
    const auto pre_params = train::from_checkpoint(pretrained, enc);

    ExperimentReport rep;
    rep.experiment_id = "table1_probe";
    rep.config_snapshot = {{"n_classes", cfg.n_classes}, {"epochs", cfg.epochs}, {"lr", cfg.lr}};
    rep.config_hash = config_hash(rep.config_snapshot);

    const auto train_seqs = gather_seqs(bench, bench.train_idx);
    const auto test_seqs = gather_seqs(bench, bench.test_idx);
    std::vector<int> train_y, test_y;
    for (int i : bench.train_idx) train_y.push_back(bench.class_ids[i]);
    for (int i : bench.test_idx) test_y.push_back(bench.class_ids[i]);

    const auto pre_train_x = train::embed_sequences(pre_params, enc, train_seqs);
    const auto pre_test_x = train::embed_sequences(pre_params, enc, test_seqs);
    // frame-level features from the same frozen encoder (spatial-only view)
    const auto frame_train_x = train::embed_frames(pre_params, enc, train_seqs);
    const auto frame_test_x = train::embed_frames(pre_params, enc, test_seqs);
    std::vector<int> frame_train_y, frame_test_y;
    for (size_t q = 0; q < train_seqs.size(); ++q)
        for (size_t f = 0; f < train_seqs[q].frames.size(); ++f)
            frame_train_y.push_back(train_y[q]);
    for (size_t q = 0; q < test_seqs.size(); ++q)
        for (size_t f = 0; f < test_seqs[q].frames.size(); ++f) frame_test_y.push_back(test_y[q]);

    for (uint64_t seed : cfg.seeds) {
        const auto rand_params = model::init_params<float>(enc, seed);
        const auto rand_train_x = train::embed_sequences(rand_params, enc, train_seqs);
        const auto rand_test_x = train::embed_sequences(rand_params, enc, test_seqs);
        rep.rows.push_back({"random_init", "sequence", seed,
                            linear_probe(rand_train_x, train_y, rand_test_x, test_y,
                                         cfg.n_classes, seed, cfg.epochs, cfg.lr)});
        rep.rows.push_back({"pretrained_spatial", "frame", seed,
                            linear_probe(frame_train_x, frame_train_y, frame_test_x, frame_test_y,
                                         cfg.n_classes, seed, cfg.epochs, cfg.lr)});
        rep.rows.push_back({"xvortex", "sequence", seed,
                            linear_probe(pre_train_x, train_y, pre_test_x, test_y, cfg.n_classes,
                                         seed, cfg.epochs, cfg.lr)});
    }
    fs::create_directories(out_dir);
    rep.csv_path = out_dir / "table1_probe.csv";
    write_report_csv(rep, rep.csv_path, {"method", "input_view", "seed", "accuracy_pct"});
    return rep;
}

ExperimentReport label_fraction_experiment(const LabeledBench& bench,
                                           const data::Checkpoint& pretrained,
                                           const LabelEfficiencyConfig& cfg,
                                           const fs::path& out_dir) {
    const auto enc = train::config_from_checkpoint(pretrained);
    ExperimentReport rep;
    rep.experiment_id = "table2_label_efficiency";
    rep.config_snapshot = {{"fractions", cfg.fractions},
                           {"epochs", cfg.epochs},
                           {"batch_size", cfg.batch_size},
                           {"lr0", cfg.lr0}};
    rep.config_hash = config_hash(rep.config_snapshot);

    // heuristics: no learning, identical across fractions by construction
    const double dbscan_rmse = heuristic_center_rmse(
        bench, [&](const data::PointCloudFrame& f) { return baselines::dbscan_centers(f, cfg.dbscan); });
    const double intensity_rmse = heuristic_center_rmse(
        bench, [](const data::PointCloudFrame& f) { return baselines::intensity_centroid(f); });

    for (double frac : cfg.fractions) {
        const std::string variant = data::format_g9(frac);
        rep.rows.push_back({"dbscan", variant, 0, dbscan_rmse});
        rep.rows.push_back({"intensity", variant, 0, intensity_rmse});
        for (uint64_t seed : cfg.seeds) {
            // fraction subset shared by both learned methods
            std::vector<int> pool = bench.train_idx;
            std::sort(pool.begin(), pool.end(), [&](int a, int b) {
                return bench.seqs[a].id() < bench.seqs[b].id();
            });
            Rng rng = rng_stream(cfg.subset_seed,
                                 {Rng::key("fraction"), Rng::key(variant), seed});
            rng.shuffle(pool);
            const int n_sub = std::max<int>(
                1, static_cast<int>(std::llround(frac * static_cast<double>(pool.size()))));
            pool.resize(n_sub);
            const auto subset = gather_seqs(bench, pool);

            if (cfg.learned_at_all_fractions || frac == cfg.fractions.front()) {
                train::FitConfig fit;
                fit.enc = enc;
                fit.epochs = cfg.epochs;
                fit.batch_size = cfg.batch_size;
                fit.lr0 = cfg.lr0;
                fit.seed = seed;
                const auto ft = train::finetune_center(subset, &pretrained, fit);
                rep.rows.push_back(
                    {"xvortex", variant, seed, model_center_rmse(bench, ft.params, enc)});
                const auto scratch = train::finetune_center(subset, nullptr, fit);
                rep.rows.push_back(
                    {"supervised", variant, seed, model_center_rmse(bench, scratch.params, enc)});
            }
        }
    }

    // delta vs best baseline at the smallest fraction
    const std::string v0 = data::format_g9(cfg.fractions.front());
    const double best_baseline =
        std::min({dbscan_rmse, intensity_rmse, rep.median_of("supervised", v0)});
    const double xv = rep.median_of("xvortex", v0);
    rep.rows.push_back({"delta_vs_best_baseline_pct", v0, 0,
                        100.0 * (best_baseline - xv) / best_baseline});

    fs::create_directories(out_dir);
    rep.csv_path = out_dir / "table2_label_efficiency.csv";
    write_report_csv(rep, rep.csv_path, {"method", "fraction", "seed", "center_rmse_m"});
    return rep;
}

ExperimentReport forecast_experiment(const LabeledBench& bench, const data::Checkpoint& pretrained,
                                     const ForecastExpConfig& cfg, const fs::path& out_dir) {
    const auto enc = train::config_from_checkpoint(pretrained);
    ExperimentReport rep;
    rep.experiment_id = "table3_forecast";
    rep.config_snapshot = {{"epochs", cfg.epochs},
                           {"batch_size", cfg.batch_size},
                           {"lr0", cfg.lr0},
                           {"traj_epochs", cfg.traj_epochs}};
    rep.config_hash = config_hash(rep.config_snapshot);

    const auto test_seqs = gather_seqs(bench, bench.test_idx);
    std::vector<std::vector<data::VortexCenters>> test_abs;
    for (int i : bench.test_idx) test_abs.push_back(bench.abs_centers[i]);
    const auto train_seqs = gather_seqs(bench, bench.train_idx);
    std::vector<std::vector<data::VortexCenters>> train_abs;
    for (int i : bench.train_idx) train_abs.push_back(bench.abs_centers[i]);

    const auto cv_scores = forecast_eval(
        test_seqs, test_abs,
        [](const data::ScanSequence&, const std::vector<data::VortexCenters>& hist) {
            return baselines::constant_velocity_forecast(hist);
        });
    const auto kalman_scores = forecast_eval(
        test_seqs, test_abs,
        [&](const data::ScanSequence&, const std::vector<data::VortexCenters>& hist) {
            return baselines::kalman_forecast(hist, cfg.kalman);
        });

    for (uint64_t seed : cfg.seeds) {
        rep.rows.push_back({"cv", "t1", seed, cv_scores.rmse_t1});
        rep.rows.push_back({"cv", "t2", seed, cv_scores.rmse_t2});
        rep.rows.push_back({"kalman", "t1", seed, kalman_scores.rmse_t1});
        rep.rows.push_back({"kalman", "t2", seed, kalman_scores.rmse_t2});

        const auto traj =
            baselines::train_trajectory_forecaster(train_abs, 3, seed, cfg.traj_epochs);
        const auto traj_scores = forecast_eval(
            test_seqs, test_abs,
            [&](const data::ScanSequence&, const std::vector<data::VortexCenters>& hist) {
                return baselines::trajectory_forecast(traj, hist);
            });
        rep.rows.push_back({"traj_lstm", "t1", seed, traj_scores.rmse_t1});
        rep.rows.push_back({"traj_lstm", "t2", seed, traj_scores.rmse_t2});

        train::FitConfig fit;
        fit.enc = enc;
        fit.epochs = cfg.epochs;
        fit.batch_size = cfg.batch_size;
        fit.lr0 = cfg.lr0;
        fit.seed = seed;
        const auto fc = train::train_forecast_head(train_seqs, pretrained, fit);
        const auto xv_scores = forecast_eval(
            test_seqs, test_abs,
            [&](const data::ScanSequence& seq, const std::vector<data::VortexCenters>&) {
                return train::predict_forecast(fc.params, enc, seq, 3);
            });
        rep.rows.push_back({"xvortex", "t1", seed, xv_scores.rmse_t1});
        rep.rows.push_back({"xvortex", "t2", seed, xv_scores.rmse_t2});
    }
    fs::create_directories(out_dir);
    rep.csv_path = out_dir / "table3_forecast.csv";
    write_report_csv(rep, rep.csv_path, {"method", "horizon", "seed", "forecast_rmse_m"});
    return rep;
}

ExperimentReport ablation_suite(const std::vector<data::ScanSequence>& unlabeled_raw,
                                const fs::path& labeled_dir, const AblationConfig& cfg,
                                const fs::path& out_dir) {
    struct Row {
        std::string name;
        bool temporal_subsampling, spatial_masking, center;
        std::string aggregator;
    };
    const std::vector<Row> rows = {
        {"full", true, true, true, "lstm"},
        {"wo_temporal_subsampling", false, true, true, "lstm"},
        {"wo_spatial_masking", true, false, true, "lstm"},
        {"wo_centering", true, true, false, "lstm"},
        {"wo_lstm_meanpool", true, true, true, "mean"},
    };

    ExperimentReport rep;
    rep.experiment_id = "table4_ablation";
    rep.config_snapshot = {{"pretrain_epochs", cfg.base.epochs},
                           {"max_sequences", cfg.base.max_sequences},
                           {"n_points", cfg.base.n_points},
                           {"finetune_epochs", cfg.finetune_epochs},
                           {"forecast_epochs", cfg.forecast_epochs}};
    rep.config_hash = config_hash(rep.config_snapshot);

    const auto labeled_ds = data::load_dataset(labeled_dir);
    std::map<bool, LabeledBench> bench_cache;
    for (const auto& row : rows) {
        if (!bench_cache.count(row.center))
            bench_cache.emplace(row.center, make_labeled_bench(labeled_ds, cfg.base.n_points,
                                                               row.center, cfg.base.split_seed));
        const auto& bench = bench_cache.at(row.center);
        for (uint64_t seed : cfg.seeds) {
            ssl::PretrainConfig pc = cfg.base;
            pc.seed = seed;
            pc.augment.temporal_subsampling = row.temporal_subsampling;
            pc.augment.spatial_masking = row.spatial_masking;
            pc.center = row.center;
            pc.enc.aggregator = row.aggregator;
            const auto pre = ssl::pretrain(unlabeled_raw, pc);

            train::FitConfig fit;
            fit.enc = pc.enc;
            fit.epochs = cfg.finetune_epochs;
            fit.batch_size = cfg.batch_size;
            fit.lr0 = cfg.lr0;
            fit.seed = seed;
            std::vector<int> train_idx = bench.train_idx;
            if (cfg.max_label_sequences > 0 &&
                static_cast<int>(train_idx.size()) > cfg.max_label_sequences) {
                std::sort(train_idx.begin(), train_idx.end(), [&](int a, int b) {
                    return bench.seqs[a].id() < bench.seqs[b].id();
                });
                train_idx.resize(cfg.max_label_sequences);
            }
            const auto train_seqs = gather_seqs(bench, train_idx);
            const auto ft = train::finetune_center(train_seqs, &pre.checkpoint, fit);
            rep.rows.push_back(
                {row.name, "center", seed, model_center_rmse(bench, ft.params, pc.enc)});

            train::FitConfig ffit = fit;
            ffit.epochs = cfg.forecast_epochs;
            const auto fc = train::train_forecast_head(train_seqs, pre.checkpoint, ffit);
            const auto test_seqs = gather_seqs(bench, bench.test_idx);
            std::vector<std::vector<data::VortexCenters>> test_abs;
            for (int i : bench.test_idx) test_abs.push_back(bench.abs_centers[i]);
            const auto scores = forecast_eval(
                test_seqs, test_abs,
                [&](const data::ScanSequence& seq, const std::vector<data::VortexCenters>&) {
                    return train::predict_forecast(fc.params, pc.enc, seq, 3);
                });
            rep.rows.push_back({row.name, "forecast_t1", seed, scores.rmse_t1});
        }
    }

    // delta rows vs the full model, medians across seeds
    for (const auto& row : rows) {
        if (row.name == "full") continue;
        for (const auto& metric : {"center", "forecast_t1"}) {
            const double d = rep.median_of(row.name, metric) - rep.median_of("full", metric);
            rep.rows.push_back({row.name + "_delta", metric, 0, d});
        }
    }

    fs::create_directories(out_dir);
    rep.csv_path = out_dir / "table4_ablation.csv";
    write_report_csv(rep, rep.csv_path, {"configuration", "metric", "seed", "rmse_m"});
    return rep;
}

} // namespace vortexlab::eval

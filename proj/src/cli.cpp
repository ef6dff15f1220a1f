#include "vortexlab/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "vortexlab/baselines.hpp"
#include "vortexlab/contrastive.hpp"
#include "vortexlab/dataio.hpp"
#include "vortexlab/downstream.hpp"
#include "vortexlab/error.hpp"
#include "vortexlab/eval.hpp"
#include "vortexlab/svgplot.hpp"
#include "vortexlab/threads.hpp"
#include "vortexlab/wakesim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace vortexlab::cli {

namespace {

constexpr const char* kVersion = "0.1.0";

// Flat dotted-key config: defaults <- config file <- CLI flags. Every key that
// is read lands in the resolved snapshot.
struct Cfg {
    json file = json::object();
    json resolved = json::object();

    void load(const std::string& path) {
        if (path.empty()) return;
        file = data::load_json_file(path);
        if (!file.is_object()) throw config_error("config file must be a JSON object");
    }

    template <typename T>
    T get(const std::string& key, T def, const CLI::Option* opt = nullptr, const T* cli = nullptr) {
        T v = def;
        try {
            if (file.contains(key)) v = file.at(key).get<T>();
        } catch (const json::exception& e) {
            throw config_error("config key " + key + ": " + e.what());
        }
        if (opt != nullptr && opt->count() > 0 && cli != nullptr) v = *cli;
        resolved[key] = v;
        return v;
    }

    json get_json(const std::string& key, json def) {
        json v = std::move(def);
        if (file.contains(key)) v = file.at(key);
        resolved[key] = v;
        return v;
    }
};

int resolve_threads(Cfg& cfg, const CLI::Option* opt, int cli_threads) {
    int def = 1;
    if (const char* env = std::getenv("VORTEXLAB_THREADS")) def = std::atoi(env);
    const int t = cfg.get<int>("threads", def, opt, &cli_threads);
    set_compute_threads(t);
    return t;
}

// resolved_config.json and versions.txt land before any computation
void write_preamble(const fs::path& out_dir, const Cfg& cfg) {
    fs::create_directories(out_dir);
    data::write_json_file(out_dir / "resolved_config.json", cfg.resolved);
    std::ofstream v(out_dir / "versions.txt");
    v << "vortexlab " << kVersion << "\n";
    v << "compiler " << __VERSION__ << "\n";
    v << "nlohmann_json " << NLOHMANN_JSON_VERSION_MAJOR << "." << NLOHMANN_JSON_VERSION_MINOR
      << "." << NLOHMANN_JSON_VERSION_PATCH << "\n";
    v << "blas " << blas_config() << "\n";
}

model::EncoderConfig encoder_from_cfg(Cfg& cfg) {
    model::EncoderConfig base;
    model::EncoderConfig enc;
    enc.mlp_widths = cfg.get<std::vector<int>>("model.mlp_widths", base.mlp_widths);
    enc.hidden_dim = cfg.get<int>("model.hidden_dim", base.hidden_dim);
    enc.proj_dims = cfg.get<std::vector<int>>("model.proj_dims", base.proj_dims);
    enc.aggregator = cfg.get<std::string>("model.aggregator", base.aggregator);
    enc.center_hidden = cfg.get<int>("model.center_hidden", base.center_hidden);
    enc.forecast_hidden = cfg.get<int>("model.forecast_hidden", base.forecast_hidden);
    enc.validate();
    return enc;
}

std::vector<data::ScanSequence> load_sequences(const std::string& dir) {
    return data::load_dataset(dir).sequences;
}

int cmd_simulate(Cfg& cfg, const std::string& out) {
    sim::SimConfig sc;
    sc.n_sequences = cfg.resolved.at("sim.n_sequences").get<int>();
    sc.n_frames = cfg.resolved.at("sim.n_frames").get<int>();
    sc.labeled = cfg.resolved.at("sim.labeled").get<bool>();
    sc.master_seed = cfg.resolved.at("seed").get<uint64_t>();
    const json cat = cfg.get_json("sim.catalog", sc.catalog.to_json());
    sc.catalog = sim::CatalogConfig::from_json(cat);
    const json geo = cfg.get_json("sim.geometry", json());
    if (!geo.is_null()) {
        sc.geometry.y_origin = geo.value("y_origin", sc.geometry.y_origin);
        sc.geometry.z_origin = geo.value("z_origin", sc.geometry.z_origin);
        if (geo.contains("elevations"))
            sc.geometry.elevations = geo.at("elevations").get<std::vector<double>>();
        if (geo.contains("ranges")) sc.geometry.ranges = geo.at("ranges").get<std::vector<double>>();
        sc.geometry.validate();
    }
    write_preamble(out, cfg);
    sim::generate_dataset(sc, out);
    std::cout << "simulate: wrote " << sc.n_sequences << " sequences to " << out << "\n";
    return 0;
}

ssl::PretrainConfig pretrain_from_cfg(Cfg& cfg) {
    ssl::PretrainConfig pc;
    pc.enc = encoder_from_cfg(cfg);
    aug::AugmentConfig ac;
    ac.jitter_sigma = cfg.resolved.at("aug.jitter_sigma").get<double>();
    ac.dropout_p = cfg.resolved.at("aug.dropout_p").get<double>();
    ac.rotation_range = cfg.resolved.at("aug.rotation_range_deg").get<double>() * M_PI / 180.0;
    ac.min_frames_kept = cfg.resolved.at("aug.min_frames_kept").get<int>();
    ac.temporal_subsampling = cfg.get<bool>("aug.temporal_subsampling", true);
    ac.spatial_masking = cfg.get<bool>("aug.spatial_masking", true);
    pc.augment = ac;
    pc.epochs = cfg.resolved.at("pretrain.epochs").get<int>();
    pc.batch_size = cfg.resolved.at("pretrain.batch_size").get<int>();
    pc.temperature = cfg.resolved.at("pretrain.temperature").get<double>();
    pc.lr0 = cfg.get<double>("pretrain.lr0", 1e-3);
    pc.patience = cfg.get<int>("pretrain.patience", 10);
    pc.max_sequences = cfg.get<int>("pretrain.max_sequences", 0);
    pc.seed = cfg.resolved.at("seed").get<uint64_t>();
    pc.split_seed = cfg.get<uint64_t>("split.seed", 9601);
    pc.n_points = cfg.get<int>("data.n_points", 1024);
    pc.center = cfg.get<bool>("data.center", true);
    return pc;
}

int cmd_pretrain(Cfg& cfg, const std::string& data_dir, const std::string& out) {
    const auto pc = pretrain_from_cfg(cfg);
    write_preamble(out, cfg);
    const auto seqs = load_sequences(data_dir);
    const auto res = ssl::pretrain(seqs, pc);
    data::write_metrics_csv(fs::path(out) / "metrics.csv", res.metrics);
    data::save_checkpoint(fs::path(out) / "checkpoint.vxck", res.checkpoint);
    std::cout << "pretrain: " << res.epochs_run << " epochs, final train loss "
              << data::format_g9(res.metrics.empty() ? 0.0 : res.metrics.back().loss) << "\n";
    return 0;
}

int cmd_finetune(Cfg& cfg, const std::string& data_dir, const std::string& ck_path,
                 const std::string& out, bool from_scratch) {
    write_preamble(out, cfg);
    const uint64_t seed = cfg.resolved.at("seed").get<uint64_t>();
    const uint64_t split_seed = cfg.resolved.at("split.seed").get<uint64_t>();
    const int n_points = cfg.resolved.at("data.n_points").get<int>();
    const bool center = cfg.resolved.at("data.center").get<bool>();
    const double fraction = cfg.resolved.at("finetune.fraction").get<double>();

    data::Checkpoint ck;
    model::EncoderConfig enc;
    if (!ck_path.empty()) {
        ck = data::load_checkpoint(ck_path);
        enc = train::config_from_checkpoint(ck);
    } else {
        enc = encoder_from_cfg(cfg);
    }
    auto bench = eval::make_labeled_bench(data_dir, n_points, center, split_seed);
    std::vector<int> pool = bench.train_idx;
    std::sort(pool.begin(), pool.end(),
              [&](int a, int b) { return bench.seqs[a].id() < bench.seqs[b].id(); });
    Rng rng = rng_stream(seed, {Rng::key("fraction")});
    rng.shuffle(pool);
    pool.resize(std::max<int>(
        1, static_cast<int>(std::llround(fraction * static_cast<double>(pool.size())))));
    std::vector<data::ScanSequence> subset;
    for (int i : pool) subset.push_back(bench.seqs[i]);

    train::FitConfig fit;
    fit.enc = enc;
    fit.epochs = cfg.resolved.at("finetune.epochs").get<int>();
    fit.batch_size = cfg.resolved.at("finetune.batch_size").get<int>();
    fit.lr0 = cfg.resolved.at("finetune.lr0").get<double>();
    fit.seed = seed;
    const auto res =
        train::finetune_center(subset, (ck_path.empty() || from_scratch) ? nullptr : &ck, fit);

    std::vector<data::VortexCenters> preds, labels;
    for (int i : bench.test_idx) {
        preds.push_back(train::predict_centers(res.params, enc, bench.seqs[i]));
        labels.push_back(bench.seqs[i].centers->back());
    }
    const double rmse = eval::rmse_centers(preds, labels);
    data::save_checkpoint(fs::path(out) / "checkpoint.vxck",
                          train::to_checkpoint(res.params, enc, 0, seed));
    json result{{"center_rmse_m", rmse}, {"n_train", subset.size()}};
    data::write_json_file(fs::path(out) / "result.json", result);
    std::cout << "finetune: center RMSE " << data::format_g9(rmse) << " m on test split\n";
    return 0;
}

int cmd_forecast_train(Cfg& cfg, const std::string& data_dir, const std::string& ck_path,
                       const std::string& out) {
    write_preamble(out, cfg);
    const uint64_t seed = cfg.resolved.at("seed").get<uint64_t>();
    const uint64_t split_seed = cfg.resolved.at("split.seed").get<uint64_t>();
    const int n_points = cfg.resolved.at("data.n_points").get<int>();
    const bool center = cfg.resolved.at("data.center").get<bool>();
    const auto ck = data::load_checkpoint(ck_path);
    const auto enc = train::config_from_checkpoint(ck);
    auto bench = eval::make_labeled_bench(data_dir, n_points, center, split_seed);

    train::FitConfig fit;
    fit.enc = enc;
    fit.epochs = cfg.resolved.at("forecast.epochs").get<int>();
    fit.batch_size = cfg.resolved.at("forecast.batch_size").get<int>();
    fit.lr0 = cfg.resolved.at("forecast.lr0").get<double>();
    fit.seed = seed;
    std::vector<data::ScanSequence> train_seqs;
    for (int i : bench.train_idx) train_seqs.push_back(bench.seqs[i]);
    const auto res = train::train_forecast_head(train_seqs, ck, fit);

    std::vector<data::ScanSequence> test_seqs;
    std::vector<std::vector<data::VortexCenters>> test_abs;
    for (int i : bench.test_idx) {
        test_seqs.push_back(bench.seqs[i]);
        test_abs.push_back(bench.abs_centers[i]);
    }
    const auto scores = eval::forecast_eval(
        test_seqs, test_abs,
        [&](const data::ScanSequence& seq, const std::vector<data::VortexCenters>&) {
            return train::predict_forecast(res.params, enc, seq, 3);
        });
    data::save_checkpoint(fs::path(out) / "checkpoint.vxck",
                          train::to_checkpoint(res.params, enc, 0, seed));
    json result{{"forecast_rmse_t1_m", scores.rmse_t1}, {"forecast_rmse_t2_m", scores.rmse_t2}};
    data::write_json_file(fs::path(out) / "result.json", result);
    std::cout << "forecast-train: RMSE t+1 " << data::format_g9(scores.rmse_t1) << " m, t+2 "
              << data::format_g9(scores.rmse_t2) << " m\n";
    return 0;
}

int cmd_eval(Cfg& cfg, const std::string& data_dir, const std::string& method,
             const std::string& ck_path, const std::string& out) {
    write_preamble(out, cfg);
    const uint64_t seed = cfg.resolved.at("seed").get<uint64_t>();
    const uint64_t split_seed = cfg.resolved.at("split.seed").get<uint64_t>();
    const int n_points = cfg.resolved.at("data.n_points").get<int>();
    auto bench = eval::make_labeled_bench(data_dir, n_points, true, split_seed);

    json result;
    result["method"] = method;
    if (method == "dbscan" || method == "intensity") {
        baselines::DbscanConfig dc;
        dc.eps = cfg.get<double>("dbscan.eps", dc.eps);
        dc.min_pts = cfg.get<int>("dbscan.min_pts", dc.min_pts);
        dc.vr_threshold = cfg.get<double>("dbscan.vr_threshold", dc.vr_threshold);
        std::vector<data::VortexCenters> preds, labels;
        for (int i : bench.test_idx) {
            preds.push_back(method == "dbscan"
                                ? baselines::dbscan_centers(bench.seqs[i].frames.back(), dc)
                                : baselines::intensity_centroid(bench.seqs[i].frames.back()));
            labels.push_back(bench.seqs[i].centers->back());
        }
        result["center_rmse_m"] = eval::rmse_centers(preds, labels);
    } else if (method == "cv" || method == "kalman" || method == "traj-lstm") {
        std::vector<data::ScanSequence> test_seqs;
        std::vector<std::vector<data::VortexCenters>> test_abs;
        for (int i : bench.test_idx) {
            test_seqs.push_back(bench.seqs[i]);
            test_abs.push_back(bench.abs_centers[i]);
        }
        eval::ForecastFn fn;
        baselines::KalmanConfig kc;
        kc.q = cfg.get<double>("kalman.q", kc.q);
        kc.r = cfg.get<double>("kalman.r", kc.r);
        baselines::TrajForecaster traj;
        if (method == "cv") {
            fn = [](const data::ScanSequence&, const std::vector<data::VortexCenters>& h) {
                return baselines::constant_velocity_forecast(h);
            };
        } else if (method == "kalman") {
            fn = [kc](const data::ScanSequence&, const std::vector<data::VortexCenters>& h) {
                return baselines::kalman_forecast(h, kc);
            };
        } else {
            std::vector<std::vector<data::VortexCenters>> train_abs;
            for (int i : bench.train_idx) train_abs.push_back(bench.abs_centers[i]);
            traj = baselines::train_trajectory_forecaster(train_abs, 3, seed);
            fn = [&traj](const data::ScanSequence&, const std::vector<data::VortexCenters>& h) {
                return baselines::trajectory_forecast(traj, h);
            };
        }
        const auto scores = eval::forecast_eval(test_seqs, test_abs, fn);
        result["forecast_rmse_t1_m"] = scores.rmse_t1;
        result["forecast_rmse_t2_m"] = scores.rmse_t2;
    } else if (method == "xvortex" || method == "supervised") {
        if (ck_path.empty()) throw config_error("eval: --checkpoint required for " + method);
        const auto ck = data::load_checkpoint(ck_path);
        const auto enc = train::config_from_checkpoint(ck);
        const auto params = train::from_checkpoint(ck, enc);
        std::vector<data::VortexCenters> preds, labels;
        for (int i : bench.test_idx) {
            preds.push_back(train::predict_centers(params, enc, bench.seqs[i]));
            labels.push_back(bench.seqs[i].centers->back());
        }
        result["center_rmse_m"] = eval::rmse_centers(preds, labels);
        std::vector<data::ScanSequence> test_seqs;
        std::vector<std::vector<data::VortexCenters>> test_abs;
        for (int i : bench.test_idx) {
            test_seqs.push_back(bench.seqs[i]);
            test_abs.push_back(bench.abs_centers[i]);
        }
        const auto scores = eval::forecast_eval(
            test_seqs, test_abs,
            [&](const data::ScanSequence& seq, const std::vector<data::VortexCenters>&) {
                return train::predict_forecast(params, enc, seq, 3);
            });
        result["forecast_rmse_t1_m"] = scores.rmse_t1;
        result["forecast_rmse_t2_m"] = scores.rmse_t2;
    } else {
        throw config_error("eval: unknown method " + method);
    }
    data::write_json_file(fs::path(out) / "eval_report.json", result);
    std::cout << "eval " << method << ": " << result.dump() << "\n";
    return 0;
}

int cmd_probe(Cfg& cfg, const std::string& data_dir, const std::string& ck_path,
              const std::string& out) {
    write_preamble(out, cfg);
    const uint64_t split_seed = cfg.resolved.at("split.seed").get<uint64_t>();
    const int n_points = cfg.resolved.at("data.n_points").get<int>();
    const auto ck = data::load_checkpoint(ck_path);
    auto bench = eval::make_labeled_bench(data_dir, n_points, true, split_seed);
    eval::ProbeConfig pc;
    pc.n_classes = cfg.get<int>("probe.n_classes", 4);
    pc.epochs = cfg.get<int>("probe.epochs", 300);
    const auto rep = eval::probe_experiment(bench, ck, pc, out);
    std::cout << "probe: xvortex " << data::format_g9(rep.median_of("xvortex", "sequence"))
              << "% vs random-init " << data::format_g9(rep.median_of("random_init", "sequence"))
              << "%\n";
    return 0;
}

int cmd_table(Cfg& cfg, int which, const std::string& labeled_dir, const std::string& unlabeled_dir,
              const std::string& ck_path, const std::string& out) {
    write_preamble(out, cfg);
    const uint64_t split_seed = cfg.resolved.at("split.seed").get<uint64_t>();
    const int n_points = cfg.resolved.at("data.n_points").get<int>();
    if (which == 1 || which == 2 || which == 3) {
        if (ck_path.empty()) throw config_error("table: --checkpoint required");
        const auto ck = data::load_checkpoint(ck_path);
        auto bench = eval::make_labeled_bench(labeled_dir, n_points, true, split_seed);
        if (which == 1) {
            eval::ProbeConfig pc;
            pc.n_classes = cfg.get<int>("probe.n_classes", 4);
            eval::probe_experiment(bench, ck, pc, out);
        } else if (which == 2) {
            eval::LabelEfficiencyConfig lc;
            lc.epochs = cfg.get<int>("finetune.epochs", lc.epochs);
            lc.batch_size = cfg.get<int>("finetune.batch_size", lc.batch_size);
            eval::label_fraction_experiment(bench, ck, lc, out);
        } else {
            eval::ForecastExpConfig fc;
            fc.epochs = cfg.get<int>("forecast.epochs", fc.epochs);
            eval::forecast_experiment(bench, ck, fc, out);
        }
        return 0;
    }
    if (which == 4) {
        if (unlabeled_dir.empty()) throw config_error("table 4: --data-unlabeled required");
        eval::AblationConfig ac;
        ac.base = pretrain_from_cfg(cfg);
        ac.base.epochs = cfg.get<int>("ablate.pretrain_epochs", 5);
        ac.base.max_sequences = cfg.get<int>("ablate.max_sequences", 320);
        ac.base.n_points = cfg.get<int>("ablate.n_points", 512);
        ac.finetune_epochs = cfg.get<int>("ablate.finetune_epochs", 10);
        ac.forecast_epochs = cfg.get<int>("ablate.forecast_epochs", 10);
        const auto unlabeled = load_sequences(unlabeled_dir);
        eval::ablation_suite(unlabeled, labeled_dir, ac, out);
        return 0;
    }
    throw config_error("table: --which must be 1..4");
}

int cmd_plot(Cfg& cfg, const std::string& metrics_path, const std::string& kind,
             const std::string& out) {
    write_preamble(out, cfg);
    const auto records = data::load_metrics_csv(metrics_path);
    const std::string svg = svg::plot_metrics(records, kind);
    std::ofstream f(fs::path(out) / "plot.svg");
    f << svg;
    std::cout << "plot: wrote " << (fs::path(out) / "plot.svg").string() << "\n";
    return 0;
}

int cmd_render(Cfg& cfg, const std::string& data_dir, const std::string& seq_id, int frame_idx,
               const std::string& method, const std::string& ck_path, const std::string& out) {
    write_preamble(out, cfg);
    const auto labels = data::load_labels(data_dir);
    auto it = labels.find(seq_id);
    if (it == labels.end()) throw config_error("render: unknown sequence " + seq_id);
    auto seq = data::load_sequence_dir(fs::path(data_dir) / seq_id);
    if (frame_idx < 0 || frame_idx >= static_cast<int>(seq.frames.size()))
        throw config_error("render: frame index out of range");
    const data::VortexCenters truth = it->second.centers.at(frame_idx);

    data::VortexCenters pred;
    if (method == "dbscan") {
        baselines::DbscanConfig dc;
        pred = baselines::dbscan_centers(seq.frames[frame_idx], dc);
    } else if (method == "intensity") {
        pred = baselines::intensity_centroid(seq.frames[frame_idx]);
    } else if (method == "xvortex") {
        if (ck_path.empty()) throw config_error("render: --checkpoint required for xvortex");
        const auto ck = data::load_checkpoint(ck_path);
        const auto enc = train::config_from_checkpoint(ck);
        const auto params = train::from_checkpoint(ck, enc);
        const int n_points = cfg.resolved.at("data.n_points").get<int>();
        seq.class_id = it->second.class_id;
        seq.centers = it->second.centers;
        auto prepared = train::prepare_sequences({seq}, 5, n_points, true,
                                                 cfg.resolved.at("split.seed").get<uint64_t>());
        if (prepared.empty()) throw runtime_error_("render: sequence too short");
        pred = train::predict_centers(params, enc, prepared[0]);
        pred.port.y += prepared[0].centroid_removed.y;
        pred.port.z += prepared[0].centroid_removed.z;
        pred.star.y += prepared[0].centroid_removed.y;
        pred.star.z += prepared[0].centroid_removed.z;
    } else {
        throw config_error("render: unknown method " + method);
    }
    const std::string svg_text = svg::render_frame(seq.frames[frame_idx], truth, pred);
    std::ofstream f(fs::path(out) / "render.svg");
    f << svg_text;
    std::cout << "render: wrote " << (fs::path(out) / "render.svg").string() << "\n";
    return 0;
}

} // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"X-VORTEX wake-vortex contrastive pipeline"};
    app.require_subcommand(1);

    std::string config_path, out_dir, data_dir, labeled_dir, unlabeled_dir, ck_path;
    std::string method = "dbscan", kind = "align-uniform", seq_id, metrics_path;
    uint64_t seed = 1;
    int threads = 0, n_sequences = 100, n_frames = 5, epochs = 0, batch_size = 0;
    int which = 1, frame_idx = 4, n_points = 0;
    double temperature = 0.07, lr0 = 1e-3, fraction = 1.0;
    double jitter_sigma = 0.05, dropout_p = 0.3, rotation_deg = 30.0;
    int min_frames_kept = 3;
    bool labeled = true, from_scratch = false;

    auto add_common = [&](CLI::App* c) {
        c->add_option("--config", config_path, "JSON config file with flat dotted keys");
        c->add_option("--out", out_dir, "output directory")->required();
        c->add_option("--seed", seed, "master seed");
        c->add_option("--threads", threads, "BLAS threads (1 = fully deterministic)");
    };

    auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic scan dataset");
    add_common(sim_cmd);
    auto* o_nseq = sim_cmd->add_option("--n-sequences", n_sequences);
    auto* o_nfr = sim_cmd->add_option("--n-frames", n_frames);
    auto* o_lab = sim_cmd->add_flag("--labeled,!--unlabeled", labeled);

    auto* pre_cmd = app.add_subcommand("pretrain", "self-supervised contrastive pre-training");
    add_common(pre_cmd);
    pre_cmd->add_option("--data", data_dir)->required();
    auto* o_ep = pre_cmd->add_option("--epochs", epochs);
    auto* o_bs = pre_cmd->add_option("--batch-size", batch_size);
    auto* o_temp = pre_cmd->add_option("--temperature", temperature);
    auto* o_np = pre_cmd->add_option("--n-points", n_points);
    auto* o_js = pre_cmd->add_option("--jitter-sigma", jitter_sigma);
    auto* o_dp = pre_cmd->add_option("--dropout-p", dropout_p);
    auto* o_rot = pre_cmd->add_option("--rotation-range-deg", rotation_deg);
    auto* o_mfk = pre_cmd->add_option("--min-frames-kept", min_frames_kept);

    auto* ft_cmd = app.add_subcommand("finetune", "center-localization fine-tuning");
    add_common(ft_cmd);
    ft_cmd->add_option("--data", data_dir)->required();
    ft_cmd->add_option("--checkpoint", ck_path);
    auto* o_ftep = ft_cmd->add_option("--epochs", epochs);
    auto* o_ftbs = ft_cmd->add_option("--batch-size", batch_size);
    auto* o_frac = ft_cmd->add_option("--fraction", fraction);
    ft_cmd->add_flag("--from-scratch", from_scratch);
    auto* o_ftnp = ft_cmd->add_option("--n-points", n_points);

    auto* fc_cmd = app.add_subcommand("forecast-train", "train the trajectory forecast head");
    add_common(fc_cmd);
    fc_cmd->add_option("--data", data_dir)->required();
    fc_cmd->add_option("--checkpoint", ck_path)->required();
    auto* o_fcep = fc_cmd->add_option("--epochs", epochs);
    auto* o_fcbs = fc_cmd->add_option("--batch-size", batch_size);
    auto* o_fcnp = fc_cmd->add_option("--n-points", n_points);

    auto* ev_cmd = app.add_subcommand("eval", "evaluate one method on the test split");
    add_common(ev_cmd);
    ev_cmd->add_option("--data", data_dir)->required();
    ev_cmd->add_option("--method", method)
        ->check(CLI::IsMember({"dbscan", "intensity", "cv", "kalman", "traj-lstm", "supervised",
                               "xvortex"}))
        ->required();
    ev_cmd->add_option("--checkpoint", ck_path);
    auto* o_evnp = ev_cmd->add_option("--n-points", n_points);

    auto* pr_cmd = app.add_subcommand("probe", "linear probing of frozen representations");
    add_common(pr_cmd);
    pr_cmd->add_option("--data", data_dir)->required();
    pr_cmd->add_option("--checkpoint", ck_path)->required();
    auto* o_prnp = pr_cmd->add_option("--n-points", n_points);

    auto* ab_cmd = app.add_subcommand("ablate", "run the ablation suite (table 4)");
    add_common(ab_cmd);
    ab_cmd->add_option("--data-labeled", labeled_dir)->required();
    ab_cmd->add_option("--data-unlabeled", unlabeled_dir)->required();

    auto* tb_cmd = app.add_subcommand("table", "assemble one experiment table");
    add_common(tb_cmd);
    tb_cmd->add_option("--which", which)->required();
    tb_cmd->add_option("--data-labeled", labeled_dir)->required();
    tb_cmd->add_option("--data-unlabeled", unlabeled_dir);
    tb_cmd->add_option("--checkpoint", ck_path);

    auto* pl_cmd = app.add_subcommand("plot", "emit a metric plot as SVG");
    add_common(pl_cmd);
    pl_cmd->add_option("--metrics", metrics_path)->required();
    pl_cmd->add_option("--kind", kind)->check(CLI::IsMember({"align-uniform", "loss"}));

    auto* rd_cmd = app.add_subcommand("render", "render one scan with centers as SVG");
    add_common(rd_cmd);
    rd_cmd->add_option("--data", data_dir)->required();
    rd_cmd->add_option("--sequence", seq_id)->required();
    rd_cmd->add_option("--frame", frame_idx);
    rd_cmd->add_option("--method", method)->check(CLI::IsMember({"dbscan", "intensity", "xvortex"}));
    rd_cmd->add_option("--checkpoint", ck_path);

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: {\"code\":2,\"message\":\"" << e.what() << "\"}\n";
        return 2;
    }

    try {
        Cfg cfg;
        cfg.load(config_path);
        cfg.get<uint64_t>("seed", 1, app.get_subcommands()[0]->get_option_no_throw("--seed"),
                          &seed);
        resolve_threads(cfg, app.get_subcommands()[0]->get_option_no_throw("--threads"), threads);

        if (sim_cmd->parsed()) {
            cfg.get<int>("sim.n_sequences", 100, o_nseq, &n_sequences);
            cfg.get<int>("sim.n_frames", 5, o_nfr, &n_frames);
            cfg.get<bool>("sim.labeled", true, o_lab, &labeled);
            return cmd_simulate(cfg, out_dir);
        }
        if (pre_cmd->parsed()) {
            cfg.get<int>("pretrain.epochs", 20, o_ep, &epochs);
            cfg.get<int>("pretrain.batch_size", 16, o_bs, &batch_size);
            cfg.get<double>("pretrain.temperature", 0.07, o_temp, &temperature);
            cfg.get<int>("data.n_points", 1024, o_np, &n_points);
            cfg.get<double>("aug.jitter_sigma", 0.05, o_js, &jitter_sigma);
            cfg.get<double>("aug.dropout_p", 0.3, o_dp, &dropout_p);
            cfg.get<double>("aug.rotation_range_deg", 30.0, o_rot, &rotation_deg);
            cfg.get<int>("aug.min_frames_kept", 3, o_mfk, &min_frames_kept);
            return cmd_pretrain(cfg, data_dir, out_dir);
        }
        if (ft_cmd->parsed()) {
            cfg.get<int>("finetune.epochs", 40, o_ftep, &epochs);
            cfg.get<int>("finetune.batch_size", 16, o_ftbs, &batch_size);
            cfg.get<double>("finetune.lr0", 1e-3);
            cfg.get<double>("finetune.fraction", 1.0, o_frac, &fraction);
            cfg.get<int>("data.n_points", 1024, o_ftnp, &n_points);
            cfg.get<bool>("data.center", true);
            cfg.get<uint64_t>("split.seed", 9601);
            return cmd_finetune(cfg, data_dir, ck_path, out_dir, from_scratch);
        }
        if (fc_cmd->parsed()) {
            cfg.get<int>("forecast.epochs", 12, o_fcep, &epochs);
            cfg.get<int>("forecast.batch_size", 16, o_fcbs, &batch_size);
            cfg.get<double>("forecast.lr0", 1e-3);
            cfg.get<int>("data.n_points", 1024, o_fcnp, &n_points);
            cfg.get<bool>("data.center", true);
            cfg.get<uint64_t>("split.seed", 9601);
            return cmd_forecast_train(cfg, data_dir, ck_path, out_dir);
        }
        if (ev_cmd->parsed()) {
            cfg.get<int>("data.n_points", 1024, o_evnp, &n_points);
            cfg.get<uint64_t>("split.seed", 9601);
            return cmd_eval(cfg, data_dir, method, ck_path, out_dir);
        }
        if (pr_cmd->parsed()) {
            cfg.get<int>("data.n_points", 1024, o_prnp, &n_points);
            cfg.get<uint64_t>("split.seed", 9601);
            return cmd_probe(cfg, data_dir, ck_path, out_dir);
        }
        if (ab_cmd->parsed()) {
            cfg.get<int>("pretrain.epochs", 5);
            cfg.get<int>("pretrain.batch_size", 16);
            cfg.get<double>("pretrain.temperature", 0.07);
            cfg.get<int>("data.n_points", 512);
            cfg.get<double>("aug.jitter_sigma", 0.05);
            cfg.get<double>("aug.dropout_p", 0.3);
            cfg.get<double>("aug.rotation_range_deg", 30.0);
            cfg.get<int>("aug.min_frames_kept", 3);
            cfg.get<uint64_t>("split.seed", 9601);
            return cmd_table(cfg, 4, labeled_dir, unlabeled_dir, "", out_dir);
        }
        if (tb_cmd->parsed()) {
            cfg.get<int>("data.n_points", 1024);
            cfg.get<uint64_t>("split.seed", 9601);
            if (which == 4) {
                cfg.get<int>("pretrain.epochs", 5);
                cfg.get<int>("pretrain.batch_size", 16);
                cfg.get<double>("pretrain.temperature", 0.07);
                cfg.get<double>("aug.jitter_sigma", 0.05);
                cfg.get<double>("aug.dropout_p", 0.3);
                cfg.get<double>("aug.rotation_range_deg", 30.0);
                cfg.get<int>("aug.min_frames_kept", 3);
            }
            return cmd_table(cfg, which, labeled_dir, unlabeled_dir, ck_path, out_dir);
        }
        if (pl_cmd->parsed()) return cmd_plot(cfg, metrics_path, kind, out_dir);
        if (rd_cmd->parsed()) {
            cfg.get<int>("data.n_points", 1024);
            cfg.get<uint64_t>("split.seed", 9601);
            return cmd_render(cfg, data_dir, seq_id, frame_idx, method, ck_path, out_dir);
        }
        std::cerr << "error: {\"code\":2,\"message\":\"unknown command\"}\n";
        return 2;
    } catch (const VortexError& e) {
        std::cerr << "error: {\"code\":" << e.exit_code() << ",\"message\":\"" << e.what()
                  << "\"}\n";
        return e.exit_code();
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: {\"code\":3,\"message\":\"" << e.what() << "\"}\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: {\"code\":1,\"message\":\"" << e.what() << "\"}\n";
        return 1;
    }
}

} // namespace vortexlab::cli

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "vortexlab/cli.hpp"
#include "vortexlab/dataio.hpp"

using namespace vortexlab;
namespace fs = std::filesystem;

namespace {

fs::path work_root() {
    const fs::path p = fs::temp_directory_path() / "vxtest_cli";
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_cli(std::vector<std::string> args) { return cli::run(args); }

// small-model config shared by the CLI tests
fs::path write_small_config() {
    const fs::path p = work_root() / "small.json";
    nlohmann::json cfg{
        {"model.mlp_widths", {8, 16}},   {"model.hidden_dim", 12},
        {"model.proj_dims", {10, 6}},    {"model.center_hidden", 8},
        {"model.forecast_hidden", 8},    {"data.n_points", 96},
        {"pretrain.batch_size", 4},      {"sim.geometry",
                                          {{"y_origin", 0.0},
                                           {"z_origin", 2.0},
                                           {"elevations", {0.05, 0.15, 0.25, 0.35, 0.45, 0.55,
                                                           0.65, 0.75}},
                                           {"ranges", {60, 90, 120, 150, 180, 210, 240, 270, 300,
                                                       330, 360, 390, 410, 420}}}},
    };
    fs::create_directories(p.parent_path());
    data::write_json_file(p, cfg);
    return p;
}

} // namespace

TEST_CASE("simulate writes the requested number of sequence directories") {
    const fs::path out = work_root() / "ds";
    fs::remove_all(out);
    const auto cfgp = write_small_config();
    CHECK(run_cli({"simulate", "--n-sequences", "10", "--seed", "7", "--out", out.string(),
                   "--config", cfgp.string()}) == 0);
    int dirs = 0;
    for (const auto& e : fs::directory_iterator(out))
        if (e.is_directory() && e.path().filename() != "_oracle") ++dirs;
    CHECK(dirs == 10);
    CHECK(fs::exists(out / "resolved_config.json"));
    CHECK(fs::exists(out / "versions.txt"));
    CHECK(fs::exists(out / "dataset.json"));
}

TEST_CASE("pretrain twice produces byte-identical metrics and checkpoints") {
    const fs::path ds = work_root() / "ds_unlab";
    const auto cfgp = write_small_config();
    if (!fs::exists(ds / "dataset.json")) {
        REQUIRE(run_cli({"simulate", "--n-sequences", "16", "--seed", "11", "--unlabeled",
                         "--out", ds.string(), "--config", cfgp.string()}) == 0);
    }
    const fs::path o1 = work_root() / "pre1";
    const fs::path o2 = work_root() / "pre2";
    fs::remove_all(o1);
    fs::remove_all(o2);
    for (const auto& out : {o1, o2}) {
        REQUIRE(run_cli({"pretrain", "--data", ds.string(), "--epochs", "1", "--seed", "7",
                         "--threads", "1", "--out", out.string(), "--config",
                         cfgp.string()}) == 0);
    }
    CHECK(slurp(o1 / "metrics.csv") == slurp(o2 / "metrics.csv"));
    CHECK(slurp(o1 / "checkpoint.vxck") == slurp(o2 / "checkpoint.vxck"));
    CHECK(slurp(o1 / "resolved_config.json") == slurp(o2 / "resolved_config.json"));
}

TEST_CASE("plot emits a deterministic SVG with two curves") {
    const fs::path mdir = work_root() / "mplot";
    fs::remove_all(mdir);
    fs::create_directories(mdir);
    std::vector<data::MetricRecord> recs;
    for (int e = 1; e <= 5; ++e) {
        recs.push_back({e, "train", 3.0 / e, 0.1 * e, -0.2 * e, 1e-3});
        recs.push_back({e, "val", 3.2 / e, 0.12 * e, -0.18 * e, 1e-3});
    }
    data::write_metrics_csv(mdir / "metrics.csv", recs);
    const fs::path o1 = work_root() / "plot1";
    const fs::path o2 = work_root() / "plot2";
    fs::remove_all(o1);
    fs::remove_all(o2);
    REQUIRE(run_cli({"plot", "--metrics", (mdir / "metrics.csv").string(), "--kind",
                     "align-uniform", "--out", o1.string()}) == 0);
    REQUIRE(run_cli({"plot", "--metrics", (mdir / "metrics.csv").string(), "--kind",
                     "align-uniform", "--out", o2.string()}) == 0);
    const std::string svg = slurp(o1 / "plot.svg");
    CHECK(svg == slurp(o2 / "plot.svg"));
    size_t polylines = 0, pos = 0;
    while ((pos = svg.find("<polyline", pos)) != std::string::npos) {
        ++polylines;
        pos += 9;
    }
    CHECK(polylines == 2);

    // empty metric rows: error, no file written
    data::write_metrics_csv(mdir / "empty.csv", {});
    const fs::path o3 = work_root() / "plot3";
    fs::remove_all(o3);
    CHECK(run_cli({"plot", "--metrics", (mdir / "empty.csv").string(), "--kind", "align-uniform",
                   "--out", o3.string()}) == 1);
    CHECK(!fs::exists(o3 / "plot.svg"));
}

TEST_CASE("render marks two ground-truth circles and two predicted crosses") {
    const fs::path ds = work_root() / "ds_render";
    const auto cfgp = write_small_config();
    if (!fs::exists(ds / "dataset.json")) {
        REQUIRE(run_cli({"simulate", "--n-sequences", "3", "--seed", "13", "--labeled", "--out",
                         ds.string(), "--config", cfgp.string()}) == 0);
    }
    const fs::path out = work_root() / "render";
    fs::remove_all(out);
    REQUIRE(run_cli({"render", "--data", ds.string(), "--sequence", "seq_00001", "--frame", "2",
                     "--method", "dbscan", "--out", out.string()}) == 0);
    const std::string svg = slurp(out / "render.svg");
    size_t gt = 0, pred = 0, pos = 0;
    while ((pos = svg.find("class=\"gt\"", pos)) != std::string::npos) {
        ++gt;
        pos += 8;
    }
    pos = 0;
    while ((pos = svg.find("class=\"pred\"", pos)) != std::string::npos) {
        ++pred;
        pos += 8;
    }
    CHECK(gt == 2);
    CHECK(pred == 2);
}

TEST_CASE("eval runs a heuristic method end to end") {
    const fs::path ds = work_root() / "ds_eval";
    const auto cfgp = write_small_config();
    if (!fs::exists(ds / "dataset.json")) {
        REQUIRE(run_cli({"simulate", "--n-sequences", "12", "--seed", "17", "--labeled", "--out",
                         ds.string(), "--config", cfgp.string()}) == 0);
    }
    const fs::path out = work_root() / "evalout";
    fs::remove_all(out);
    REQUIRE(run_cli({"eval", "--data", ds.string(), "--method", "dbscan", "--out", out.string(),
                     "--config", cfgp.string()}) == 0);
    const auto rep = data::load_json_file(out / "eval_report.json");
    CHECK(rep.at("center_rmse_m").get<double>() > 0.0);
}

TEST_CASE("exit codes: unknown command 2, config error 3") {
    CHECK(run_cli({"no-such-command", "--out", "x"}) == 2);
    const fs::path bad = work_root() / "bad.json";
    fs::create_directories(bad.parent_path());
    {
        std::ofstream f(bad);
        f << "[1,2,3]\n"; // valid json, not an object
    }
    const fs::path out = work_root() / "badout";
    CHECK(run_cli({"simulate", "--n-sequences", "1", "--out", out.string(), "--config",
                   bad.string()}) == 3);
    // missing required --out is a usage error
    CHECK(run_cli({"simulate", "--n-sequences", "1"}) == 2);
}

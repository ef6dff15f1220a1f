#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vortexlab/baselines.hpp"
#include "vortexlab/contrastive.hpp"
#include "vortexlab/dataio.hpp"
#include "vortexlab/downstream.hpp"

namespace vortexlab::eval {

/// Euclidean RMSE over best-of-two assigned center pairs.
double rmse_centers(const std::vector<data::VortexCenters>& preds,
                    const std::vector<data::VortexCenters>& labels);

/// Per-horizon forecast RMSE; the method maps (prepared sequence, ground
/// truth history centers in absolute coordinates) to absolute predictions
/// for t+1 and t+2.
using ForecastFn = std::function<std::array<data::VortexCenters, 2>(
    const data::ScanSequence& seq, const std::vector<data::VortexCenters>& history_centers)>;

struct ForecastScores {
    double rmse_t1 = 0.0;
    double rmse_t2 = 0.0;
};

ForecastScores forecast_eval(const std::vector<data::ScanSequence>& test_seqs,
                             const std::vector<std::vector<data::VortexCenters>>& abs_centers,
                             const ForecastFn& method, int history = 3);

/// Multinomial logistic regression on frozen features; top-1 accuracy on the
/// held-out split (percent).
double linear_probe(const std::vector<std::vector<double>>& train_x,
                    const std::vector<int>& train_y,
                    const std::vector<std::vector<double>>& test_x,
                    const std::vector<int>& test_y, int n_classes, uint64_t seed,
                    int epochs = 300, double lr = 1e-2);

struct ExperimentRow {
    std::string method;
    std::string variant;   // e.g. fraction or input view or horizon
    uint64_t seed = 0;
    double value = 0.0;
};

struct ExperimentReport {
    std::string experiment_id;
    nlohmann::json config_snapshot;
    std::string config_hash;
    std::vector<ExperimentRow> rows;
    std::filesystem::path csv_path;

    double median_of(const std::string& method, const std::string& variant) const;
};

void write_report_csv(const ExperimentReport& report, const std::filesystem::path& path,
                      const std::vector<std::string>& header);

/// Shared experiment inputs: prepared (chunked/normalized/centered) labeled
/// sequences, their absolute-coordinate labels, and split membership.
struct LabeledBench {
    std::vector<data::ScanSequence> seqs;                  // prepared, centered
    std::vector<std::vector<data::VortexCenters>> abs_centers; // per seq, per frame
    std::vector<int> class_ids;
    std::vector<int> train_idx, val_idx, test_idx;
};

LabeledBench make_labeled_bench(const std::filesystem::path& labeled_dir, int n_points,
                                bool center, uint64_t split_seed,
                                std::array<double, 3> ratios = {0.7, 0.2, 0.1});
LabeledBench make_labeled_bench(const data::Dataset& ds, int n_points, bool center,
                                uint64_t split_seed,
                                std::array<double, 3> ratios = {0.7, 0.2, 0.1});

struct ProbeConfig {
    int n_classes = 4;
    std::vector<uint64_t> seeds{11, 12, 13};
    int epochs = 300;
    double lr = 1e-2;
};

/// Table 1 analog: probe accuracy for random-init vs pretrained encoders
/// (sequence-level h_T) plus the frame-level spatial row.
ExperimentReport probe_experiment(const LabeledBench& bench, const data::Checkpoint& pretrained,
                                  const ProbeConfig& cfg, const std::filesystem::path& out_dir);

struct LabelEfficiencyConfig {
    std::vector<double> fractions{0.01, 0.10, 1.0};
    std::vector<uint64_t> seeds{21, 22, 23};
    int epochs = 60;
    int batch_size = 8;
    double lr0 = 1e-3;
    baselines::DbscanConfig dbscan;
    uint64_t subset_seed = 777; // fraction subsets fixed across methods
    bool learned_at_all_fractions = true; // acceptance only needs the 1% cells
};

/// Table 2 analog: center RMSE by method and label fraction.
ExperimentReport label_fraction_experiment(const LabeledBench& bench,
                                           const data::Checkpoint& pretrained,
                                           const LabelEfficiencyConfig& cfg,
                                           const std::filesystem::path& out_dir);

struct ForecastExpConfig {
    std::vector<uint64_t> seeds{31, 32, 33};
    int epochs = 12;
    int batch_size = 16;
    double lr0 = 1e-3;
    int traj_epochs = 200;
    baselines::KalmanConfig kalman;
};

/// Table 3 analog: forecast RMSE at t+1 and t+2 per method.
ExperimentReport forecast_experiment(const LabeledBench& bench, const data::Checkpoint& pretrained,
                                     const ForecastExpConfig& cfg,
                                     const std::filesystem::path& out_dir);

struct AblationConfig {
    ssl::PretrainConfig base;       // reduced-scale pretraining shared by all rows
    std::vector<uint64_t> seeds{41, 42, 43};
    int finetune_epochs = 10;
    int forecast_epochs = 10;
    int batch_size = 16;
    double lr0 = 1e-3;
    int max_label_sequences = 0;    // 0 = full labeled train split
};

/// Table 4 analog: full model vs the four ablations (no temporal
/// subsampling, no spatial masking, no centering, mean pooling), each with
/// its own pretraining; reports center RMSE and t+1 forecast RMSE.
ExperimentReport ablation_suite(const std::vector<data::ScanSequence>& unlabeled_raw,
                                const std::filesystem::path& labeled_dir,
                                const AblationConfig& cfg,
                                const std::filesystem::path& out_dir);

/// FNV-1a hash of the canonical config JSON dump.
std::string config_hash(const nlohmann::json& j);

double median(std::vector<double> v);

} // namespace vortexlab::eval

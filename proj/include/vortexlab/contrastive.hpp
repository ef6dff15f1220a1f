#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "vortexlab/augment.hpp"
#include "vortexlab/dataio.hpp"
#include "vortexlab/model.hpp"
#include "vortexlab/tape.hpp"

namespace vortexlab::ssl {

/// Symmetrized InfoNCE over a [2B, d] block of unit embeddings with pairing
/// i <-> i+B. Denominator spans all non-self rows; cosine similarity.
template <typename T>
int info_nce(Tape<T>& tape, int z_node, double temperature) {
    const auto& Z = tape.val(z_node);
    const int n = Z.rows();
    if (n < 2 || n % 2 != 0)
        throw std::invalid_argument("info_nce: need an even number (2B) of embeddings");
    if (temperature <= 0) throw std::invalid_argument("info_nce: temperature must be > 0");
    for (int r = 0; r < n; ++r) {
        double s2 = 0;
        for (int c = 0; c < Z.cols(); ++c) s2 += static_cast<double>(Z.at(r, c)) * Z.at(r, c);
        if (std::abs(std::sqrt(s2) - 1.0) > 1e-4)
            throw std::invalid_argument("info_nce: embeddings must be unit-norm");
    }
    const int B = n / 2;
    const int sim = tape.scale(tape.matmul_nt(z_node, z_node), T(1.0 / temperature));
    Tensor<T> mask = Tensor<T>::zeros({n, n});
    for (int i = 0; i < n; ++i) mask.at(i, i) = T(-1e9); // self excluded
    const int masked = tape.add(sim, tape.leaf(std::move(mask), false));
    const int lse = tape.row_logsumexp(masked);
    std::vector<int> pos_idx(n);
    for (int i = 0; i < n; ++i) pos_idx[i] = i * n + (i + B) % n;
    const int pos = tape.gather(masked, pos_idx);
    return tape.mean_all(tape.sub(lse, pos));
}

/// Mean over positive pairs of ||z_i - z_j||^alpha.
double alignment(const std::vector<std::vector<double>>& a,
                 const std::vector<std::vector<double>>& b, double alpha = 2.0);

/// log mean over distinct unordered pairs of exp(-t ||z_i - z_j||^2).
double uniformity(const std::vector<std::vector<double>>& z, double t = 2.0);

struct PretrainConfig {
    model::EncoderConfig enc;
    aug::AugmentConfig augment;
    int epochs = 20;
    int batch_size = 16;
    double temperature = 0.07;
    double lr0 = 1e-3;
    int patience = 10;
    uint64_t seed = 1;
    uint64_t split_seed = 9601; // dataset-level; shared across commands
    std::array<double, 3> split_ratios{0.7, 0.2, 0.1};
    int n_points = 1024;
    bool center = true;       // sequence-level centering (ablation switch)
    int max_sequences = 0;    // 0 = use all; otherwise truncate the train split
};

struct PretrainResult {
    data::Checkpoint checkpoint;
    std::vector<data::MetricRecord> metrics;
    int epochs_run = 0;
};

/// Full self-supervised loop: shuffle, two views per sequence, InfoNCE,
/// Adam with cosine decay, per-epoch train/val metrics, early stop on the
/// validation loss plateau.
PretrainResult pretrain(const std::vector<data::ScanSequence>& raw_sequences,
                        const PretrainConfig& cfg);

} // namespace vortexlab::ssl

#pragma once

#include <array>
#include <optional>
#include <vector>

#include "vortexlab/contrastive.hpp"
#include "vortexlab/dataio.hpp"
#include "vortexlab/model.hpp"

namespace vortexlab::train {

/// Chunk to T frames, normalize every frame to n_points, center when asked.
/// The normalization stream is keyed by (seed, sequence id, frame) so it is
/// identical no matter which subset or order is processed.
std::vector<data::ScanSequence> prepare_sequences(const std::vector<data::ScanSequence>& raw,
                                                  int T, int n_points, bool center,
                                                  uint64_t seed);

struct FitConfig {
    model::EncoderConfig enc;
    int epochs = 40;
    int batch_size = 16;
    double lr0 = 1e-3;
    uint64_t seed = 1;
};

struct FitResult {
    ParameterStore<float> params;
    std::vector<double> epoch_loss;
};

/// Center-localization training: soft-center head MSE against per-sequence
/// final-frame labels. With a pretrained checkpoint the spatial encoder is
/// frozen and the temporal module + head are tuned; without one the whole
/// architecture trains from random init (the supervised-from-scratch
/// comparator).
FitResult finetune_center(const std::vector<data::ScanSequence>& train_seqs,
                          const data::Checkpoint* pretrained, const FitConfig& cfg);

/// Forecast-head training on 3-frame histories; encoder and aggregator stay
/// frozen at the checkpoint weights.
FitResult train_forecast_head(const std::vector<data::ScanSequence>& train_seqs,
                              const data::Checkpoint& pretrained, const FitConfig& cfg);

/// h_T per sequence under frozen params (no augmentation).
std::vector<std::vector<double>> embed_sequences(const ParameterStore<float>& params,
                                                 const model::EncoderConfig& cfg,
                                                 const std::vector<data::ScanSequence>& seqs);

/// v_t of every frame (frame-level features; one row per frame).
std::vector<std::vector<double>> embed_frames(const ParameterStore<float>& params,
                                              const model::EncoderConfig& cfg,
                                              const std::vector<data::ScanSequence>& seqs);

/// Projected unit embeddings z per sequence.
std::vector<std::vector<double>> embed_projected(const ParameterStore<float>& params,
                                                 const model::EncoderConfig& cfg,
                                                 const std::vector<data::ScanSequence>& seqs);

/// Soft-center prediction on the final frame, in the sequence's coordinate
/// frame (add centroid_removed back for absolute positions).
data::VortexCenters predict_centers(const ParameterStore<float>& params,
                                    const model::EncoderConfig& cfg,
                                    const data::ScanSequence& seq);

/// Forecast from the first `history` frames of a prepared sequence; returns
/// absolute-coordinate centers at t+1 and t+2. The history is re-centered by
/// its own centroid before encoding.
std::array<data::VortexCenters, 2> predict_forecast(const ParameterStore<float>& params,
                                                    const model::EncoderConfig& cfg,
                                                    const data::ScanSequence& seq,
                                                    int history = 3);

/// Checkpoint round-trip helpers for a parameter store.
data::Checkpoint to_checkpoint(const ParameterStore<float>& params,
                               const model::EncoderConfig& cfg, long step,
                               uint64_t master_seed);
ParameterStore<float> from_checkpoint(const data::Checkpoint& ck,
                                      const model::EncoderConfig& expect);
model::EncoderConfig config_from_checkpoint(const data::Checkpoint& ck);

} // namespace vortexlab::train

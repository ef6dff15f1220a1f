#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vortexlab/dataio.hpp"
#include "vortexlab/error.hpp"
#include "vortexlab/nn.hpp"
#include "vortexlab/tape.hpp"

namespace vortexlab::model {

struct EncoderConfig {
    std::vector<int> mlp_widths{64, 128, 256}; // shared per-point MLP, input 3 channels
    int hidden_dim = 256;                      // LSTM hidden size D_t
    std::vector<int> proj_dims{128, 64};       // two-layer projection; last = embedding d
    std::string aggregator = "lstm";           // "lstm" | "mean"
    int center_hidden = 128;
    int forecast_hidden = 128;

    int spatial_dim() const { return mlp_widths.back(); }
    int penult_dim() const { return mlp_widths[mlp_widths.size() - 2]; }
    int agg_dim() const { return aggregator == "mean" ? spatial_dim() : hidden_dim; }
    int embed_dim() const { return proj_dims.back(); }

    void validate() const;
    nlohmann::json to_json() const;
    static EncoderConfig from_json(const nlohmann::json& j);
};

/// All trainable tensors for one model, fresh Glorot-uniform init; LSTM
/// forget-gate bias starts at 1.
template <typename T>
ParameterStore<T> init_params(const EncoderConfig& cfg, uint64_t seed);

/// Parameter names belonging to one component: encoder | aggregator |
/// projection | center | forecast.
std::vector<std::string> component_names(const EncoderConfig& cfg, const std::string& comp);

/// Node ids of registered parameter leaves, keyed by name.
struct ParamNodes {
    std::map<std::string, int> ids;
    int at(const std::string& name) const {
        auto it = ids.find(name);
        if (it == ids.end()) throw std::out_of_range("param node not found: " + name);
        return it->second;
    }
};

template <typename T>
ParamNodes register_params(Tape<T>& tape, const ParameterStore<T>& store,
                           const std::set<std::string>& trainable);

// Fixed input normalization: meters and m/s are brought to O(1) before the
// per-point MLP so activations stay in the well-conditioned range.
inline constexpr double kInputScaleYZ = 0.01;
inline constexpr double kInputScaleVR = 0.1;
// The forecast head regresses centered coordinates in units of 100 m.
inline constexpr double kForecastScale = 0.01;

/// All frames of a batch packed into one [total_points, 3] block,
/// frame-contiguous; sequences own contiguous frame ranges.
template <typename T>
struct PackedBatch {
    Tensor<T> points;                  // [total_points, 3]
    std::vector<int> frame_starts;     // row offset of each frame
    std::vector<int> seq_frame_begin;  // first frame index of each sequence
    std::vector<int> seq_frame_count;
    int n_points = 0;                  // points per frame (uniform)
};

template <typename T>
PackedBatch<T> pack_sequences(const std::vector<const data::ScanSequence*>& seqs);

template <typename T>
struct EncodeResult {
    int pooled = -1;   // [n_frames_total, D_s] node
    int perpoint = -1; // [total_points, penult_dim] node (pre-pool activations)
};

/// Shared per-point MLP + per-frame max-pool; exactly permutation invariant.
template <typename T>
EncodeResult<T> encode_frames(Tape<T>& tape, const ParamNodes& pn, const EncoderConfig& cfg,
                              int points_leaf, const std::vector<int>& frame_starts);

/// Final hidden state of the aggregator over one sequence's contiguous frame
/// rows of `pooled` ([1, agg_dim] node). Supports 1..T frames.
template <typename T>
int aggregate_sequence(Tape<T>& tape, const ParamNodes& pn, const EncoderConfig& cfg,
                       int pooled, int frame_begin, int frame_count);

/// L2-normalized projection of h_T ([1, d] node).
template <typename T>
int project(Tape<T>& tape, const ParamNodes& pn, const EncoderConfig& cfg, int h);

template <typename T>
struct SoftCenterOut {
    int mask = -1;   // [N, 2] scores in [0,1]; column 0 port, column 1 starboard
    int c_port = -1; // [1, 2] weighted center of mass
    int c_star = -1;
};

/// Per-point vortexness scores conditioned on h_T; centers are the
/// score-weighted means of the frame's (y,z).
template <typename T>
SoftCenterOut<T> soft_center_head(Tape<T>& tape, const ParamNodes& pn, const EncoderConfig& cfg,
                                  int perpoint_rows, int h, int points_yz_leaf);

/// [1, 8] node: [(y,z) port, (y,z) star] at t+1 then t+2, centered coords.
template <typename T>
int forecast_head(Tape<T>& tape, const ParamNodes& pn, const EncoderConfig& cfg, int h);

// ---------------------------------------------------------------------------
// template definitions
// ---------------------------------------------------------------------------

template <typename T>
ParameterStore<T> init_params(const EncoderConfig& cfg, uint64_t seed) {
    cfg.validate();
    ParameterStore<T> st;
    Rng rng = rng_stream(seed, {Rng::key("init")});
    int in = 3;
    for (size_t i = 0; i < cfg.mlp_widths.size(); ++i) {
        const int out = cfg.mlp_widths[i];
        const std::string base = "enc.l" + std::to_string(i + 1);
        st.params[base + ".w"] = glorot_uniform<T>(out, in, rng);
        st.params[base + ".b"] = Tensor<T>::zeros({1, out});
        in = out;
    }
    if (cfg.aggregator == "lstm") {
        const int H = cfg.hidden_dim;
        st.params["agg.wx"] = glorot_uniform<T>(4 * H, cfg.spatial_dim(), rng);
        st.params["agg.wh"] = glorot_uniform<T>(4 * H, H, rng);
        Tensor<T> b = Tensor<T>::zeros({1, 4 * H});
        for (int i = H; i < 2 * H; ++i) b.data[i] = T(1); // forget gate
        st.params["agg.b"] = std::move(b);
    }
    const int A = cfg.agg_dim();
    st.params["proj.l1.w"] = glorot_uniform<T>(cfg.proj_dims[0], A, rng);
    st.params["proj.l1.b"] = Tensor<T>::zeros({1, cfg.proj_dims[0]});
    st.params["proj.l2.w"] = glorot_uniform<T>(cfg.proj_dims[1], cfg.proj_dims[0], rng);
    st.params["proj.l2.b"] = Tensor<T>::zeros({1, cfg.proj_dims[1]});
    st.params["center.l1.wp"] = glorot_uniform<T>(cfg.center_hidden, cfg.penult_dim(), rng);
    st.params["center.l1.wh"] = glorot_uniform<T>(cfg.center_hidden, A, rng);
    st.params["center.l1.b"] = Tensor<T>::zeros({1, cfg.center_hidden});
    st.params["center.l2.w"] = glorot_uniform<T>(2, cfg.center_hidden, rng);
    st.params["center.l2.b"] = Tensor<T>::zeros({1, 2});
    st.params["fc.l1.w"] = glorot_uniform<T>(cfg.forecast_hidden, A, rng);
    st.params["fc.l1.b"] = Tensor<T>::zeros({1, cfg.forecast_hidden});
    st.params["fc.l2.w"] = glorot_uniform<T>(8, cfg.forecast_hidden, rng);
    st.params["fc.l2.b"] = Tensor<T>::zeros({1, 8});
    return st;
}

template <typename T>
ParamNodes register_params(Tape<T>& tape, const ParameterStore<T>& store,
                           const std::set<std::string>& trainable) {
    ParamNodes pn;
    for (const auto& [name, tensor] : store.params)
        pn.ids[name] = tape.leaf(tensor, trainable.count(name) > 0);
    return pn;
}

template <typename T>
PackedBatch<T> pack_sequences(const std::vector<const data::ScanSequence*>& seqs) {
    PackedBatch<T> pb;
    if (seqs.empty()) throw std::invalid_argument("pack_sequences: empty batch");
    pb.n_points = static_cast<int>(seqs[0]->frames.at(0).points.size());
    long total = 0;
    for (const auto* s : seqs)
        for (const auto& f : s->frames) {
            if (static_cast<int>(f.points.size()) != pb.n_points)
                throw std::invalid_argument("pack_sequences: non-uniform point count");
            total += pb.n_points;
        }
    pb.points = Tensor<T>::zeros({static_cast<int>(total), 3});
    int frame_idx = 0;
    long row = 0;
    for (const auto* s : seqs) {
        pb.seq_frame_begin.push_back(frame_idx);
        pb.seq_frame_count.push_back(static_cast<int>(s->frames.size()));
        for (const auto& f : s->frames) {
            pb.frame_starts.push_back(static_cast<int>(row));
            for (const auto& p : f.points) {
                pb.points.data[row * 3 + 0] = static_cast<T>(p.y * kInputScaleYZ);
                pb.points.data[row * 3 + 1] = static_cast<T>(p.z * kInputScaleYZ);
                pb.points.data[row * 3 + 2] = static_cast<T>(p.vr * kInputScaleVR);
                ++row;
            }
            ++frame_idx;
        }
    }
    return pb;
}

template <typename T>
EncodeResult<T> encode_frames(Tape<T>& tape, const ParamNodes& pn, const EncoderConfig& cfg,
                              int points_leaf, const std::vector<int>& frame_starts) {
    if (!tape.val(points_leaf).all_finite())
        throw std::invalid_argument("encode_frames: non-finite input");
    EncodeResult<T> out;
    int x = points_leaf;
    for (size_t i = 0; i < cfg.mlp_widths.size(); ++i) {
        const std::string base = "enc.l" + std::to_string(i + 1);
        x = tape.affine(x, pn.at(base + ".w"), pn.at(base + ".b"), true);
        if (i + 2 == cfg.mlp_widths.size()) out.perpoint = x;
    }
    out.pooled = tape.segment_max(x, frame_starts);
    return out;
}

template <typename T>
int lstm_step(Tape<T>& tape, const ParamNodes& pn, int H, int x, int& h, int& c) {
    const int gates = tape.add_rowvec(
        tape.add(tape.matmul_nt(x, pn.at("agg.wx")), tape.matmul_nt(h, pn.at("agg.wh"))),
        pn.at("agg.b"));
    const int i_g = tape.sigmoid_(tape.slice_cols(gates, 0, H));
    const int f_g = tape.sigmoid_(tape.slice_cols(gates, H, 2 * H));
    const int g_g = tape.tanh_(tape.slice_cols(gates, 2 * H, 3 * H));
    const int o_g = tape.sigmoid_(tape.slice_cols(gates, 3 * H, 4 * H));
    c = tape.add(tape.mul(f_g, c), tape.mul(i_g, g_g));
    h = tape.mul(o_g, tape.tanh_(c));
    return h;
}

template <typename T>
int aggregate_sequence(Tape<T>& tape, const ParamNodes& pn, const EncoderConfig& cfg,
                       int pooled, int frame_begin, int frame_count) {
    if (frame_count < 1) throw std::invalid_argument("aggregate_sequence: empty feature list");
    if (cfg.aggregator == "mean")
        return tape.mean_rows(tape.slice_rows(pooled, frame_begin, frame_begin + frame_count));
    const int H = cfg.hidden_dim;
    int h = tape.leaf(Tensor<T>::zeros({1, H}), false);
    int c = tape.leaf(Tensor<T>::zeros({1, H}), false);
    for (int t = 0; t < frame_count; ++t) {
        const int x = tape.slice_rows(pooled, frame_begin + t, frame_begin + t + 1);
        lstm_step(tape, pn, H, x, h, c);
    }
    return h;
}

template <typename T>
int project(Tape<T>& tape, const ParamNodes& pn, const EncoderConfig& cfg, int h) {
    (void)cfg;
    const int h1 = tape.affine(h, pn.at("proj.l1.w"), pn.at("proj.l1.b"), true);
    const int h2 = tape.affine(h1, pn.at("proj.l2.w"), pn.at("proj.l2.b"), false);
    return tape.l2norm_rows(h2, T(1e-12));
}

template <typename T>
SoftCenterOut<T> soft_center_head(Tape<T>& tape, const ParamNodes& pn, const EncoderConfig& cfg,
                                  int perpoint_rows, int h, int points_yz_leaf) {
    (void)cfg;
    const int per = tape.matmul_nt(perpoint_rows, pn.at("center.l1.wp")); // [N, Ch]
    const int ctx = tape.matmul_nt(h, pn.at("center.l1.wh"));             // [1, Ch]
    const int hid = tape.relu(tape.add_rowvec(tape.add_rowvec(per, ctx), pn.at("center.l1.b")));
    const int logits = tape.affine(hid, pn.at("center.l2.w"), pn.at("center.l2.b"), false);
    SoftCenterOut<T> out;
    out.mask = tape.sigmoid_(logits); // [N, 2]
    for (int j = 0; j < 2; ++j) {
        const int mj = tape.slice_cols(out.mask, j, j + 1);        // [N, 1]
        const int numer = tape.matmul_tn(mj, points_yz_leaf);      // [1, 2]
        const int denom = tape.sum_all(mj);
        const int cj = tape.div_by_scalar(numer, denom, T(1e-8));
        (j == 0 ? out.c_port : out.c_star) = cj;
    }
    return out;
}

template <typename T>
int forecast_head(Tape<T>& tape, const ParamNodes& pn, const EncoderConfig& cfg, int h) {
    (void)cfg;
    const int h1 = tape.affine(h, pn.at("fc.l1.w"), pn.at("fc.l1.b"), true);
    return tape.affine(h1, pn.at("fc.l2.w"), pn.at("fc.l2.b"), false);
}

} // namespace vortexlab::model

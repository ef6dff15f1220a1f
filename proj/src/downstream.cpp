#include "vortexlab/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "vortexlab/error.hpp"

namespace vortexlab::train {

using data::ScanSequence;

std::vector<ScanSequence> prepare_sequences(const std::vector<ScanSequence>& raw, int T,
                                            int n_points, bool center, uint64_t seed) {
    std::vector<ScanSequence> out;
    for (const auto& rec : raw) {
        for (auto& chunk : data::chunk_sequences(rec, T)) {
            for (size_t k = 0; k < chunk.frames.size(); ++k) {
                Rng rng = rng_stream(seed, {Rng::key("norm"), Rng::key(chunk.id()),
                                            static_cast<uint64_t>(k)});
                data::normalize_point_count(chunk.frames[k], n_points, rng);
            }
            if (center) data::center_sequence(chunk);
            out.push_back(std::move(chunk));
        }
    }
    return out;
}

data::Checkpoint to_checkpoint(const ParameterStore<float>& params,
                               const model::EncoderConfig& cfg, long step,
                               uint64_t master_seed) {
    data::Checkpoint ck;
    for (const auto& [name, t] : params.params) ck.tensors[name] = t;
    ck.hyper = cfg.to_json();
    ck.step = step;
    ck.master_seed = master_seed;
    return ck;
}

model::EncoderConfig config_from_checkpoint(const data::Checkpoint& ck) {
    return model::EncoderConfig::from_json(ck.hyper);
}

ParameterStore<float> from_checkpoint(const data::Checkpoint& ck,
                                      const model::EncoderConfig& expect) {
    const auto reference = model::init_params<float>(expect, 0);
    ParameterStore<float> out;
    for (const auto& [name, t] : reference.params) {
        auto it = ck.tensors.find(name);
        if (it == ck.tensors.end())
            throw runtime_error_("checkpoint: missing tensor " + name);
        if (it->second.shape != t.shape)
            throw runtime_error_("checkpoint: architecture mismatch on " + name + " (" +
                                 shape_str(it->second.shape) + " vs " + shape_str(t.shape) + ")");
        out.params[name] = it->second;
    }
    if (ck.tensors.size() != reference.params.size())
        throw runtime_error_("checkpoint: tensor name set does not match architecture");
    return out;
}

namespace {

// Fresh head init on top of checkpoint weights, keyed by the task seed.
void reinit_components(ParameterStore<float>& params, const model::EncoderConfig& cfg,
                       const std::vector<std::string>& comps, uint64_t seed) {
    const auto fresh = model::init_params<float>(cfg, seed);
    for (const auto& comp : comps)
        for (const auto& name : model::component_names(cfg, comp))
            params.params[name] = fresh.params.at(name);
}

std::set<std::string> name_set(const model::EncoderConfig& cfg,
                               const std::vector<std::string>& comps) {
    std::set<std::string> out;
    for (const auto& comp : comps)
        for (const auto& name : model::component_names(cfg, comp)) out.insert(name);
    return out;
}

Tensor<float> final_frame_yz(const ScanSequence& seq) {
    const auto& f = seq.frames.back();
    Tensor<float> p = Tensor<float>::zeros({static_cast<int>(f.points.size()), 2});
    for (size_t i = 0; i < f.points.size(); ++i) {
        p.data[i * 2 + 0] = static_cast<float>(f.points[i].y);
        p.data[i * 2 + 1] = static_cast<float>(f.points[i].z);
    }
    return p;
}

// First `history` frames re-centered by their own centroid; the removed
// offset composes into centroid_removed so absolute coordinates recover.
ScanSequence history_view(const ScanSequence& seq, int history) {
    if (static_cast<int>(seq.frames.size()) < history + 2)
        throw std::invalid_argument("history_view: sequence shorter than history + horizons");
    ScanSequence h = seq;
    h.frames.assign(seq.frames.begin(), seq.frames.begin() + history);
    if (h.centers) h.centers->assign(seq.centers->begin(), seq.centers->begin() + history);
    data::center_sequence(h);
    return h;
}

struct CenterGraph {
    int loss = -1;
    std::vector<std::pair<int, int>> centers; // (port node, star node) per sequence
};

// Shared forward graph for the center task over one batch.
CenterGraph center_graph(Tape<float>& tape, const model::ParamNodes& pn,
                         const model::EncoderConfig& enc,
                         const std::vector<const ScanSequence*>& batch, bool with_loss) {
    const auto pb = model::pack_sequences<float>(batch);
    const int points = tape.leaf(pb.points, false);
    const auto er = model::encode_frames(tape, pn, enc, points, pb.frame_starts);
    CenterGraph g;
    std::vector<int> seq_losses;
    for (size_t q = 0; q < batch.size(); ++q) {
        const int h = model::aggregate_sequence(tape, pn, enc, er.pooled, pb.seq_frame_begin[q],
                                                pb.seq_frame_count[q]);
        const int last = pb.seq_frame_begin[q] + pb.seq_frame_count[q] - 1;
        const int r0 = pb.frame_starts[last];
        const int r1 = r0 + pb.n_points;
        const int pf = tape.slice_rows(er.perpoint, r0, r1);
        const int yz = tape.leaf(final_frame_yz(*batch[q]), false);
        const auto sc = model::soft_center_head(tape, pn, enc, pf, h, yz);
        g.centers.emplace_back(sc.c_port, sc.c_star);
        if (with_loss) {
            const auto& gt = batch[q]->centers->back();
            Tensor<float> target = Tensor<float>::zeros({2, 2});
            target.data = {static_cast<float>(gt.port.y), static_cast<float>(gt.port.z),
                           static_cast<float>(gt.star.y), static_cast<float>(gt.star.z)};
            const int pred = tape.concat_rows({sc.c_port, sc.c_star});
            const int diff = tape.sub(pred, tape.leaf(std::move(target), false));
            seq_losses.push_back(tape.mean_all(tape.mul(diff, diff)));
        }
    }
    if (with_loss) g.loss = tape.mean_all(tape.concat_rows(seq_losses));
    return g;
}

FitResult fit_loop(const std::vector<ScanSequence>& train_seqs, ParameterStore<float> params,
                   const std::set<std::string>& trainable, const FitConfig& cfg,
                   const std::function<int(Tape<float>&, const model::ParamNodes&,
                                           const std::vector<const ScanSequence*>&)>& make_loss) {
    if (train_seqs.empty()) throw runtime_error_("training: empty training set");
    const int n = static_cast<int>(train_seqs.size());
    const int B = std::min(cfg.batch_size, n);
    const long steps_per_epoch = (n + B - 1) / B;
    const long total_steps = steps_per_epoch * cfg.epochs;
    AdamState<float> adam;
    FitResult res;
    long step = 0;
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return train_seqs[a].id() < train_seqs[b].id(); });
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<int> idx = order;
        Rng rng = rng_stream(cfg.seed, {Rng::key("fit-shuffle"), static_cast<uint64_t>(epoch)});
        rng.shuffle(idx);
        double ep_loss = 0;
        for (long s = 0; s < steps_per_epoch; ++s) {
            std::vector<const ScanSequence*> batch;
            for (long b = s * B; b < std::min<long>((s + 1) * B, n); ++b)
                batch.push_back(&train_seqs[idx[b]]);
            Tape<float> tape;
            const auto pn = model::register_params(tape, params, trainable);
            const int loss_id = make_loss(tape, pn, batch);
            const double loss = tape.val(loss_id).data[0];
            if (!std::isfinite(loss)) throw runtime_error_("training: non-finite loss");
            auto grads = tape.backward(loss_id);
            std::map<std::string, Tensor<float>> gmap;
            for (const auto& name : trainable) gmap[name] = tape.grad_of(grads, pn.at(name));
            adam_step(params, gmap, adam, cosine_lr(step, total_steps, cfg.lr0));
            ++step;
            ep_loss += loss;
        }
        res.epoch_loss.push_back(ep_loss / steps_per_epoch);
    }
    res.params = std::move(params);
    return res;
}

} // namespace

FitResult finetune_center(const std::vector<ScanSequence>& train_seqs,
                          const data::Checkpoint* pretrained, const FitConfig& cfg) {
    for (const auto& s : train_seqs)
        if (!s.centers) throw runtime_error_("finetune_center: unlabeled sequence " + s.id());
    ParameterStore<float> params;
    std::set<std::string> trainable;
    if (pretrained != nullptr) {
        params = from_checkpoint(*pretrained, cfg.enc);
        reinit_components(params, cfg.enc, {"center"}, cfg.seed);
        trainable = name_set(cfg.enc, {"aggregator", "center"});
        if (cfg.enc.aggregator == "mean") trainable = name_set(cfg.enc, {"center"});
    } else {
        params = model::init_params<float>(cfg.enc, cfg.seed);
        trainable = name_set(cfg.enc, {"encoder", "aggregator", "center"});
    }
    return fit_loop(train_seqs, std::move(params), trainable, cfg,
                    [&](Tape<float>& tape, const model::ParamNodes& pn,
                        const std::vector<const ScanSequence*>& batch) {
                        return center_graph(tape, pn, cfg.enc, batch, true).loss;
                    });
}

FitResult train_forecast_head(const std::vector<ScanSequence>& train_seqs,
                              const data::Checkpoint& pretrained, const FitConfig& cfg) {
    // one sample per sequence: 3-frame history, targets at t+1 and t+2
    std::vector<ScanSequence> hist;
    std::vector<std::array<float, 8>> targets;
    for (const auto& s : train_seqs) {
        if (!s.centers) throw runtime_error_("train_forecast_head: unlabeled sequence " + s.id());
        ScanSequence h = history_view(s, 3);
        std::array<float, 8> t{};
        for (int k = 0; k < 2; ++k) {
            const auto& c = (*s.centers)[3 + k];
            // convert from the sequence frame to the history frame
            const double dy = s.centroid_removed.y - h.centroid_removed.y;
            const double dz = s.centroid_removed.z - h.centroid_removed.z;
            t[k * 4 + 0] = static_cast<float>((c.port.y + dy) * model::kForecastScale);
            t[k * 4 + 1] = static_cast<float>((c.port.z + dz) * model::kForecastScale);
            t[k * 4 + 2] = static_cast<float>((c.star.y + dy) * model::kForecastScale);
            t[k * 4 + 3] = static_cast<float>((c.star.z + dz) * model::kForecastScale);
        }
        hist.push_back(std::move(h));
        targets.push_back(t);
    }
    auto params = from_checkpoint(pretrained, cfg.enc);
    reinit_components(params, cfg.enc, {"forecast"}, cfg.seed);
    const auto trainable = name_set(cfg.enc, {"forecast"});

    // index targets by id since fit_loop shuffles
    std::map<std::string, std::array<float, 8>> by_id;
    for (size_t i = 0; i < hist.size(); ++i) by_id[hist[i].id()] = targets[i];

    return fit_loop(hist, std::move(params), trainable, cfg,
                    [&, by_id](Tape<float>& tape, const model::ParamNodes& pn,
                               const std::vector<const ScanSequence*>& batch) {
                        const auto pb = model::pack_sequences<float>(batch);
                        const int points = tape.leaf(pb.points, false);
                        const auto er =
                            model::encode_frames(tape, pn, cfg.enc, points, pb.frame_starts);
                        std::vector<int> losses;
                        for (size_t q = 0; q < batch.size(); ++q) {
                            const int h = model::aggregate_sequence(
                                tape, pn, cfg.enc, er.pooled, pb.seq_frame_begin[q],
                                pb.seq_frame_count[q]);
                            const int out = model::forecast_head(tape, pn, cfg.enc, h);
                            const auto& t = by_id.at(batch[q]->id());
                            Tensor<float> target({1, 8}, {t.begin(), t.end()});
                            const int diff = tape.sub(out, tape.leaf(std::move(target), false));
                            losses.push_back(tape.mean_all(tape.mul(diff, diff)));
                        }
                        return tape.mean_all(tape.concat_rows(losses));
                    });
}

namespace {

std::vector<std::vector<double>> rows_to_vectors(const Tensor<float>& t) {
    std::vector<std::vector<double>> out(t.rows());
    for (int r = 0; r < t.rows(); ++r) {
        out[r].resize(t.cols());
        for (int c = 0; c < t.cols(); ++c) out[r][c] = t.at(r, c);
    }
    return out;
}

} // namespace

std::vector<std::vector<double>> embed_sequences(const ParameterStore<float>& params,
                                                 const model::EncoderConfig& cfg,
                                                 const std::vector<ScanSequence>& seqs) {
    std::vector<std::vector<double>> out;
    constexpr size_t kChunk = 32;
    for (size_t base = 0; base < seqs.size(); base += kChunk) {
        std::vector<const ScanSequence*> batch;
        for (size_t i = base; i < std::min(base + kChunk, seqs.size()); ++i)
            batch.push_back(&seqs[i]);
        Tape<float> tape;
        const auto pn = model::register_params(tape, params, {});
        const auto pb = model::pack_sequences<float>(batch);
        const int points = tape.leaf(pb.points, false);
        const auto er = model::encode_frames(tape, pn, cfg, points, pb.frame_starts);
        for (size_t q = 0; q < batch.size(); ++q) {
            const int h = model::aggregate_sequence(tape, pn, cfg, er.pooled,
                                                    pb.seq_frame_begin[q], pb.seq_frame_count[q]);
            out.push_back(rows_to_vectors(tape.val(h))[0]);
        }
    }
    return out;
}

std::vector<std::vector<double>> embed_frames(const ParameterStore<float>& params,
                                              const model::EncoderConfig& cfg,
                                              const std::vector<ScanSequence>& seqs) {
    std::vector<std::vector<double>> out;
    constexpr size_t kChunk = 32;
    for (size_t base = 0; base < seqs.size(); base += kChunk) {
        std::vector<const ScanSequence*> batch;
        for (size_t i = base; i < std::min(base + kChunk, seqs.size()); ++i)
            batch.push_back(&seqs[i]);
        Tape<float> tape;
        const auto pn = model::register_params(tape, params, {});
        const auto pb = model::pack_sequences<float>(batch);
        const int points = tape.leaf(pb.points, false);
        const auto er = model::encode_frames(tape, pn, cfg, points, pb.frame_starts);
        for (const auto& row : rows_to_vectors(tape.val(er.pooled))) out.push_back(row);
    }
    return out;
}

std::vector<std::vector<double>> embed_projected(const ParameterStore<float>& params,
                                                 const model::EncoderConfig& cfg,
                                                 const std::vector<ScanSequence>& seqs) {
    std::vector<std::vector<double>> out;
    constexpr size_t kChunk = 32;
    for (size_t base = 0; base < seqs.size(); base += kChunk) {
        std::vector<const ScanSequence*> batch;
        for (size_t i = base; i < std::min(base + kChunk, seqs.size()); ++i)
            batch.push_back(&seqs[i]);
        Tape<float> tape;
        const auto pn = model::register_params(tape, params, {});
        const auto pb = model::pack_sequences<float>(batch);
        const int points = tape.leaf(pb.points, false);
        const auto er = model::encode_frames(tape, pn, cfg, points, pb.frame_starts);
        for (size_t q = 0; q < batch.size(); ++q) {
            const int h = model::aggregate_sequence(tape, pn, cfg, er.pooled,
                                                    pb.seq_frame_begin[q], pb.seq_frame_count[q]);
            out.push_back(rows_to_vectors(tape.val(model::project(tape, pn, cfg, h)))[0]);
        }
    }
    return out;
}

data::VortexCenters predict_centers(const ParameterStore<float>& params,
                                    const model::EncoderConfig& cfg, const ScanSequence& seq) {
    Tape<float> tape;
    const auto pn = model::register_params(tape, params, {});
    const auto g = center_graph(tape, pn, cfg, {&seq}, false);
    const auto& cp = tape.val(g.centers[0].first);
    const auto& cs = tape.val(g.centers[0].second);
    data::VortexCenters out;
    out.port = {cp.data[0], cp.data[1]};
    out.star = {cs.data[0], cs.data[1]};
    return out;
}

std::array<data::VortexCenters, 2> predict_forecast(const ParameterStore<float>& params,
                                                    const model::EncoderConfig& cfg,
                                                    const ScanSequence& seq, int history) {
    const ScanSequence h = history_view(seq, history);
    Tape<float> tape;
    const auto pn = model::register_params(tape, params, {});
    const auto pb = model::pack_sequences<float>({&h});
    const int points = tape.leaf(pb.points, false);
    const auto er = model::encode_frames(tape, pn, cfg, points, pb.frame_starts);
    const int hid =
        model::aggregate_sequence(tape, pn, cfg, er.pooled, 0, static_cast<int>(h.frames.size()));
    const auto& out = tape.val(model::forecast_head(tape, pn, cfg, hid));
    const double s = 1.0 / model::kForecastScale;
    std::array<data::VortexCenters, 2> res;
    for (int k = 0; k < 2; ++k) {
        res[k].port = {out.data[k * 4 + 0] * s + h.centroid_removed.y,
                       out.data[k * 4 + 1] * s + h.centroid_removed.z};
        res[k].star = {out.data[k * 4 + 2] * s + h.centroid_removed.y,
                       out.data[k * 4 + 3] * s + h.centroid_removed.z};
    }
    return res;
}

} // namespace vortexlab::train

#include "vortexlab/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "vortexlab/downstream.hpp"
#include "vortexlab/error.hpp"

namespace vortexlab::ssl {

double alignment(const std::vector<std::vector<double>>& a,
                 const std::vector<std::vector<double>>& b, double alpha) {
    if (a.empty() || a.size() != b.size())
        throw std::invalid_argument("alignment: need >= 1 positive pair");
    double sum = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d2 = 0.0;
        for (size_t c = 0; c < a[i].size(); ++c) {
            const double d = a[i][c] - b[i][c];
            d2 += d * d;
        }
        sum += std::pow(d2, alpha / 2.0);
    }
    return sum / static_cast<double>(a.size());
}

double uniformity(const std::vector<std::vector<double>>& z, double t) {
    const size_t n = z.size();
    if (n < 2) throw std::invalid_argument("uniformity: need >= 2 embeddings");
    double sum = 0.0;
    long pairs = 0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            double d2 = 0.0;
            for (size_t c = 0; c < z[i].size(); ++c) {
                const double d = z[i][c] - z[j][c];
                d2 += d * d;
            }
            sum += std::exp(-t * d2);
            ++pairs;
        }
    return std::log(sum / static_cast<double>(pairs));
}

namespace {

using data::ScanSequence;

// Builds the two-view embedding block [2B, d] for a batch of view pairs.
int embed_views(Tape<float>& tape, const model::ParamNodes& pn, const model::EncoderConfig& enc,
                const std::vector<const ScanSequence*>& views) {
    const auto pb = model::pack_sequences<float>(views);
    const int points = tape.leaf(pb.points, false);
    const auto er = model::encode_frames(tape, pn, enc, points, pb.frame_starts);
    std::vector<int> z_ids;
    z_ids.reserve(views.size());
    for (size_t q = 0; q < views.size(); ++q) {
        const int h = model::aggregate_sequence(tape, pn, enc, er.pooled, pb.seq_frame_begin[q],
                                                pb.seq_frame_count[q]);
        z_ids.push_back(model::project(tape, pn, enc, h));
    }
    return tape.concat_rows(z_ids);
}

struct BatchMetrics {
    double loss, align, unif;
};

BatchMetrics batch_metrics(const Tensor<float>& Z, double loss) {
    const int B = Z.rows() / 2;
    std::vector<std::vector<double>> all(Z.rows());
    for (int r = 0; r < Z.rows(); ++r) {
        all[r].resize(Z.cols());
        for (int c = 0; c < Z.cols(); ++c) all[r][c] = Z.at(r, c);
    }
    std::vector<std::vector<double>> a(all.begin(), all.begin() + B);
    std::vector<std::vector<double>> b(all.begin() + B, all.end());
    return {loss, alignment(a, b), uniformity(all)};
}

} // namespace

PretrainResult pretrain(const std::vector<ScanSequence>& raw_sequences,
                        const PretrainConfig& cfg) {
    if (raw_sequences.empty()) throw runtime_error_("pretrain: dataset empty");
    cfg.enc.validate();
    cfg.augment.validate(5);
    if (cfg.batch_size < 2) throw config_error("pretrain: batch size must be >= 2");

    auto seqs = train::prepare_sequences(raw_sequences, 5, cfg.n_points, cfg.center,
                                         cfg.split_seed);
    if (seqs.empty()) throw runtime_error_("pretrain: no usable sequences after chunking");

    // split by event so chunks of one recording never straddle splits
    std::set<std::string> events;
    for (const auto& s : seqs) events.insert(s.event_id);
    const auto split = data::split_dataset({events.begin(), events.end()}, cfg.split_ratios,
                                           cfg.split_seed);
    const std::set<std::string> train_ev(split.train.begin(), split.train.end());
    const std::set<std::string> val_ev(split.val.begin(), split.val.end());

    std::vector<int> train_idx, val_idx;
    for (size_t i = 0; i < seqs.size(); ++i) {
        if (train_ev.count(seqs[i].event_id)) train_idx.push_back(static_cast<int>(i));
        else if (val_ev.count(seqs[i].event_id)) val_idx.push_back(static_cast<int>(i));
    }
    std::sort(train_idx.begin(), train_idx.end(),
              [&](int a, int b) { return seqs[a].id() < seqs[b].id(); });
    std::sort(val_idx.begin(), val_idx.end(),
              [&](int a, int b) { return seqs[a].id() < seqs[b].id(); });
    if (cfg.max_sequences > 0 && static_cast<int>(train_idx.size()) > cfg.max_sequences)
        train_idx.resize(cfg.max_sequences);

    const int B = cfg.batch_size;
    const long steps_per_epoch = static_cast<long>(train_idx.size()) / B;
    if (steps_per_epoch == 0) throw config_error("pretrain: train split smaller than one batch");
    const long total_steps = steps_per_epoch * cfg.epochs;

    auto params = model::init_params<float>(cfg.enc, cfg.seed);
    std::set<std::string> trainable;
    for (const auto& comp : {"encoder", "aggregator", "projection"})
        for (const auto& n : model::component_names(cfg.enc, comp)) trainable.insert(n);

    AdamState<float> adam;
    PretrainResult result;
    long global_step = 0;
    double best_val = 1e300;
    int since_best = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<int> order = train_idx;
        Rng shuffle_rng = rng_stream(cfg.seed, {Rng::key("shuffle"), static_cast<uint64_t>(epoch)});
        shuffle_rng.shuffle(order);
        const double epoch_lr = cosine_lr(global_step, total_steps, cfg.lr0);

        double tr_loss = 0, tr_align = 0, tr_unif = 0;
        for (long s = 0; s < steps_per_epoch; ++s) {
            std::vector<aug::ViewPair> pairs;
            pairs.reserve(B);
            for (int b = 0; b < B; ++b) {
                const auto& seq = seqs[order[s * B + b]];
                Rng arng = rng_stream(cfg.seed, {Rng::key("aug"), static_cast<uint64_t>(epoch),
                                                 Rng::key(seq.id())});
                pairs.push_back(aug::make_view_pair(seq, arng, cfg.augment, cfg.n_points));
            }
            std::vector<const ScanSequence*> views;
            for (const auto& p : pairs) views.push_back(&p.weak);
            for (const auto& p : pairs) views.push_back(&p.strong);

            Tape<float> tape;
            const auto pn = model::register_params(tape, params, trainable);
            const int z = embed_views(tape, pn, cfg.enc, views);
            const int loss_id = info_nce(tape, z, cfg.temperature);
            const double loss = tape.val(loss_id).data[0];
            if (!std::isfinite(loss))
                throw runtime_error_("pretrain: non-finite loss at step " +
                                     std::to_string(global_step));
            auto grads = tape.backward(loss_id);
            std::map<std::string, Tensor<float>> gmap;
            for (const auto& name : trainable)
                gmap[name] = tape.grad_of(grads, pn.at(name));
            adam_step(params, gmap, adam, cosine_lr(global_step, total_steps, cfg.lr0));
            ++global_step;

            const auto m = batch_metrics(tape.val(z), loss);
            tr_loss += m.loss;
            tr_align += m.align;
            tr_unif += m.unif;
        }
        result.metrics.push_back({epoch, "train", tr_loss / steps_per_epoch,
                                  tr_align / steps_per_epoch, tr_unif / steps_per_epoch,
                                  epoch_lr});

        // validation with epoch-independent view streams
        std::vector<std::vector<int>> val_batches;
        for (size_t i = 0; i + B <= val_idx.size(); i += B)
            val_batches.emplace_back(val_idx.begin() + i, val_idx.begin() + i + B);
        if (val_batches.empty() && val_idx.size() >= 2)
            val_batches.emplace_back(val_idx.begin(), val_idx.end());
        if (!val_batches.empty()) {
            double va_loss = 0, va_align = 0, va_unif = 0;
            for (const auto& batch : val_batches) {
                std::vector<aug::ViewPair> pairs;
                for (int idx : batch) {
                    const auto& seq = seqs[idx];
                    Rng arng = rng_stream(cfg.seed, {Rng::key("val-aug"), Rng::key(seq.id())});
                    pairs.push_back(aug::make_view_pair(seq, arng, cfg.augment, cfg.n_points));
                }
                std::vector<const ScanSequence*> views;
                for (const auto& p : pairs) views.push_back(&p.weak);
                for (const auto& p : pairs) views.push_back(&p.strong);
                Tape<float> tape;
                const auto pn = model::register_params(tape, params, {});
                const int z = embed_views(tape, pn, cfg.enc, views);
                const int loss_id = info_nce(tape, z, cfg.temperature);
                const auto m = batch_metrics(tape.val(z), tape.val(loss_id).data[0]);
                va_loss += m.loss;
                va_align += m.align;
                va_unif += m.unif;
            }
            const double nb = static_cast<double>(val_batches.size());
            result.metrics.push_back(
                {epoch, "val", va_loss / nb, va_align / nb, va_unif / nb, epoch_lr});
            if (va_loss / nb < best_val) {
                best_val = va_loss / nb;
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                result.epochs_run = epoch;
                break;
            }
        }
        result.epochs_run = epoch;
    }

    data::Checkpoint ck;
    for (const auto& [name, t] : params.params) ck.tensors[name] = t;
    ck.hyper = cfg.enc.to_json();
    ck.hyper["n_points"] = cfg.n_points;
    ck.hyper["center"] = cfg.center;
    ck.step = global_step;
    ck.master_seed = cfg.seed;
    result.checkpoint = std::move(ck);
    return result;
}

} // namespace vortexlab::ssl

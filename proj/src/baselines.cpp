#include "vortexlab/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "vortexlab/error.hpp"
#include "vortexlab/model.hpp"
#include "vortexlab/tape.hpp"

namespace vortexlab::baselines {

void DbscanConfig::validate() const {
    if (eps <= 0) throw config_error("dbscan: eps must be > 0");
    if (min_pts < 1) throw config_error("dbscan: min_pts must be >= 1");
}

void KalmanConfig::validate() const {
    if (q <= 0 || r <= 0) throw config_error("kalman: q and r must be > 0");
}

std::vector<int> dbscan_labels(const std::vector<std::array<double, 2>>& pts, double eps,
                               int min_pts) {
    const int n = static_cast<int>(pts.size());
    const double eps2 = eps * eps;
    std::vector<std::vector<int>> nbrs(n);
    for (int i = 0; i < n; ++i) {
        nbrs[i].push_back(i);
        for (int j = i + 1; j < n; ++j) {
            const double dy = pts[i][0] - pts[j][0];
            const double dz = pts[i][1] - pts[j][1];
            if (dy * dy + dz * dz <= eps2) {
                nbrs[i].push_back(j);
                nbrs[j].push_back(i);
            }
        }
    }
    std::vector<bool> core(n, false);
    for (int i = 0; i < n; ++i) core[i] = static_cast<int>(nbrs[i].size()) >= min_pts;

    // clusters are connected components of core points; this makes core
    // membership independent of input order
    std::vector<int> label(n, -1);
    int next = 0;
    for (int i = 0; i < n; ++i) {
        if (!core[i] || label[i] != -1) continue;
        label[i] = next;
        std::vector<int> stack{i};
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            for (int v : nbrs[u]) {
                if (!core[v] || label[v] != -1) continue;
                label[v] = next;
                stack.push_back(v);
            }
        }
        ++next;
    }
    // border points attach to the nearest core within eps; distance ties go
    // to the core with the lexicographically smallest coordinates, so the
    // partition does not depend on input order either
    for (int i = 0; i < n; ++i) {
        if (core[i] || label[i] != -1) continue;
        int best = -1;
        double best_d = 0;
        for (int v : nbrs[i]) {
            if (!core[v]) continue;
            const double dy = pts[i][0] - pts[v][0];
            const double dz = pts[i][1] - pts[v][1];
            const double d = dy * dy + dz * dz;
            if (best < 0 || d < best_d ||
                (d == best_d && std::make_pair(pts[v][0], pts[v][1]) <
                                    std::make_pair(pts[best][0], pts[best][1]))) {
                best = v;
                best_d = d;
            }
        }
        if (best >= 0) label[i] = label[best];
    }
    return label;
}

namespace {

data::Vec2 frame_centroid(const data::PointCloudFrame& frame) {
    data::Vec2 c;
    for (const auto& p : frame.points) {
        c.y += p.y;
        c.z += p.z;
    }
    c.y /= static_cast<double>(frame.points.size());
    c.z /= static_cast<double>(frame.points.size());
    return c;
}

data::VortexCenters order_port_star(data::Vec2 a, data::Vec2 b) {
    data::VortexCenters out;
    if (a.y >= b.y) {
        out.port = a;
        out.star = b;
    } else {
        out.port = b;
        out.star = a;
    }
    return out;
}

} // namespace

data::VortexCenters dbscan_centers(const data::PointCloudFrame& frame, const DbscanConfig& cfg) {
    cfg.validate();
    if (frame.points.empty()) throw std::invalid_argument("dbscan_centers: empty frame");
    std::vector<std::array<double, 2>> pts;
    for (const auto& p : frame.points)
        if (std::abs(p.vr) >= cfg.vr_threshold) pts.push_back({p.y, p.z});
    const data::Vec2 fc = frame_centroid(frame);
    if (pts.empty()) return {fc, fc};

    const auto labels = dbscan_labels(pts, cfg.eps, cfg.min_pts);
    const int n_clusters = 1 + *std::max_element(labels.begin(), labels.end());
    if (n_clusters == 0) return {fc, fc};

    std::vector<int> size(n_clusters, 0);
    std::vector<data::Vec2> centroid(n_clusters);
    for (size_t i = 0; i < pts.size(); ++i) {
        if (labels[i] < 0) continue;
        size[labels[i]]++;
        centroid[labels[i]].y += pts[i][0];
        centroid[labels[i]].z += pts[i][1];
    }
    std::vector<int> rank(n_clusters);
    std::iota(rank.begin(), rank.end(), 0);
    std::sort(rank.begin(), rank.end(), [&](int a, int b) {
        if (size[a] != size[b]) return size[a] > size[b];
        return a < b;
    });
    for (int c = 0; c < n_clusters; ++c) {
        centroid[c].y /= size[c];
        centroid[c].z /= size[c];
    }
    if (n_clusters == 1) return {centroid[rank[0]], centroid[rank[0]]};
    return order_port_star(centroid[rank[0]], centroid[rank[1]]);
}

data::VortexCenters intensity_centroid(const data::PointCloudFrame& frame) {
    if (frame.points.empty()) throw std::invalid_argument("intensity_centroid: empty frame");
    const data::Vec2 fc = frame_centroid(frame);
    double total = 0;
    for (const auto& p : frame.points) total += std::abs(p.vr);
    if (total <= 0) return {fc, fc};

    // weighted median of y
    std::vector<int> idx(frame.points.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](int a, int b) { return frame.points[a].y < frame.points[b].y; });
    double cum = 0;
    double median_y = frame.points[idx.back()].y;
    for (int i : idx) {
        cum += std::abs(frame.points[i].vr);
        if (cum >= total / 2.0) {
            median_y = frame.points[i].y;
            break;
        }
    }

    double wl = 0, wr = 0;
    data::Vec2 cl, cr;
    for (const auto& p : frame.points) {
        const double w = std::abs(p.vr);
        if (p.y <= median_y) {
            wl += w;
            cl.y += w * p.y;
            cl.z += w * p.z;
        } else {
            wr += w;
            cr.y += w * p.y;
            cr.z += w * p.z;
        }
    }
    if (wl <= 0 || wr <= 0) return {fc, fc};
    cl.y /= wl;
    cl.z /= wl;
    cr.y /= wr;
    cr.z /= wr;
    return order_port_star(cl, cr);
}

std::array<data::VortexCenters, 2> constant_velocity_forecast(
    const std::vector<data::VortexCenters>& history) {
    if (history.size() < 2)
        throw std::invalid_argument("constant_velocity_forecast: need >= 2 observations");
    const auto& last = history.back();
    const auto& prev = history[history.size() - 2];
    const double vpy = last.port.y - prev.port.y, vpz = last.port.z - prev.port.z;
    const double vsy = last.star.y - prev.star.y, vsz = last.star.z - prev.star.z;
    std::array<data::VortexCenters, 2> out;
    for (int k = 1; k <= 2; ++k) {
        out[k - 1].port = {last.port.y + k * vpy, last.port.z + k * vpz};
        out[k - 1].star = {last.star.y + k * vsy, last.star.z + k * vsz};
    }
    return out;
}

namespace {

// 4-state (y, z, vy, vz) constant-velocity filter with unit time step
struct Kf4 {
    std::array<double, 4> x{};
    std::array<double, 16> P{};
    double q, r, p0_pos, p0_vel;
    double max_asym = 0;
    bool reset = false;

    static int id(int i, int j) { return i * 4 + j; }

    void init(const data::Vec2& obs, const KalmanConfig& cfg) {
        q = cfg.q;
        r = cfg.r;
        p0_pos = cfg.p0_pos;
        p0_vel = cfg.p0_vel;
        x = {obs.y, obs.z, 0.0, 0.0};
        reset_cov();
    }

    void reset_cov() {
        P.fill(0.0);
        P[id(0, 0)] = P[id(1, 1)] = p0_pos;
        P[id(2, 2)] = P[id(3, 3)] = p0_vel;
    }

    void predict() {
        // x = F x with F = I + dt on the velocity block
        x[0] += x[2];
        x[1] += x[3];
        // P = F P F^T + Q
        std::array<double, 16> fp{};
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                double v = P[id(i, j)];
                if (i == 0) v += P[id(2, j)];
                if (i == 1) v += P[id(3, j)];
                fp[id(i, j)] = v;
            }
        std::array<double, 16> fpf{};
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                double v = fp[id(i, j)];
                if (j == 0) v += fp[id(i, 2)];
                if (j == 1) v += fp[id(i, 3)];
                fpf[id(i, j)] = v;
            }
        P = fpf;
        P[id(0, 0)] += q / 3.0;
        P[id(1, 1)] += q / 3.0;
        P[id(0, 2)] += q / 2.0;
        P[id(2, 0)] += q / 2.0;
        P[id(1, 3)] += q / 2.0;
        P[id(3, 1)] += q / 2.0;
        P[id(2, 2)] += q;
        P[id(3, 3)] += q;
    }

    void update(const data::Vec2& obs) {
        // S = H P H^T + R with H selecting positions
        const double s00 = P[id(0, 0)] + r, s01 = P[id(0, 1)];
        const double s10 = P[id(1, 0)], s11 = P[id(1, 1)] + r;
        const double det = s00 * s11 - s01 * s10;
        if (!(det > 0) || s00 <= 0 || s11 <= 0) {
            reset_cov();
            reset = true;
            return update(obs);
        }
        const double i00 = s11 / det, i01 = -s01 / det, i10 = -s10 / det, i11 = s00 / det;
        // K = P H^T S^-1 (4x2)
        std::array<double, 8> K{};
        for (int i = 0; i < 4; ++i) {
            const double ph0 = P[id(i, 0)], ph1 = P[id(i, 1)];
            K[i * 2 + 0] = ph0 * i00 + ph1 * i10;
            K[i * 2 + 1] = ph0 * i01 + ph1 * i11;
        }
        const double ry = obs.y - x[0], rz = obs.z - x[1];
        for (int i = 0; i < 4; ++i) x[i] += K[i * 2] * ry + K[i * 2 + 1] * rz;
        // Joseph form: P = (I-KH) P (I-KH)^T + K R K^T
        std::array<double, 16> a{}; // I - K H
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                double v = (i == j) ? 1.0 : 0.0;
                if (j == 0) v -= K[i * 2];
                if (j == 1) v -= K[i * 2 + 1];
                a[id(i, j)] = v;
            }
        std::array<double, 16> ap{};
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                double v = 0;
                for (int k = 0; k < 4; ++k) v += a[id(i, k)] * P[id(k, j)];
                ap[id(i, j)] = v;
            }
        std::array<double, 16> apa{};
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                double v = 0;
                for (int k = 0; k < 4; ++k) v += ap[id(i, k)] * a[id(j, k)];
                apa[id(i, j)] = v;
            }
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                apa[id(i, j)] += r * (K[i * 2] * K[j * 2] + K[i * 2 + 1] * K[j * 2 + 1]);
        P = apa;
        double asym = 0;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                asym = std::max(asym, std::abs(P[id(i, j)] - P[id(j, i)]));
        max_asym = std::max(max_asym, asym);
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j) {
                const double m = 0.5 * (P[id(i, j)] + P[id(j, i)]);
                P[id(i, j)] = P[id(j, i)] = m;
            }
    }
};

} // namespace

std::array<data::VortexCenters, 2> kalman_forecast(const std::vector<data::VortexCenters>& history,
                                                   const KalmanConfig& cfg, KalmanDiag* diag) {
    cfg.validate();
    if (history.empty()) throw std::invalid_argument("kalman_forecast: need >= 1 observation");
    Kf4 port, star;
    port.init(history[0].port, cfg);
    star.init(history[0].star, cfg);
    for (size_t i = 1; i < history.size(); ++i) {
        port.predict();
        port.update(history[i].port);
        star.predict();
        star.update(history[i].star);
    }
    std::array<data::VortexCenters, 2> out;
    for (int k = 0; k < 2; ++k) {
        port.predict();
        star.predict();
        out[k].port = {port.x[0], port.x[1]};
        out[k].star = {star.x[0], star.x[1]};
    }
    if (diag) {
        diag->max_asym = std::max(port.max_asym, star.max_asym);
        diag->reset = port.reset || star.reset;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Trajectory-only recurrent forecaster
// ---------------------------------------------------------------------------

namespace {

constexpr double kTrajScale = 0.01; // meters -> LSTM-friendly units

int traj_lstm_forward(Tape<float>& tape, const model::ParamNodes& pn, int hidden,
                      const std::vector<std::array<float, 4>>& inputs) {
    int h = tape.leaf(Tensor<float>::zeros({1, hidden}), false);
    int c = tape.leaf(Tensor<float>::zeros({1, hidden}), false);
    for (const auto& in : inputs) {
        const int x = tape.leaf(Tensor<float>({1, 4}, {in.begin(), in.end()}), false);
        const int gates = tape.add_rowvec(
            tape.add(tape.matmul_nt(x, pn.at("traj.wx")), tape.matmul_nt(h, pn.at("traj.wh"))),
            pn.at("traj.b"));
        const int i_g = tape.sigmoid_(tape.slice_cols(gates, 0, hidden));
        const int f_g = tape.sigmoid_(tape.slice_cols(gates, hidden, 2 * hidden));
        const int g_g = tape.tanh_(tape.slice_cols(gates, 2 * hidden, 3 * hidden));
        const int o_g = tape.sigmoid_(tape.slice_cols(gates, 3 * hidden, 4 * hidden));
        c = tape.add(tape.mul(f_g, c), tape.mul(i_g, g_g));
        h = tape.mul(o_g, tape.tanh_(c));
    }
    return tape.add_rowvec(tape.matmul_nt(h, pn.at("traj.out.w")), pn.at("traj.out.b"));
}

struct TrajSample {
    std::vector<std::array<float, 4>> inputs; // scaled, centered history
    std::array<float, 8> target;              // scaled, centered future centers
};

TrajSample make_traj_sample(const std::vector<data::VortexCenters>& track, int history,
                            bool with_target) {
    data::Vec2 mu;
    for (int t = 0; t < history; ++t) {
        mu.y += track[t].port.y + track[t].star.y;
        mu.z += track[t].port.z + track[t].star.z;
    }
    mu.y /= 2.0 * history;
    mu.z /= 2.0 * history;
    TrajSample s;
    for (int t = 0; t < history; ++t)
        s.inputs.push_back({static_cast<float>((track[t].port.y - mu.y) * kTrajScale),
                            static_cast<float>((track[t].port.z - mu.z) * kTrajScale),
                            static_cast<float>((track[t].star.y - mu.y) * kTrajScale),
                            static_cast<float>((track[t].star.z - mu.z) * kTrajScale)});
    if (with_target) {
        for (int k = 0; k < 2; ++k) {
            const auto& c = track[history + k];
            s.target[k * 4 + 0] = static_cast<float>((c.port.y - mu.y) * kTrajScale);
            s.target[k * 4 + 1] = static_cast<float>((c.port.z - mu.z) * kTrajScale);
            s.target[k * 4 + 2] = static_cast<float>((c.star.y - mu.y) * kTrajScale);
            s.target[k * 4 + 3] = static_cast<float>((c.star.z - mu.z) * kTrajScale);
        }
    }
    return s;
}

} // namespace

TrajForecaster train_trajectory_forecaster(
    const std::vector<std::vector<data::VortexCenters>>& center_tracks, int history,
    uint64_t seed, int epochs, double lr0) {
    if (center_tracks.empty())
        throw runtime_error_("train_trajectory_forecaster: empty training set");
    TrajForecaster m;
    m.history = history;
    Rng rng = rng_stream(seed, {Rng::key("traj-init")});
    m.params.params["traj.wx"] = glorot_uniform<float>(4 * m.hidden, 4, rng);
    m.params.params["traj.wh"] = glorot_uniform<float>(4 * m.hidden, m.hidden, rng);
    Tensor<float> b = Tensor<float>::zeros({1, 4 * m.hidden});
    for (int i = m.hidden; i < 2 * m.hidden; ++i) b.data[i] = 1.0f;
    m.params.params["traj.b"] = std::move(b);
    m.params.params["traj.out.w"] = glorot_uniform<float>(8, m.hidden, rng);
    m.params.params["traj.out.b"] = Tensor<float>::zeros({1, 8});

    std::vector<TrajSample> samples;
    for (const auto& track : center_tracks) {
        if (static_cast<int>(track.size()) < history + 2) continue;
        samples.push_back(make_traj_sample(track, history, true));
    }
    if (samples.empty()) throw runtime_error_("train_trajectory_forecaster: no usable tracks");

    std::set<std::string> trainable;
    for (const auto& [k, v] : m.params.params) trainable.insert(k);
    AdamState<float> adam;
    const int n = static_cast<int>(samples.size());
    const int B = std::min(32, n);
    const long steps_per_epoch = (n + B - 1) / B;
    const long total_steps = steps_per_epoch * epochs;
    long step = 0;
    for (int epoch = 1; epoch <= epochs; ++epoch) {
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng srng = rng_stream(seed, {Rng::key("traj-shuffle"), static_cast<uint64_t>(epoch)});
        srng.shuffle(order);
        for (long s = 0; s < steps_per_epoch; ++s) {
            Tape<float> tape;
            const auto pn = model::register_params(tape, m.params, trainable);
            std::vector<int> losses;
            for (long bidx = s * B; bidx < std::min<long>((s + 1) * B, n); ++bidx) {
                const auto& sample = samples[order[bidx]];
                const int out = traj_lstm_forward(tape, pn, m.hidden, sample.inputs);
                Tensor<float> target({1, 8}, {sample.target.begin(), sample.target.end()});
                const int diff = tape.sub(out, tape.leaf(std::move(target), false));
                losses.push_back(tape.mean_all(tape.mul(diff, diff)));
            }
            const int loss_id = tape.mean_all(tape.concat_rows(losses));
            auto grads = tape.backward(loss_id);
            std::map<std::string, Tensor<float>> gmap;
            for (const auto& name : trainable) gmap[name] = tape.grad_of(grads, pn.at(name));
            adam_step(m.params, gmap, adam, cosine_lr(step, total_steps, lr0));
            ++step;
        }
    }
    return m;
}

std::array<data::VortexCenters, 2> trajectory_forecast(
    const TrajForecaster& m, const std::vector<data::VortexCenters>& history_centers) {
    if (static_cast<int>(history_centers.size()) != m.history)
        throw std::invalid_argument("trajectory_forecast: history length mismatch");
    data::Vec2 mu;
    for (const auto& c : history_centers) {
        mu.y += c.port.y + c.star.y;
        mu.z += c.port.z + c.star.z;
    }
    mu.y /= 2.0 * history_centers.size();
    mu.z /= 2.0 * history_centers.size();
    std::vector<data::VortexCenters> track = history_centers;
    const auto sample = make_traj_sample(track, m.history, false);
    Tape<float> tape;
    const auto pn = model::register_params(tape, m.params, {});
    const int out = traj_lstm_forward(tape, pn, m.hidden, sample.inputs);
    const auto& o = tape.val(out);
    std::array<data::VortexCenters, 2> res;
    for (int k = 0; k < 2; ++k) {
        res[k].port = {o.data[k * 4 + 0] / kTrajScale + mu.y, o.data[k * 4 + 1] / kTrajScale + mu.z};
        res[k].star = {o.data[k * 4 + 2] / kTrajScale + mu.y, o.data[k * 4 + 3] / kTrajScale + mu.z};
    }
    return res;
}

} // namespace vortexlab::baselines

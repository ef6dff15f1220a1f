#include "vortexlab/wakesim.hpp"

#include <cmath>

#include "vortexlab/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace vortexlab::sim {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kMaxSubstep = 0.25; // seconds
constexpr double kGroundEffectAltitudeFactor = 1.5;

struct Vortex {
    double y, z, gamma;
};

// Lamb-Oseen tangential profile rotated perpendicular to the radius vector;
// counterclockwise for positive circulation. Finite at the core.
inline void add_vortex_velocity(double qy, double qz, const Vortex& v, double rc2, double& vy,
                                double& vz) {
    const double dy = qy - v.y;
    const double dz = qz - v.z;
    const double r2 = dy * dy + dz * dz;
    if (r2 < 1e-12) return;
    const double factor = v.gamma / (2.0 * kPi * r2) * (1.0 - std::exp(-r2 / rc2));
    vy += factor * -dz;
    vz += factor * dy;
}
} // namespace

void ScanGeometry::validate() const {
    if (elevations.empty() || ranges.empty())
        throw config_error("scan geometry: empty elevation or range grid");
    for (size_t i = 1; i < elevations.size(); ++i)
        if (elevations[i] <= elevations[i - 1])
            throw config_error("scan geometry: elevations must be strictly increasing");
    for (size_t i = 0; i < ranges.size(); ++i) {
        if (ranges[i] <= 0) throw config_error("scan geometry: ranges must be > 0");
        if (i > 0 && ranges[i] <= ranges[i - 1])
            throw config_error("scan geometry: ranges must be strictly increasing");
    }
}

ScanGeometry ScanGeometry::regular(double phi_min, double phi_max, int n_phi, double r_min,
                                   double r_max, int n_r, double y_origin, double z_origin) {
    ScanGeometry g;
    g.y_origin = y_origin;
    g.z_origin = z_origin;
    for (int i = 0; i < n_phi; ++i)
        g.elevations.push_back(phi_min + (phi_max - phi_min) * i / (n_phi - 1));
    for (int i = 0; i < n_r; ++i) g.ranges.push_back(r_min + (r_max - r_min) * i / (n_r - 1));
    g.validate();
    return g;
}

CatalogConfig CatalogConfig::default_catalog() {
    CatalogConfig c;
    c.classes = {
        {"light", 24.0, 150.0},
        {"medium", 34.0, 260.0},
        {"heavy", 48.0, 420.0},
        {"super", 64.0, 560.0},
    };
    return c;
}

json CatalogConfig::to_json() const {
    json j;
    json cls = json::array();
    for (const auto& c : classes)
        cls.push_back({{"name", c.name}, {"wingspan", c.wingspan}, {"gamma0", c.gamma0}});
    j["classes"] = cls;
    j["jitter_frac"] = jitter_frac;
    j["z0_over_b_min"] = z0_over_b_min;
    j["z0_over_b_max"] = z0_over_b_max;
    j["y0_min"] = y0_min;
    j["y0_max"] = y0_max;
    j["crosswind_max"] = crosswind_max;
    j["decay_tau_min"] = decay_tau_min;
    j["decay_tau_max"] = decay_tau_max;
    j["noise_sigma_min"] = noise_sigma_min;
    j["noise_sigma_max"] = noise_sigma_max;
    j["core_radius_min"] = core_radius_min;
    j["core_radius_max"] = core_radius_max;
    j["dt_min"] = dt_min;
    j["dt_max"] = dt_max;
    return j;
}

CatalogConfig CatalogConfig::from_json(const json& j) {
    CatalogConfig c;
    c.classes.clear();
    for (const auto& e : j.at("classes"))
        c.classes.push_back({e.at("name").get<std::string>(), e.at("wingspan").get<double>(),
                             e.at("gamma0").get<double>()});
    c.jitter_frac = j.value("jitter_frac", c.jitter_frac);
    c.z0_over_b_min = j.value("z0_over_b_min", c.z0_over_b_min);
    c.z0_over_b_max = j.value("z0_over_b_max", c.z0_over_b_max);
    c.y0_min = j.value("y0_min", c.y0_min);
    c.y0_max = j.value("y0_max", c.y0_max);
    c.crosswind_max = j.value("crosswind_max", c.crosswind_max);
    c.decay_tau_min = j.value("decay_tau_min", c.decay_tau_min);
    c.decay_tau_max = j.value("decay_tau_max", c.decay_tau_max);
    c.noise_sigma_min = j.value("noise_sigma_min", c.noise_sigma_min);
    c.noise_sigma_max = j.value("noise_sigma_max", c.noise_sigma_max);
    c.core_radius_min = j.value("core_radius_min", c.core_radius_min);
    c.core_radius_max = j.value("core_radius_max", c.core_radius_max);
    c.dt_min = j.value("dt_min", c.dt_min);
    c.dt_max = j.value("dt_max", c.dt_max);
    return c;
}

void Scenario::validate() const {
    if (gamma0 <= 0) throw config_error("scenario: gamma0 must be > 0");
    if (wingspan <= 0) throw config_error("scenario: wingspan must be > 0");
    if (z0 <= 0) throw config_error("scenario: z0 must be > 0");
    if (!(frame_interval > 0 && frame_interval < 8.0))
        throw config_error("scenario: frame interval must be in (0, 8) seconds");
    if (decay_tau <= 0) throw config_error("scenario: decay_tau must be > 0");
    if (core_radius <= 0) throw config_error("scenario: core_radius must be > 0");
}

json Scenario::to_json() const {
    json j;
    j["class_id"] = class_id;
    j["class_name"] = class_name;
    j["wingspan"] = wingspan;
    j["gamma0"] = gamma0;
    j["z0"] = z0;
    j["y0"] = y0;
    j["crosswind"] = crosswind;
    j["decay_tau"] = decay_tau;
    j["noise_sigma"] = noise_sigma;
    j["core_radius"] = core_radius;
    j["aerosol_keep_prob"] = aerosol_keep_prob;
    j["frame_interval"] = frame_interval;
    j["n_frames"] = n_frames;
    return j;
}

Scenario Scenario::from_json(const json& j) {
    Scenario s;
    s.class_id = j.at("class_id").get<int>();
    s.class_name = j.at("class_name").get<std::string>();
    s.wingspan = j.at("wingspan").get<double>();
    s.gamma0 = j.at("gamma0").get<double>();
    s.z0 = j.at("z0").get<double>();
    s.y0 = j.at("y0").get<double>();
    s.crosswind = j.at("crosswind").get<double>();
    s.decay_tau = j.at("decay_tau").get<double>();
    s.noise_sigma = j.at("noise_sigma").get<double>();
    s.core_radius = j.at("core_radius").get<double>();
    s.aerosol_keep_prob = j.at("aerosol_keep_prob").get<double>();
    s.frame_interval = j.at("frame_interval").get<double>();
    s.n_frames = j.at("n_frames").get<int>();
    return s;
}

Scenario sample_scenario(Rng& rng, const CatalogConfig& catalog, int forced_class) {
    if (catalog.classes.empty()) throw config_error("sample_scenario: empty catalog");
    Scenario s;
    s.class_id = forced_class >= 0 ? forced_class % static_cast<int>(catalog.classes.size())
                                   : rng.uniform_int(0, static_cast<int>(catalog.classes.size()) - 1);
    const AircraftClass& ac = catalog.classes[s.class_id];
    s.class_name = ac.name;
    const double jf = catalog.jitter_frac;
    s.wingspan = ac.wingspan * rng.uniform(1.0 - jf, 1.0 + jf);
    s.gamma0 = ac.gamma0 * rng.uniform(1.0 - jf, 1.0 + jf);
    s.z0 = s.wingspan * rng.uniform(catalog.z0_over_b_min, catalog.z0_over_b_max);
    s.y0 = rng.uniform(catalog.y0_min, catalog.y0_max);
    s.crosswind = rng.uniform(-catalog.crosswind_max, catalog.crosswind_max);
    s.decay_tau = rng.uniform(catalog.decay_tau_min, catalog.decay_tau_max);
    s.noise_sigma = rng.uniform(catalog.noise_sigma_min, catalog.noise_sigma_max);
    s.core_radius = rng.uniform(catalog.core_radius_min, catalog.core_radius_max);
    s.frame_interval = rng.uniform(catalog.dt_min, catalog.dt_max);
    s.validate();
    return s;
}

VortexPairState initial_state(const Scenario& sc) {
    // elliptically loaded wing: initial separation pi/4 * wingspan
    const double b0 = kPi / 4.0 * sc.wingspan;
    VortexPairState st;
    st.y_port = sc.y0 + b0 / 2.0;
    st.y_star = sc.y0 - b0 / 2.0;
    st.z_port = st.z_star = sc.z0;
    st.gamma_port = sc.gamma0;
    st.gamma_star = -sc.gamma0;
    st.core_radius = sc.core_radius;
    st.age = 0.0;
    return st;
}

bool ground_effect_active(const VortexPairState& state, double wingspan) {
    return std::min(state.z_port, state.z_star) < kGroundEffectAltitudeFactor * wingspan;
}

std::array<double, 2> induced_velocity(double qy, double qz, const VortexPairState& state,
                                       bool ground_effect) {
    const double rc2 = state.core_radius * state.core_radius;
    double vy = 0.0, vz = 0.0;
    add_vortex_velocity(qy, qz, {state.y_port, state.z_port, state.gamma_port}, rc2, vy, vz);
    add_vortex_velocity(qy, qz, {state.y_star, state.z_star, state.gamma_star}, rc2, vy, vz);
    if (ground_effect) {
        // method of images: mirrored at z=0 with opposite circulation
        add_vortex_velocity(qy, qz, {state.y_port, -state.z_port, -state.gamma_port}, rc2, vy, vz);
        add_vortex_velocity(qy, qz, {state.y_star, -state.z_star, -state.gamma_star}, rc2, vy, vz);
    }
    return {vy, vz};
}

namespace {

// d(positions)/dt at local time t since the step start; circulation decays
// continuously inside the stages.
std::array<double, 4> state_derivative(const std::array<double, 4>& pos, double t_local,
                                       const VortexPairState& base, const Scenario& sc) {
    VortexPairState st = base;
    st.y_port = pos[0];
    st.z_port = pos[1];
    st.y_star = pos[2];
    st.z_star = pos[3];
    const double decay = std::exp(-t_local / sc.decay_tau);
    st.gamma_port = base.gamma_port * decay;
    st.gamma_star = base.gamma_star * decay;
    const bool ge = ground_effect_active(st, sc.wingspan);
    const auto vp = induced_velocity(st.y_port, st.z_port, st, ge);
    const auto vs = induced_velocity(st.y_star, st.z_star, st, ge);
    return {vp[0] + sc.crosswind, vp[1], vs[0] + sc.crosswind, vs[1]};
}

} // namespace

VortexPairState advance_vortex_state(const VortexPairState& state, double dt,
                                     const Scenario& sc) {
    if (dt <= 0) throw std::invalid_argument("advance_vortex_state: dt must be > 0");
    const int n_sub = static_cast<int>(std::ceil(dt / kMaxSubstep));
    const double h = dt / n_sub;
    VortexPairState st = state;
    for (int s = 0; s < n_sub; ++s) {
        const std::array<double, 4> x0{st.y_port, st.z_port, st.y_star, st.z_star};
        const auto k1 = state_derivative(x0, 0.0, st, sc);
        std::array<double, 4> x1;
        for (int i = 0; i < 4; ++i) x1[i] = x0[i] + 0.5 * h * k1[i];
        const auto k2 = state_derivative(x1, 0.5 * h, st, sc);
        std::array<double, 4> x2;
        for (int i = 0; i < 4; ++i) x2[i] = x0[i] + 0.5 * h * k2[i];
        const auto k3 = state_derivative(x2, 0.5 * h, st, sc);
        std::array<double, 4> x3;
        for (int i = 0; i < 4; ++i) x3[i] = x0[i] + h * k3[i];
        const auto k4 = state_derivative(x3, h, st, sc);
        st.y_port = x0[0] + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
        st.z_port = x0[1] + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
        st.y_star = x0[2] + h / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]);
        st.z_star = x0[3] + h / 6.0 * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3]);
        const double decay = std::exp(-h / sc.decay_tau);
        st.gamma_port *= decay;
        st.gamma_star *= decay;
        st.age += h;
    }
    return st;
}

data::PointCloudFrame render_scan(const VortexPairState& state, const ScanGeometry& geom,
                                  const Scenario& sc, Rng& rng, double timestamp) {
    geom.validate();
    const bool ge = ground_effect_active(state, sc.wingspan);
    for (int attempt = 0; attempt < 8; ++attempt) {
        const double keep =
            1.0 - (1.0 - sc.aerosol_keep_prob) / static_cast<double>(1 << attempt);
        data::PointCloudFrame frame;
        frame.timestamp = timestamp;
        frame.dropout_halved = attempt > 0;
        for (double phi : geom.elevations) {
            const double c = std::cos(phi), s = std::sin(phi);
            for (double r : geom.ranges) {
                const double py = geom.y_origin + r * c;
                const double pz = geom.z_origin + r * s;
                if (pz <= 0) continue;
                const auto v = induced_velocity(py, pz, state, ge);
                const double vr = v[0] * c + v[1] * s + sc.noise_sigma * rng.normal();
                if (rng.uniform() >= keep) continue;
                frame.points.push_back({py, pz, vr});
            }
        }
        if (!frame.points.empty()) return frame;
    }
    throw runtime_error_("render_scan: all points dropped repeatedly");
}

json SimConfig::to_json() const {
    json j;
    j["n_sequences"] = n_sequences;
    j["n_frames"] = n_frames;
    j["labeled"] = labeled;
    j["master_seed"] = master_seed;
    j["catalog"] = catalog.to_json();
    json g;
    g["y_origin"] = geometry.y_origin;
    g["z_origin"] = geometry.z_origin;
    g["elevations"] = geometry.elevations;
    g["ranges"] = geometry.ranges;
    j["geometry"] = g;
    return j;
}

SimConfig SimConfig::from_json(const json& j) {
    SimConfig c;
    c.n_sequences = j.at("n_sequences").get<int>();
    c.n_frames = j.at("n_frames").get<int>();
    c.labeled = j.at("labeled").get<bool>();
    c.master_seed = j.at("master_seed").get<uint64_t>();
    c.catalog = CatalogConfig::from_json(j.at("catalog"));
    const auto& g = j.at("geometry");
    c.geometry.y_origin = g.at("y_origin").get<double>();
    c.geometry.z_origin = g.at("z_origin").get<double>();
    c.geometry.elevations = g.at("elevations").get<std::vector<double>>();
    c.geometry.ranges = g.at("ranges").get<std::vector<double>>();
    c.geometry.validate();
    return c;
}

json generate_dataset(const SimConfig& cfg, const fs::path& out_dir) {
    if (cfg.n_frames < 5) throw config_error("generate_dataset: n_frames must be >= 5");
    fs::create_directories(out_dir);
    std::map<std::string, data::SequenceLabels> oracle;
    json ids = json::array();
    char name[32];
    for (int i = 0; i < cfg.n_sequences; ++i) {
        std::snprintf(name, sizeof(name), "seq_%05d", i);
        Rng scen_rng = rng_stream(cfg.master_seed, {Rng::key("scenario"), static_cast<uint64_t>(i)});
        Scenario sc = sample_scenario(scen_rng, cfg.catalog,
                                      i % static_cast<int>(cfg.catalog.classes.size()));
        sc.n_frames = cfg.n_frames;

        data::ScanSequence seq;
        seq.event_id = name;
        seq.class_id = sc.class_id;
        seq.centers.emplace();
        VortexPairState st = initial_state(sc);
        for (int k = 0; k < cfg.n_frames; ++k) {
            Rng frame_rng = rng_stream(cfg.master_seed, {Rng::key("render"),
                                                         static_cast<uint64_t>(i),
                                                         static_cast<uint64_t>(k)});
            seq.frames.push_back(
                render_scan(st, cfg.geometry, sc, frame_rng, k * sc.frame_interval));
            data::VortexCenters c;
            c.port = {st.y_port, st.z_port};
            c.star = {st.y_star, st.z_star};
            seq.centers->push_back(c);
            if (k + 1 < cfg.n_frames) st = advance_vortex_state(st, sc.frame_interval, sc);
        }

        data::write_sequence_dir(out_dir / name, seq, sc.to_json(), cfg.labeled);
        if (!cfg.labeled) {
            data::SequenceLabels lab;
            lab.class_id = sc.class_id;
            lab.centers = *seq.centers;
            lab.scenario = sc.to_json();
            oracle[name] = lab;
        }
        ids.push_back(name);
    }
    if (!cfg.labeled) data::write_oracle_labels(out_dir, oracle);
    json manifest;
    manifest["labeled"] = cfg.labeled;
    manifest["n_sequences"] = cfg.n_sequences;
    manifest["master_seed"] = cfg.master_seed;
    manifest["sim_config"] = cfg.to_json();
    manifest["sequence_ids"] = ids;
    data::write_dataset_manifest(out_dir, manifest);
    return manifest;
}

} // namespace vortexlab::sim

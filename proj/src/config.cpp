// SPDX-License-Identifier: Apache-2.0

#include "sc3/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "sc3/io.hpp"

namespace sc3::config {

using nlohmann::json;

namespace {

// --- value conversion ------------------------------------------------------------

template <class T>
void decode(const json& j, T& out) {
    out = j.get<T>();
}

void decode(const json& j, Vec2& out) {
    if (!j.is_array() || j.size() != 2) throw ConfigError("expected [x, y]");
    out = Vec2(j[0].get<double>(), j[1].get<double>());
}

void decode(const json& j, Vec3& out) {
    if (!j.is_array() || j.size() != 3) throw ConfigError("expected [x, y, z]");
    out = Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

void decode(const json& j, std::vector<waveform::Scheme>& out) {
    out.clear();
    for (const auto& e : j) out.push_back(waveform::parse_scheme(e.get<std::string>()));
}

template <class T>
json encode(const T& v) {
    return json(v);
}

json encode(const Vec2& v) { return json::array({v.x(), v.y()}); }
json encode(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json encode(const std::vector<waveform::Scheme>& v) {
    json out = json::array();
    for (auto s : v) out.push_back(waveform::scheme_name(s));
    return out;
}

// --- visitors ----------------------------------------------------------------------

class Reader {
public:
    Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    template <class T>
    void operator()(const char* key, T& field) {
        seen_.insert(key);
        const auto it = obj_.find(key);
        if (it == obj_.end()) return;
        try {
            decode(*it, field);
        } catch (const json::exception& e) {
            throw ConfigError(where(key) + ": " + e.what());
        } catch (const Error& e) {
            throw ConfigError(where(key) + ": " + e.what());
        }
    }

    template <class F>
    void nested(const char* key, F&& fn) {
        seen_.insert(key);
        const auto it = obj_.find(key);
        if (it == obj_.end()) return;
        Reader sub(*it, where(key));
        fn(sub);
        sub.finish();
    }

    void finish() const {
        for (const auto& [key, value] : obj_.items())
            if (!seen_.count(key)) throw ConfigError("unknown key " + where(key));
    }

private:
    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

class Writer {
public:
    explicit Writer(json& out) : out_(out) { out_ = json::object(); }

    template <class T>
    void operator()(const char* key, const T& field) {
        out_[key] = encode(field);
    }

    template <class F>
    void nested(const char* key, F&& fn) {
        Writer sub(out_[key]);
        fn(sub);
    }

private:
    json& out_;
};

// --- field lists -------------------------------------------------------------------

template <class V, class S>
void visit_scene(V& v, S& s) {
    v("seed", s.seed);
    v("width", s.bounds.width);
    v("depth", s.bounds.depth);
    v("n_buildings", s.params.n_buildings);
    v("n_users", s.params.n_users);
    v("demanded_bits", s.params.demanded_bits);
    v("min_height", s.params.min_height);
    v("max_height", s.params.max_height);
    v("min_side", s.params.min_side);
    v("max_side", s.params.max_side);
    v("building_gap", s.params.building_gap);
    v("user_clearance", s.params.user_clearance);
    v("edge_margin", s.params.edge_margin);
    v("max_attempts", s.params.max_attempts);
}

template <class V, class M>
void visit_modem(V& v, M& m) {
    v("n_subcarriers", m.n_subcarriers);
    v("subcarrier_spacing", m.subcarrier_spacing);
    v("cp_len", m.cp_len);
    v("first_subcarrier", m.first_subcarrier);
}

template <class V, class S>
void visit_modems(V& v, S& s) {
    v("carrier", s.carrier);
    v.nested("wideband", [&](auto& w) { visit_modem(w, s.wideband); });
    v.nested("narrowband", [&](auto& w) { visit_modem(w, s.narrowband); });
}

template <class V, class B>
void visit_ber(V& v, B& b) {
    v("schemes", b.schemes);
    v("snr_db", b.snr_db);
    v("speed", b.speed);
    v("min_frames", b.min_frames);
    v("min_bits", b.min_bits);
    v("ofdm_data_symbols", b.ofdm_data_symbols);
    v("af_pilot_len", b.af_pilot_len);
    v("af_pilot_alpha_max", b.af_pilot_alpha_max);
    v("afdm_alpha_max", b.afdm_alpha_max);
    v("afdm_guard", b.afdm_guard);
    v("afdm_blocks_per_frame", b.afdm_blocks_per_frame);
    v("detection_sigmas", b.detection_sigmas);
    v("altitude", b.altitude);
    v("min_ground_range", b.min_ground_range);
    v("max_ground_range", b.max_ground_range);
    v.nested("profile", [&](auto& w) {
        w("k_factor_db", b.profile.k_factor_db);
        w("n_nlos", b.profile.n_nlos);
        w("decay_samples", b.profile.decay_samples);
        w("max_delay_samples", b.profile.max_delay_samples);
        w("nlos_excess_db", b.profile.nlos_excess_db);
    });
}

template <class V, class S>
void visit_sar(V& v, S& s) {
    v("oversample", s.oversample);
    v("altitude", s.altitude);
    v("ground_range", s.ground_range);
    v("azimuth_resolution", s.azimuth_resolution);
    v("point_spacing_wavelengths", s.point_spacing_wavelengths);
    v("point_pixel", s.point_pixel);
    v("point_grid", s.point_grid);
    v("building_center", s.building_center);
    v("building_width", s.building_width);
    v("building_depth", s.building_depth);
    v("building_height", s.building_height);
    v("footprint_pixel", s.footprint_pixel);
    v("footprint_grid", s.footprint_grid);
    v("footprint_plane", s.footprint_plane);
    v("track_length", s.track_length);
    v("track_spacing_wavelengths", s.track_spacing_wavelengths);
    v("scatterer_spacing", s.scatterer_spacing);
    v("scatterer_jitter", s.scatterer_jitter);
    v("scatterer_seed", s.scatterer_seed);
    v("threshold", s.threshold);
    v("dilation", s.dilation);
    v("smoothing", s.smoothing);
}

template <class V, class S>
void visit_compute(V& v, S& s) {
    v.nested("calibration", [&](auto& w) {
        auto& c = s.calibration;
        w("local_latency", c.local_latency);
        w("pando_latency", c.pando_latency);
        w("uav_frequency", c.uav_frequency);
        w("edge_frequency", c.edge_frequency);
        w("cloud_frequency", c.cloud_frequency);
        w("bandwidth", c.bandwidth);
        w("snr_db", c.snr_db);
        w("backhaul_rate", c.backhaul_rate);
        w("output_bits", c.output_bits);
        w("stage_fractions", c.stage_fractions);
        w("feature_fractions", c.feature_fractions);
        w("chunks", c.chunks);
    });
    v("edge_gcps", s.edge_gcps);
    v("bandwidths", s.bandwidths);
    v.nested("energy", [&](auto& w) {
        w("kappa", s.energy.kappa);
        w("uav_tx_power", s.energy.uav_tx_power);
    });
}

template <class V, class S>
void visit_control(V& v, S& s) {
    auto& e = s.env;
    v("time_limit", e.time_limit);
    v("speed", e.speed);
    v("collision_margin", e.collision_margin);
    v("start", e.start);
    v("layers", e.layers);
    v("cell", e.cell);
    v.nested("service", [&](auto& w) {
        w("tx_power", e.service.budget.tx_power);
        w("noise_figure_db", e.service.budget.noise_figure_db);
        w("antenna_gain_dbi", e.service.budget.antenna_gain_dbi);
        w("bandwidth", e.service.bandwidth);
        w("snr_min_db", e.service.snr_min_db);
        w("nlos_excess_db", e.service.nlos_excess_db);
        w("los_excess_db", e.service.los_excess_db);
        w("clutter", e.service.clutter);
        w("clutter_a", e.service.clutter_a);
        w("clutter_b", e.service.clutter_b);
    });
    v.nested("weights", [&](auto& w) {
        w("per_mbit", e.weights.per_mbit);
        w("per_second", e.weights.per_second);
        w("collision", e.weights.collision);
    });
    v.nested("q", [&](auto& w) {
        w("episodes", s.q.episodes);
        w("alpha", s.q.alpha);
        w("gamma", s.q.gamma);
        w("epsilon_start", s.q.epsilon_start);
        w("epsilon_end", s.q.epsilon_end);
        w("epsilon_decay_fraction", s.q.epsilon_decay_fraction);
        w("divergence_bound", s.q.divergence_bound);
        w("episode_time_limit", s.q.episode_time_limit);
        w("backward_replay", s.q.backward_replay);
        w("greedy_fraction", s.q.greedy_fraction);
    });
    v.nested("rrt", [&](auto& w) {
        w("step", s.rrt.step);
        w("goal_bias", s.rrt.goal_bias);
        w("max_nodes", s.rrt.max_nodes);
        w("z_min", s.rrt.z_min);
        w("z_max", s.rrt.z_max);
        w("hover_altitude", s.rrt.hover_altitude);
    });
    v.nested("aco", [&](auto& w) {
        w("ants", s.aco.ants);
        w("iterations", s.aco.iterations);
        w("alpha", s.aco.alpha);
        w("beta", s.aco.beta);
        w("rho", s.aco.rho);
        w("deposit", s.aco.deposit);
        w("cell", s.aco.cell);
        w("altitude", s.aco.altitude);
        w("connectivity", s.aco.connectivity);
    });
    v("n_seeds", s.n_seeds);
    v("map", s.map);
    v("map_cell", s.map_cell);
    v("map_margin", s.map_margin);
}

template <class V, class S>
void visit_closed_loop(V& v, S& s) {
    v("n_subcarriers", s.n_subcarriers);
    v("oversample", s.oversample);
    v("pixel", s.pixel);
    v("plane_height", s.plane_height);
    v("frames_per_look", s.frames_per_look);
    v("frame_spacing_wavelengths", s.frame_spacing_wavelengths);
    v("look_stride", s.look_stride);
    v("sensing_range", s.sensing_range);
    v("scatterer_spacing", s.scatterer_spacing);
    v("scatterer_jitter", s.scatterer_jitter);
    v("threshold", s.threshold);
    v("smoothing", s.smoothing);
    v("dilation", s.dilation);
    v("modes", s.modes);
}

const std::vector<std::string> kSections{"scene", "modems", "ber", "sar", "compute", "control", "closed_loop"};

template <class V, class C>
void visit_all(V& v, C& c) {
    v("seed", c.seed);
    v("tick", c.tick);
    v.nested("scene", [&](auto& w) { visit_scene(w, c.scene); });
    v.nested("modems", [&](auto& w) { visit_modems(w, c.modems); });
    v.nested("ber", [&](auto& w) { visit_ber(w, c.ber); });
    v.nested("sar", [&](auto& w) { visit_sar(w, c.sar); });
    v.nested("compute", [&](auto& w) { visit_compute(w, c.compute); });
    v.nested("control", [&](auto& w) { visit_control(w, c.control); });
    v.nested("closed_loop", [&](auto& w) { visit_closed_loop(w, c.closed_loop); });
}

void check(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

double symbol_duration(const waveform::ModemConfig& m) {
    return static_cast<double>(m.symbol_len()) / m.sample_rate();
}

}  // namespace

bool SimConfig::has(const std::string& section) const {
    return std::find(sections.begin(), sections.end(), section) != sections.end();
}

void SimConfig::require(const std::vector<std::string>& needed) const {
    for (const auto& s : needed)
        if (!has(s)) throw ConfigError("missing config section '" + s + "'");
}

SimConfig reference_config() {
    SimConfig cfg;
    cfg.sections = kSections;
    return cfg;
}

SimConfig from_json(const json& doc) {
    SimConfig cfg;
    Reader r(doc, "");
    visit_all(r, cfg);
    r.finish();
    for (const auto& s : kSections)
        if (doc.contains(s)) cfg.sections.push_back(s);
    validate(cfg);
    return cfg;
}

SimConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return from_json(doc);
}

json to_json(const SimConfig& cfg) {
    json out;
    Writer w(out);
    visit_all(w, cfg);
    // Only the sections the run was configured with.
    for (const auto& s : kSections)
        if (!cfg.has(s)) out.erase(s);
    return out;
}

void validate(const SimConfig& cfg) {
    check(cfg.tick > 0.0, "tick must be positive");
    const auto& wb = cfg.modems.wideband;
    const auto& nb = cfg.modems.narrowband;
    for (const auto* m : {&wb, &nb}) {
        check(m->n_subcarriers > 0 && m->subcarrier_spacing > 0.0, "modem needs subcarriers and a positive spacing");
        check(cfg.tick >= symbol_duration(*m), "tick is shorter than one modem frame");
    }
    check(wb.subcarrier_spacing == nb.subcarrier_spacing, "wideband and narrowband must share the subcarrier grid");
    const bool disjoint = wb.first_subcarrier + wb.n_subcarriers <= nb.first_subcarrier ||
                          nb.first_subcarrier + nb.n_subcarriers <= wb.first_subcarrier;
    check(disjoint, "wideband and narrowband subcarrier allocations overlap");
    check(cfg.modems.carrier > 0.0, "carrier must be positive");

    check(cfg.scene.bounds.width > 0.0 && cfg.scene.bounds.depth > 0.0, "scene bounds must be positive");
    check(cfg.scene.params.demanded_bits >= 0.0, "demanded_bits must be nonnegative");

    check(!cfg.ber.schemes.empty() && !cfg.ber.snr_db.empty(), "ber needs schemes and an SNR grid");
    check(cfg.ber.min_bits > 0 && cfg.ber.speed >= 0.0, "ber needs min_bits > 0 and speed >= 0");

    const auto& s = cfg.sar;
    check(s.oversample >= 1 && s.point_grid > 0 && s.footprint_grid > 0, "sar grid sizes must be positive");
    check(s.point_pixel > 0.0 && s.footprint_pixel > 0.0, "sar pixels must be positive");
    check(s.azimuth_resolution > 0.0 && s.track_length > 0.0, "sar aperture settings must be positive");
    check(s.point_spacing_wavelengths > 0.0 && s.track_spacing_wavelengths > 0.0, "sar track spacing must be positive");
    check(s.threshold > 0.0 && s.scatterer_spacing > 0.0, "sar threshold and scatterer spacing must be positive");

    check(!cfg.compute.edge_gcps.empty() && !cfg.compute.bandwidths.empty(), "compute sweep axes must be nonempty");
    for (double g : cfg.compute.edge_gcps) check(g > 0.0, "edge_gcps must be positive");
    for (double b : cfg.compute.bandwidths) check(b > 0.0, "bandwidths must be positive");

    const auto& c = cfg.control;
    check(c.n_seeds >= 1, "control.n_seeds must be at least 1");
    check(c.map == "ground_truth" || c.map == "sar", "control.map must be 'ground_truth' or 'sar'");
    check(!c.env.layers.empty() && std::is_sorted(c.env.layers.begin(), c.env.layers.end()),
          "control.layers must be nonempty and ascending");
    check(c.env.speed > 0.0 && c.env.cell > 0.0 && c.env.time_limit > 0.0, "control speed, cell, time_limit must be positive");
    check(c.q.episodes > 0 && c.q.alpha > 0.0 && c.q.alpha <= 1.0 && c.q.gamma > 0.0 && c.q.gamma <= 1.0,
          "control.q needs episodes > 0, alpha and gamma in (0, 1]");
    check(c.map_cell > 0.0 && c.map_margin >= 0.0, "control map cell must be positive");

    const auto& l = cfg.closed_loop;
    check(l.n_subcarriers > 0 && l.n_subcarriers <= wb.n_subcarriers,
          "closed_loop.n_subcarriers must fit inside the wideband allocation");
    check(l.frames_per_look >= 2 && l.look_stride >= 1, "closed_loop needs frames_per_look >= 2, look_stride >= 1");
    check(l.pixel > 0.0 && l.sensing_range > 0.0 && l.scatterer_spacing > 0.0, "closed_loop sizes must be positive");
    check(l.threshold > 0.0 && l.threshold <= 1.0, "closed_loop.threshold must be in (0, 1]");
    check(!l.modes.empty(), "closed_loop.modes must be nonempty");
    for (const auto& m : l.modes)
        check(m == "edge" || m == "local" || m == "pando" || m == "relay",
              "closed_loop mode '" + m + "' is not one of edge, local, pando, relay");
    // The frames of one look must fit in one tick of flight.
    const double look_span = static_cast<double>(l.frames_per_look - 1) * l.frame_spacing_wavelengths *
                             kSpeedOfLight / cfg.modems.carrier;
    check(look_span <= c.env.speed * cfg.tick, "closed_loop look aperture exceeds one tick of flight");
}

std::string config_hash(const SimConfig& cfg) { return io::hex64(io::fnv1a(to_json(cfg).dump())); }

waveform::BerConfig ber_config(const SimConfig& cfg) {
    waveform::BerConfig b = cfg.ber;
    b.modem = cfg.modems.narrowband;
    b.carrier = cfg.modems.carrier;
    b.seed = cfg.seed;
    return b;
}

control::EnvConfig env_config(const SimConfig& cfg) {
    control::EnvConfig e = cfg.control.env;
    e.dt = cfg.tick;
    e.service.budget.carrier = cfg.modems.carrier;
    return e;
}

scene::Scene reference_scene(const SimConfig& cfg) {
    return scene::generate_scene(cfg.scene.seed, cfg.scene.params, cfg.scene.bounds);
}

}  // namespace sc3::config

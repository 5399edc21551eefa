// SPDX-License-Identifier: Apache-2.0

#include "sc3/loop.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "sc3/io.hpp"
#include "sc3/parallel.hpp"
#include "sc3/waveform.hpp"

namespace sc3::loop {

namespace fs = std::filesystem;
using nlohmann::json;

double median(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace {

struct Outputs {
    fs::path dir;
    std::vector<std::string> files;

    explicit Outputs(const RunOptions& opts) : dir(opts.out_dir) {
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());
    }

    fs::path add(const std::string& name) {
        files.push_back(name);
        return dir / name;
    }
};

ExperimentReport finish(const std::string& name, Outputs& out, json summary, const config::SimConfig& cfg,
                        const RunOptions& opts) {
    ExperimentReport r;
    r.experiment = name;
    r.files = out.files;
    r.summary = std::move(summary);
    r.config_hash = config::config_hash(cfg);
    r.seed = cfg.seed;
    write_manifest(r, cfg, opts);
    r.files.push_back("manifest.json");
    return r;
}

double map_ceiling(const config::SimConfig& cfg, const scene::Scene& scene) {
    // The height limit of the built area is taken as known; only footprints are sensed.
    return scene.max_building_height() + cfg.control.map_margin;
}

scene::OccupancyGrid empty_grid(const config::SimConfig& cfg, const scene::Scene& scene) {
    const double px = cfg.closed_loop.pixel;
    return scene::OccupancyGrid(Vec2::Zero(), px, static_cast<std::size_t>(std::ceil(scene.bounds.width / px)),
                                static_cast<std::size_t>(std::ceil(scene.bounds.depth / px)));
}

}  // namespace

// --- frame plan ----------------------------------------------------------------------

std::vector<Allocation> frame_plan(const config::SimConfig& cfg) {
    const auto& wb = cfg.modems.wideband;
    const auto& nb = cfg.modems.narrowband;
    std::vector<Allocation> plan{
        {"sensing", wb.first_subcarrier, wb.n_subcarriers},
        {"imaging", wb.first_subcarrier + (wb.n_subcarriers - cfg.closed_loop.n_subcarriers) / 2,
         cfg.closed_loop.n_subcarriers},
        {"downlink", nb.first_subcarrier, nb.n_subcarriers},
    };
    const auto& s = plan[0];
    const auto& d = plan[2];
    if (!(s.first + s.count <= d.first || d.first + d.count <= s.first))
        throw ConfigError("frame plan: sensing and downlink subcarriers overlap");
    return plan;
}

// --- imaging -------------------------------------------------------------------------

LookImager::LookImager(const scene::Scene& scene, const config::SimConfig& cfg, std::uint64_t seed)
    : scene_(scene), cl_(cfg.closed_loop), rng_(make_stream(seed, 0x1007)) {
    sar_.n_subcarriers = cl_.n_subcarriers;
    sar_.subcarrier_spacing = cfg.modems.wideband.subcarrier_spacing;
    sar_.carrier = cfg.modems.carrier;
    sar_.oversample = cl_.oversample;
    const auto g = empty_grid(cfg, scene);
    sar_.grid.origin = g.origin;
    sar_.grid.pixel = g.cell;
    sar_.grid.nx = g.nx;
    sar_.grid.ny = g.ny;
    sar_.grid.height = cl_.plane_height;
    scatterers_ = scene::scatterers(scene, cl_.scatterer_spacing, cl_.scatterer_jitter, seed);
    acc_.assign(g.nx * g.ny, 0.0);
}

bool LookImager::look(const Vec3& a, const Vec3& b, std::size_t threads) {
    const Vec3 d = b - a;
    const double len = d.norm();
    const double spacing = sar_.wavelength() * cl_.frame_spacing_wavelengths;
    if (len < 1e-9 || len < spacing * static_cast<double>(cl_.frames_per_look - 1)) return false;
    std::vector<Vec3> frames;
    for (std::size_t k = 0; k < cl_.frames_per_look; ++k) frames.push_back(a + d / len * (spacing * static_cast<double>(k)));
    scene::ScattererSet near;
    for (const auto& s : scatterers_)
        if ((s.position - a).norm() < cl_.sensing_range) near.push_back(s);
    frames_ += frames.size();
    if (near.empty()) return false;
    sar::EchoOptions eo;
    eo.occluders = &scene_;
    eo.threads = threads;
    const auto buf = sar::synthesize_echoes(frames, near, sar_, rng_, eo);
    const auto img = sar::back_project(buf, sar_, threads);
    for (std::size_t i = 0; i < acc_.size(); ++i) acc_[i] += img.intensity[i] * img.peak_value;
    ++looks_;
    return true;
}

sar::SarImage LookImager::image() const {
    sar::SarImage img;
    img.grid = sar_.grid;
    img.intensity = acc_;
    const double peak = acc_.empty() ? 0.0 : *std::max_element(acc_.begin(), acc_.end());
    img.peak_value = peak;
    if (peak > 0.0)
        for (auto& v : img.intensity) v /= peak;
    img.peak_normalized = true;
    return img;
}

scene::OccupancyGrid LookImager::occupancy() const {
    return sar::image_to_occupancy(image(), cl_.threshold, cl_.dilation, cl_.smoothing);
}

// --- closed loop -----------------------------------------------------------------------

compute::LatencyBreakdown mode_latency(const config::SimConfig& cfg, const std::string& mode) {
    const auto p = compute::calibrate(cfg.compute.calibration);
    if (mode == "edge") return compute::choose_mode(p.task, p.nodes, p.links, p.chunks).predicted;
    if (mode == "local") return compute::latency_local(p.task, p.nodes.uav);
    if (mode == "pando") return compute::latency_pando(p.task, p.nodes, p.links);
    if (mode == "relay") return compute::latency_relay(p.task, p.nodes, p.links, p.chunks);
    throw ConfigError("unknown compute mode '" + mode + "'");
}

ClosedLoopRun closed_loop_episode(const config::SimConfig& cfg, const scene::Scene& scene,
                                  const control::Policy& policy, const std::string& mode, std::uint64_t seed,
                                  std::size_t threads, const ClosedLoopOptions& opts) {
    frame_plan(cfg);
    ClosedLoopRun run;
    run.mode = mode;
    run.latency = mode_latency(cfg, mode);
    const double latency = run.latency.total;
    const auto env = config::env_config(cfg);
    const double ceiling = map_ceiling(cfg, scene);
    const auto empty = control::map_from_occupancy(empty_grid(cfg, scene), ceiling, scene.bounds);
    const auto truth = control::ground_truth_map(scene, cfg.control.map_cell, cfg.control.map_margin);
    LookImager imager(scene, cfg, seed);

    std::size_t in_use = 0;
    double in_use_ready = 0.0;
    std::size_t tick = 0;

    control::RolloutOptions ro;
    ro.command_latency = latency;
    ro.map_at = [&](double t) -> const control::KnownMap* {
        if (!opts.sensing) return &truth;
        const MapVersion* best = nullptr;
        for (const auto& v : run.versions)
            if (v.ready <= t + 1e-9) best = &v;
        in_use = best ? best->version : 0;
        in_use_ready = best ? best->ready : 0.0;
        return best ? &best->map : &empty;
    };
    ro.on_tick = [&](const control::StepOutcome& o) {
        TickRecord r;
        r.t = o.next.elapsed;
        r.position = o.next.position;
        r.velocity = o.next.velocity;
        r.served.assign(scene.users.size(), 0.0);
        if (o.service.user) r.served[*o.service.user] = o.service.bits;
        const Vec3 from = o.next.position - o.next.velocity * env.dt;
        if (opts.sensing && !o.collision && tick % cfg.closed_loop.look_stride == 0 &&
            imager.look(from, o.next.position, threads)) {
            MapVersion v;
            v.version = run.versions.size() + 1;
            v.captured = r.t;
            v.ready = r.t + latency;
            v.looks = imager.looks();
            v.map = control::map_from_occupancy(imager.occupancy(), ceiling, scene.bounds);
            run.versions.push_back(std::move(v));
        }
        ++tick;
        r.frames = imager.frames();
        r.map_version = in_use;
        r.map_ready = in_use_ready;
        r.control_latency = latency;
        run.ticks.push_back(std::move(r));
    };
    run.result = control::evaluate(policy, scene, opts.sensing ? empty : truth, env, ro);
    run.image = imager.image();
    run.occupancy = imager.occupancy();
    const auto& g = run.image.grid;
    run.map_iou = scene::iou(run.occupancy, scene::rasterize_footprints(scene, g.origin, g.pixel, g.nx, g.ny));
    return run;
}

control::KnownMap survey_map(const config::SimConfig& cfg, const scene::Scene& scene, std::uint64_t seed,
                             std::size_t threads) {
    const auto env = config::env_config(cfg);
    const double z = env.layers.back();
    const double lane = cfg.closed_loop.sensing_range * 2.0 / 3.0;
    const double margin = std::min(cfg.scene.params.edge_margin, 0.5 * scene.bounds.width);
    std::vector<Vec3> corners;
    bool forward = true;
    for (double y = 0.5 * lane; y < scene.bounds.depth; y += lane) {
        const double x0 = forward ? margin : scene.bounds.width - margin;
        const double x1 = forward ? scene.bounds.width - margin : margin;
        corners.emplace_back(x0, y, z);
        corners.emplace_back(x1, y, z);
        forward = !forward;
    }
    LookImager imager(scene, cfg, seed);
    const double step = env.speed * env.dt;
    std::size_t tick = 0;
    for (std::size_t i = 0; i + 1 < corners.size(); ++i) {
        const Vec3 d = corners[i + 1] - corners[i];
        const double len = d.norm();
        for (double s = 0.0; s + step <= len + 1e-9; s += step, ++tick) {
            if (tick % cfg.closed_loop.look_stride) continue;
            const Vec3 a = corners[i] + d / len * s;
            imager.look(a, a + d / len * step, threads);
        }
    }
    return control::map_from_occupancy(imager.occupancy(), map_ceiling(cfg, scene), scene.bounds);
}

control::KnownMap mission_map(const config::SimConfig& cfg, const scene::Scene& scene, std::size_t threads) {
    if (cfg.control.map == "sar") return survey_map(cfg, scene, cfg.seed, threads);
    return control::ground_truth_map(scene, cfg.control.map_cell, cfg.control.map_margin);
}

// --- experiments -------------------------------------------------------------------------

ExperimentReport run_ber(const config::SimConfig& cfg, const RunOptions& opts) {
    cfg.require({"modems", "ber"});
    const auto bc = config::ber_config(cfg);
    const auto rows = waveform::ber_experiment(bc, opts.threads);
    Outputs out(opts);
    io::CsvWriter csv(out.add("ber.csv"),
                      {"scheme", "snr_db", "speed", "frames", "bits", "bit_errors", "dropped_frames", "ber"});
    std::map<std::pair<waveform::Scheme, double>, double> ber;
    for (const auto& r : rows) {
        csv.cell(waveform::scheme_name(r.scheme)).cell(r.snr_db).cell(r.speed).cell(r.frames).cell(r.bits);
        csv.cell(r.bit_errors).cell(r.dropped_frames).cell(r.ber());
        csv.end_row();
        ber[{r.scheme, r.snr_db}] = r.ber();
    }
    json summary{{"rows", rows.size()}, {"speed", bc.speed}, {"carrier", bc.carrier}};
    json points = json::array();
    for (double snr : bc.snr_db) {
        json p{{"snr_db", snr}};
        for (auto s : bc.schemes) p[waveform::scheme_name(s)] = ber[{s, snr}];
        points.push_back(p);
    }
    summary["points"] = points;
    return finish("ber", out, summary, cfg, opts);
}

ExperimentReport run_latency(const config::SimConfig& cfg, const RunOptions& opts) {
    cfg.require({"compute"});
    const auto& cs = cfg.compute;
    const auto base = compute::calibrate(cs.calibration);
    const auto rows = compute::latency_sweep(base, cs.edge_gcps, cs.bandwidths);
    Outputs out(opts);
    {
        io::CsvWriter csv(out.add("latency_sweep.csv"),
                          {"mode", "edge_gcps", "bandwidth_hz", "upload", "compute", "download", "total"});
        for (const auto& r : rows) {
            csv.cell(compute::mode_name(r.mode)).cell(r.edge_gcps).cell(r.bandwidth_hz);
            csv.cell(r.latency.upload).cell(r.latency.compute).cell(r.latency.download).cell(r.latency.total);
            csv.end_row();
        }
    }
    auto at = [&](double gcps, double bw) {
        auto p = base;
        p.nodes.edge.frequency = gcps * 1e9;
        p.links.bandwidth = bw;
        return p;
    };
    const auto ref = at(cs.calibration.edge_frequency / 1e9, cs.calibration.bandwidth);
    const auto low = at(5.0, 1.92e6);
    const double local = compute::latency_local(base.task, base.nodes.uav).total;
    const double pando_ref = compute::latency_pando(ref.task, ref.nodes, ref.links).total;
    const double relay_ref = compute::latency_relay(ref.task, ref.nodes, ref.links, ref.chunks).total;
    const double pando_low = compute::latency_pando(low.task, low.nodes, low.links).total;
    const double relay_low = compute::latency_relay(low.task, low.nodes, low.links, low.chunks).total;
    const double reduction = 100.0 * (local - pando_ref) / local;
    const double gap = 100.0 * std::abs(relay_ref - pando_ref) / pando_ref;
    const auto choice = compute::choose_mode(ref.task, ref.nodes, ref.links, ref.chunks);
    {
        io::CsvWriter csv(out.add("latency_anchors.csv"), {"metric", "value"});
        const std::vector<std::pair<std::string, double>> metrics{
            {"local", local},
            {"pando_reference", pando_ref},
            {"relay_reference", relay_ref},
            {"reduction_percent", reduction},
            {"relay_gap_percent_reference", gap},
            {"pando_5gcps_1.92mhz", pando_low},
            {"relay_5gcps_1.92mhz", relay_low},
            {"task_input_bits", base.task.input_bits},
            {"task_total_cycles", base.task.total_cycles},
        };
        for (const auto& [k, v] : metrics) {
            csv.cell(k).cell(v);
            csv.end_row();
        }
    }
    {
        io::CsvWriter csv(out.add("energy.csv"),
                          {"mode", "uav_compute", "uav_transmit", "edge_compute", "cloud_compute", "uav_side", "total"});
        for (auto m : {compute::Mode::local, compute::Mode::pando, compute::Mode::relay}) {
            const auto e = compute::energy_estimate(ref.task, m, ref.nodes, ref.links, cs.energy, ref.chunks);
            csv.cell(compute::mode_name(m)).cell(e.uav_compute).cell(e.uav_transmit).cell(e.edge_compute);
            csv.cell(e.cloud_compute).cell(e.uav_side()).cell(e.total());
            csv.end_row();
        }
    }
    json summary{{"local", local},
                 {"pando_reference", pando_ref},
                 {"relay_reference", relay_ref},
                 {"reduction_percent", reduction},
                 {"relay_gap_percent_reference", gap},
                 {"pando_low", pando_low},
                 {"relay_low", relay_low},
                 {"chosen_mode_reference", compute::mode_name(choice.mode)},
                 {"sweep_rows", rows.size()}};
    return finish("latency", out, summary, cfg, opts);
}

ExperimentReport run_sar(const config::SimConfig& cfg, const RunOptions& opts) {
    cfg.require({"modems", "sar"});
    const auto& s = cfg.sar;
    sar::SarConfig sc;
    sc.n_subcarriers = cfg.modems.wideband.n_subcarriers;
    sc.subcarrier_spacing = cfg.modems.wideband.subcarrier_spacing;
    sc.carrier = cfg.modems.carrier;
    sc.oversample = s.oversample;
    Outputs out(opts);
    Rng rng = make_stream(cfg.seed, 0x5a4);

    // Point target, side-looking straight pass.
    const Vec3 target(0.0, s.ground_range, 0.0);
    const double slant = std::hypot(s.ground_range, s.altitude);
    const double half = 0.5 * s.point_pixel * static_cast<double>(s.point_grid);
    sc.grid = {Vec2(target.x() - half, target.y() - half), s.point_pixel, s.point_grid, s.point_grid, 0.0};
    const double aperture = sar::aperture_for_resolution(sc, slant, s.azimuth_resolution);
    const auto track = sar::straight_track(Vec3(-0.5 * aperture, 0.0, s.altitude), Vec3::UnitX(), aperture,
                                           sc.wavelength() * s.point_spacing_wavelengths);
    const scene::ScattererSet point{{target, 1.0, Vec3::Zero()}};
    sar::EchoOptions eo;
    eo.threads = opts.threads;
    const auto point_img = sar::back_project(sar::synthesize_echoes(track, point, sc, rng, eo), sc, opts.threads);
    const auto rep = sar::resolution_report(point_img, target);
    io::write_image(out.add("sar_point.pgm"), point_img);
    out.files.push_back("sar_point.pgm.json");
    const double theory = kSpeedOfLight / (2.0 * sc.bandwidth());
    {
        io::CsvWriter csv(out.add("sar_resolution.csv"), {"metric", "value"});
        const std::vector<std::pair<std::string, double>> metrics{
            {"bandwidth_hz", sc.bandwidth()},
            {"range_resolution_theory", theory},
            {"range_width", rep.range_width},
            {"azimuth_width", rep.azimuth_width},
            {"azimuth_target", s.azimuth_resolution},
            {"aperture_length", aperture},
            {"slant_range", slant},
            {"track_positions", static_cast<double>(track.size())},
            {"peak_error", rep.peak_error},
            {"range_asymmetry", rep.range_asymmetry},
        };
        for (const auto& [k, v] : metrics) {
            csv.cell(k).cell(v);
            csv.end_row();
        }
    }

    // Single building seen from a straight pass.
    scene::Scene bld;
    bld.bounds = {200.0, 200.0};
    bld.buildings.push_back({s.building_center, s.building_width, s.building_depth, s.building_height});
    const double fhalf = 0.5 * s.footprint_pixel * static_cast<double>(s.footprint_grid);
    sc.grid = {s.building_center - Vec2(fhalf, fhalf), s.footprint_pixel, s.footprint_grid, s.footprint_grid,
               s.footprint_plane};
    const auto ftrack = sar::straight_track(Vec3(-0.5 * s.track_length, 0.0, s.altitude), Vec3::UnitX(),
                                            s.track_length, sc.wavelength() * s.track_spacing_wavelengths);
    const auto scat = scene::scatterers(bld, s.scatterer_spacing, s.scatterer_jitter, s.scatterer_seed);
    eo.occluders = &bld;
    const auto fimg = sar::back_project(sar::synthesize_echoes(ftrack, scat, sc, rng, eo), sc, opts.threads);
    const auto occ = sar::image_to_occupancy(fimg, s.threshold, s.dilation, s.smoothing);
    const auto truth = sar::footprint_on_grid(bld, sc.grid);
    const double iou = scene::iou(occ, truth);
    io::write_image(out.add("sar_footprint.pgm"), fimg);
    out.files.push_back("sar_footprint.pgm.json");
    io::write_occupancy(out.add("sar_footprint_occupancy.pgm"), occ);
    out.files.push_back("sar_footprint_occupancy.pgm.json");
    io::write_occupancy(out.add("sar_footprint_truth.pgm"), truth);
    out.files.push_back("sar_footprint_truth.pgm.json");
    {
        io::CsvWriter csv(out.add("sar_footprint.csv"),
                          {"threshold", "dilation", "smoothing", "iou", "occupied_cells", "truth_cells"});
        csv.cell(s.threshold).cell(s.dilation).cell(s.smoothing).cell(iou).cell(occ.count()).cell(truth.count());
        csv.end_row();
    }
    json summary{{"range_width", rep.range_width},       {"azimuth_width", rep.azimuth_width},
                 {"range_resolution_theory", theory},    {"aperture_length", aperture},
                 {"peak_error", rep.peak_error},         {"footprint_iou", iou},
                 {"footprint_threshold", s.threshold}};
    return finish("sar", out, summary, cfg, opts);
}

namespace {

void write_trajectory(const fs::path& path, const control::PlannerResult& r) {
    io::CsvWriter csv(path, {"t", "x", "y", "z", "served_total"});
    for (const auto& w : r.trajectory) {
        csv.cell(w.t).cell(w.position.x()).cell(w.position.y()).cell(w.position.z()).cell(w.served_total);
        csv.end_row();
    }
}

// Highest altitude reached within the first third of the waypoints.
double early_altitude(const control::PlannerResult& r) {
    const std::size_t n = (r.trajectory.size() + 2) / 3;
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) z = std::max(z, r.trajectory[i].position.z());
    return z;
}

double max_altitude(const control::PlannerResult& r) {
    double z = 0.0;
    for (const auto& w : r.trajectory) z = std::max(z, w.position.z());
    return z;
}

void write_scene(Outputs& out, const scene::Scene& sc) {
    {
        io::CsvWriter csv(out.add("scene_buildings.csv"), {"id", "cx", "cy", "width", "depth", "height"});
        for (std::size_t i = 0; i < sc.buildings.size(); ++i) {
            const auto& b = sc.buildings[i];
            csv.cell(i).cell(b.center.x()).cell(b.center.y()).cell(b.width).cell(b.depth).cell(b.height);
            csv.end_row();
        }
    }
    io::CsvWriter csv(out.add("scene_users.csv"), {"id", "x", "y", "z", "demanded_bits"});
    for (std::size_t i = 0; i < sc.users.size(); ++i) {
        const auto& u = sc.users[i];
        csv.cell(i).cell(u.position.x()).cell(u.position.y()).cell(u.position.z()).cell(u.demanded_bits);
        csv.end_row();
    }
}

}  // namespace

ExperimentReport run_mission(const config::SimConfig& cfg, const RunOptions& opts) {
    cfg.require({"scene", "control"});
    const auto sc = config::reference_scene(cfg);
    const auto env = config::env_config(cfg);
    const auto map = mission_map(cfg, sc, opts.threads);
    const std::size_t n = cfg.control.n_seeds;

    struct SeedRun {
        std::vector<control::TrainingRecord> curve;
        control::PlannerResult rl, rrt, aco;
    };
    std::vector<SeedRun> runs(n);
    parallel_for(n, opts.threads, [&](std::size_t i) {
        const std::uint64_t seed = cfg.seed + i;
        auto tr = control::train_rl(sc, map, env, cfg.control.q, seed);
        runs[i].curve = std::move(tr.curve);
        runs[i].rl = control::evaluate(tr.policy, sc, map, env);
        runs[i].rrt = control::plan_rrt(sc, map, env, cfg.control.rrt, seed);
        runs[i].aco = control::plan_aco(sc, map, env, cfg.control.aco, seed);
    });

    Outputs out(opts);
    write_scene(out, sc);
    io::write_occupancy(out.add("mission_map.pgm"), map.grid);
    out.files.push_back("mission_map.pgm.json");
    const double median_height = sc.median_building_height();
    std::map<std::string, std::vector<double>> times;
    std::map<std::string, std::size_t> collisions;
    bool rl_ascends = true;
    {
        io::CsvWriter csv(out.add("mission.csv"),
                          {"seed", "planner", "completion_time", "completed", "collisions", "time_limited",
                           "infeasible", "bits_served", "max_altitude", "first_third_max_altitude"});
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint64_t seed = cfg.seed + i;
            const std::vector<std::pair<std::string, const control::PlannerResult*>> planners{
                {"rl", &runs[i].rl}, {"rrt", &runs[i].rrt}, {"aco", &runs[i].aco}};
            for (const auto& [name, r] : planners) {
                double bits = 0.0;
                for (double b : r->served) bits += b;
                csv.cell(static_cast<std::size_t>(seed)).cell(name).cell(r->completion_time);
                csv.cell(static_cast<int>(r->completed)).cell(r->collisions).cell(static_cast<int>(r->time_limited));
                csv.cell(static_cast<int>(r->infeasible)).cell(bits).cell(max_altitude(*r)).cell(early_altitude(*r));
                csv.end_row();
                times[name].push_back(r->completion_time);
                collisions[name] += r->collisions;
                write_trajectory(out.add("trajectory_" + name + "_seed" + std::to_string(seed) + ".csv"), *r);
            }
            rl_ascends = rl_ascends && early_altitude(runs[i].rl) > median_height;
            io::CsvWriter tc(out.add("training_seed" + std::to_string(seed) + ".csv"),
                             {"episode", "completion_time", "episode_return"});
            for (const auto& rec : runs[i].curve) {
                tc.cell(rec.episode).cell(rec.completion_time).cell(rec.episode_return);
                tc.end_row();
            }
        }
    }
    json summary{{"seeds", n},
                 {"map", cfg.control.map},
                 {"median_building_height", median_height},
                 {"rl_exceeds_median_height_in_first_third", rl_ascends}};
    for (const auto& name : {"rl", "rrt", "aco"}) {
        summary["median_" + std::string(name)] = median(times[name]);
        summary["collisions_" + std::string(name)] = collisions[name];
        summary["times_" + std::string(name)] = times[name];
    }
    summary["ordering_holds"] = median(times["rl"]) < median(times["rrt"]) && median(times["rrt"]) < median(times["aco"]);
    return finish("mission", out, summary, cfg, opts);
}

ExperimentReport run_closed_loop(const config::SimConfig& cfg, const RunOptions& opts) {
    cfg.require({"scene", "modems", "compute", "control", "closed_loop"});
    const auto plan = frame_plan(cfg);
    const auto sc = config::reference_scene(cfg);
    const auto env = config::env_config(cfg);
    const auto truth = control::ground_truth_map(sc, cfg.control.map_cell, cfg.control.map_margin);
    const std::size_t n = cfg.control.n_seeds;
    const auto& modes = cfg.closed_loop.modes;

    std::vector<std::vector<ClosedLoopRun>> runs(n);
    parallel_for(n, opts.threads, [&](std::size_t i) {
        const std::uint64_t seed = cfg.seed + i;
        const auto tr = control::train_rl(sc, truth, env, cfg.control.q, seed);
        for (const auto& m : modes) runs[i].push_back(closed_loop_episode(cfg, sc, tr.policy, m, seed, 1));
    });

    Outputs out(opts);
    {
        io::CsvWriter csv(out.add("frame_plan.csv"), {"purpose", "first_subcarrier", "count"});
        for (const auto& a : plan) {
            csv.cell(a.purpose).cell(a.first).cell(a.count);
            csv.end_row();
        }
    }
    std::map<std::string, std::vector<double>> times;
    std::size_t collisions = 0;
    bool causal = true;
    {
        io::CsvWriter csv(out.add("closed_loop.csv"),
                          {"seed", "mode", "compute_mode", "control_latency", "completion_time", "completed",
                           "collisions", "looks", "frames", "map_versions", "map_iou"});
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint64_t seed = cfg.seed + i;
            for (const auto& r : runs[i]) {
                const std::size_t looks = r.versions.empty() ? 0 : r.versions.back().looks;
                csv.cell(static_cast<std::size_t>(seed)).cell(r.mode).cell(compute::mode_name(r.latency.mode));
                csv.cell(r.latency.total).cell(r.result.completion_time).cell(static_cast<int>(r.result.completed));
                csv.cell(r.result.collisions).cell(looks).cell(r.ticks.empty() ? 0 : r.ticks.back().frames);
                csv.cell(r.versions.size()).cell(r.map_iou);
                csv.end_row();
                times[r.mode].push_back(r.result.completion_time);
                collisions += r.result.collisions;

                const std::string tag = "seed" + std::to_string(seed) + "_" + r.mode;
                std::vector<std::string> header{"t", "x", "y", "z", "vx", "vy", "vz"};
                for (std::size_t u = 0; u < sc.users.size(); ++u) header.push_back("served_gu" + std::to_string(u));
                for (const char* h : {"frames", "map_version", "map_ready", "control_latency"}) header.push_back(h);
                io::CsvWriter tc(out.add("ticks_" + tag + ".csv"), header);
                std::size_t last_version = 0;
                for (const auto& t : r.ticks) {
                    causal = causal && t.map_ready <= t.t + 1e-9 && t.map_version >= last_version;
                    last_version = t.map_version;
                    tc.cell(t.t).cell(t.position.x()).cell(t.position.y()).cell(t.position.z());
                    tc.cell(t.velocity.x()).cell(t.velocity.y()).cell(t.velocity.z());
                    for (double b : t.served) tc.cell(b);
                    tc.cell(t.frames).cell(t.map_version).cell(t.map_ready).cell(t.control_latency);
                    tc.end_row();
                }
                if (i == 0) {
                    io::write_image(out.add("map_image_" + tag + ".pgm"), r.image);
                    out.files.push_back("map_image_" + tag + ".pgm.json");
                    io::write_occupancy(out.add("map_occupancy_" + tag + ".pgm"), r.occupancy);
                    out.files.push_back("map_occupancy_" + tag + ".pgm.json");
                }
            }
        }
    }
    json summary{{"seeds", n}, {"collisions", collisions}, {"causal", causal}};
    for (const auto& m : modes) {
        summary["median_" + m] = median(times[m]);
        summary["times_" + m] = times[m];
        summary["latency_" + m] = mode_latency(cfg, m).total;
    }
    if (times.count("edge") && times.count("local"))
        summary["edge_not_slower_than_local"] = median(times["edge"]) <= median(times["local"]);
    return finish("closed-loop", out, summary, cfg, opts);
}

ExperimentReport run_experiment(const std::string& name, const config::SimConfig& cfg, const RunOptions& opts) {
    if (name == "ber") return run_ber(cfg, opts);
    if (name == "latency") return run_latency(cfg, opts);
    if (name == "sar") return run_sar(cfg, opts);
    if (name == "mission") return run_mission(cfg, opts);
    if (name == "closed-loop") return run_closed_loop(cfg, opts);
    throw InvalidArgument("unknown experiment '" + name + "'");
}

void write_manifest(const ExperimentReport& report, const config::SimConfig& cfg, const RunOptions& opts) {
    json files = json::array();
    for (const auto& f : report.files) files.push_back({{"path", f}, {"fnv1a", io::file_hash(opts.out_dir / f)}});
    json doc{{"experiment", report.experiment}, {"config_hash", report.config_hash}, {"seed", report.seed},
             {"config", config::to_json(cfg)},  {"files", files},                    {"summary", report.summary}};
    io::write_json(opts.out_dir / "manifest.json", doc);
}

}  // namespace sc3::loop

// SPDX-License-Identifier: Apache-2.0

#include "sc3/control.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <set>

namespace sc3::control {

namespace {

double horizontal_distance(const Vec3& a, const Vec3& b) { return (a.head<2>() - b.head<2>()).norm(); }

std::size_t clamp_index(double v, std::size_t n) {
    if (!(v > 0.0)) return 0;
    return std::min(static_cast<std::size_t>(v), n - 1);
}

}  // namespace

// --- environment ---------------------------------------------------------------

double ServiceModel::los_probability(const Vec3& uav, const Vec3& user) const {
    const double theta = std::atan2(uav.z() - user.z(), horizontal_distance(uav, user)) * 180.0 / kPi;
    return 1.0 / (1.0 + clutter_a * std::exp(-clutter_b * (theta - clutter_a)));
}

double ServiceModel::snr(const Vec3& uav, const Vec3& user, const scene::Scene& scene) const {
    const double d = std::max((uav - user).norm(), 1.0);
    if (!scene::is_los(uav, user, scene)) return channel::link_snr(d, false, budget, bandwidth, nlos_excess_db);
    const double p = clutter ? los_probability(uav, user) : 1.0;
    const double excess = p * los_excess_db + (1.0 - p) * nlos_excess_db;
    return channel::link_snr(d, true, budget, bandwidth, 0.0) / db_to_linear(excess);
}

double ServiceModel::rate(const Vec3& uav, const Vec3& user, const scene::Scene& scene) const {
    const double s = snr(uav, user, scene);
    if (s < db_to_linear(snr_min_db)) return 0.0;
    return channel::achievable_rate(s, bandwidth);
}

double MissionState::remaining_total() const { return std::accumulate(remaining.begin(), remaining.end(), 0.0); }

MissionState initial_state(const scene::Scene& scene, const EnvConfig& env) {
    MissionState s;
    s.position = env.start;
    for (const auto& u : scene.users) s.remaining.push_back(u.demanded_bits);
    return s;
}

std::vector<Action> action_set(double speed) {
    const double d = speed / std::sqrt(2.0);
    return {
        {Vec3(0, 0, 0), "hover"},    {Vec3(speed, 0, 0), "+x"},  {Vec3(-speed, 0, 0), "-x"},
        {Vec3(0, speed, 0), "+y"},   {Vec3(0, -speed, 0), "-y"}, {Vec3(d, d, 0), "+x+y"},
        {Vec3(d, -d, 0), "+x-y"},    {Vec3(-d, d, 0), "-x+y"},   {Vec3(-d, -d, 0), "-x-y"},
        {Vec3(0, 0, speed), "up"},   {Vec3(0, 0, -speed), "down"},
    };
}

ServiceResult serve_tick(const Vec3& position, std::vector<double>& remaining, const scene::Scene& scene,
                         const ServiceModel& service, double dt) {
    ServiceResult out;
    double best_bits = -1.0;
    double best_dist = 0.0;
    for (std::size_t i = 0; i < remaining.size(); ++i) {
        if (remaining[i] <= 0.0) continue;
        const Vec3& up = scene.users[i].position;
        const double r = service.rate(position, up, scene);
        if (r <= 0.0) continue;
        const double dist = (position - up).norm();
        if (remaining[i] > best_bits || (remaining[i] == best_bits && dist < best_dist)) {
            best_bits = remaining[i];
            best_dist = dist;
            out.user = i;
            out.rate = r;
        }
    }
    if (out.user) {
        double& rem = remaining[*out.user];
        out.bits = std::min(rem, out.rate * dt);
        rem -= out.bits;
        if (rem < 1e-6) rem = 0.0;
    }
    return out;
}

namespace {

bool path_collides(const std::vector<Vec3>& pts, const scene::Scene& scene, double margin) {
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const double len = (pts[i + 1] - pts[i]).norm();
        const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len)));
        for (std::size_t k = 1; k <= n; ++k) {
            const double t = static_cast<double>(k) / static_cast<double>(n);
            if (scene::collides(pts[i] + t * (pts[i + 1] - pts[i]), scene, margin)) return true;
        }
    }
    return false;
}

// One tick along a polyline that starts at s.position.
StepOutcome step_along(const MissionState& s, const std::vector<Vec3>& pts, const scene::Scene& scene,
                       const EnvConfig& env) {
    StepOutcome out;
    out.next = s;
    out.next.elapsed = s.elapsed + env.dt;
    out.next.position = pts.back();
    out.next.velocity = (pts.back() - s.position) / env.dt;
    out.reward = -env.weights.per_second * env.dt;
    if (path_collides(pts, scene, env.collision_margin)) {
        out.collision = true;
        out.terminal = true;
        out.next.collided = true;
        out.reward -= env.weights.collision;
        return out;
    }
    out.service = serve_tick(out.next.position, out.next.remaining, scene, env.service, env.dt);
    out.reward += env.weights.per_mbit * out.service.bits / 1e6;
    out.terminal = out.next.complete();
    return out;
}

}  // namespace

StepOutcome env_step(const MissionState& s, const Action& a, const scene::Scene& scene, const EnvConfig& env) {
    return step_along(s, {s.position, s.position + a.velocity * env.dt}, scene, env);
}

// --- known map -------------------------------------------------------------------

bool KnownMap::blocked(const Vec3& p) const {
    if (p.x() < 0.0 || p.y() < 0.0 || p.x() > bounds.width || p.y() > bounds.depth || p.z() < 0.0) return true;
    return p.z() < ceiling && grid.occupied(p.head<2>());
}

bool KnownMap::segment_free(const Vec3& a, const Vec3& b, double step) const {
    const double len = (b - a).norm();
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / step)));
    for (std::size_t k = 0; k <= n; ++k) {
        if (blocked(a + (static_cast<double>(k) / static_cast<double>(n)) * (b - a))) return false;
    }
    return true;
}

KnownMap ground_truth_map(const scene::Scene& scene, double cell, double margin) {
    if (!(cell > 0.0)) throw InvalidArgument("ground_truth_map: cell must be positive");
    const auto nx = static_cast<std::size_t>(std::ceil(scene.bounds.width / cell));
    const auto ny = static_cast<std::size_t>(std::ceil(scene.bounds.depth / cell));
    KnownMap m;
    // A point anywhere in a free cell is at least `margin` from every footprint.
    m.grid = scene::rasterize_footprints(scene, Vec2::Zero(), cell, nx, ny, margin + cell / std::sqrt(2.0));
    m.ceiling = scene.max_building_height() + margin;
    m.bounds = scene.bounds;
    return m;
}

KnownMap map_from_occupancy(const scene::OccupancyGrid& grid, double ceiling, const scene::Bounds& bounds) {
    KnownMap m;
    m.grid = grid;
    m.ceiling = ceiling;
    m.bounds = bounds;
    return m;
}

double path_length(const std::vector<Vec3>& path) {
    double len = 0.0;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) len += (path[i + 1] - path[i]).norm();
    return len;
}

// --- rollout bookkeeping -------------------------------------------------------

namespace {

struct Recorder {
    PlannerResult result;
    double served_total = 0.0;

    void start(const MissionState& s) { result.trajectory.push_back({s.elapsed, s.position, 0.0}); }
    void record(const StepOutcome& o) {
        served_total += o.service.bits;
        result.trajectory.push_back({o.next.elapsed, o.next.position, served_total});
        if (o.collision) ++result.collisions;
    }
    PlannerResult finish(const MissionState& s, const scene::Scene& scene, double limit) {
        result.served.resize(scene.users.size());
        for (std::size_t i = 0; i < scene.users.size(); ++i)
            result.served[i] = scene.users[i].demanded_bits - s.remaining[i];
        result.completed = s.complete() && !s.collided;
        result.time_limited = !result.completed && !s.collided && s.elapsed >= limit - 1e-9;
        result.completion_time = result.completed ? s.elapsed : limit;
        return std::move(result);
    }
};

}  // namespace

PlannerResult replay(const std::vector<Vec3>& positions, const scene::Scene& scene, const EnvConfig& env) {
    if (positions.empty()) throw InvalidArgument("replay: empty trajectory");
    EnvConfig e = env;
    e.start = positions.front();
    MissionState s = initial_state(scene, e);
    Recorder rec;
    rec.start(s);
    for (std::size_t i = 1; i < positions.size() && !s.complete() && !s.collided; ++i) {
        const auto o = step_along(s, {s.position, positions[i]}, scene, e);
        rec.record(o);
        s = o.next;
    }
    return rec.finish(s, scene, std::max(env.time_limit, s.elapsed));
}

// --- Q-learning ----------------------------------------------------------------

Policy::Policy(std::size_t nx, std::size_t ny, std::size_t layers, std::size_t users, std::size_t actions)
    : nx_(nx), ny_(ny), layers_(layers), users_(std::max<std::size_t>(users, 1)), actions_(actions),
      q_(nx * ny * layers * std::max<std::size_t>(users, 1) * actions, 0.0f), n_(q_.size(), 0) {}

std::size_t Policy::state_index(std::size_t cx, std::size_t cy, std::size_t layer, std::size_t target) const {
    return ((target * layers_ + layer) * ny_ + cy) * nx_ + cx;
}

namespace {

std::size_t greedy_action(const float* q, const std::vector<std::uint8_t>& mask, Rng* tie_rng) {
    float best = -std::numeric_limits<float>::infinity();
    std::size_t pick = 0;
    std::size_t ties = 0;
    for (std::size_t a = 0; a < mask.size(); ++a) {
        if (!mask[a]) continue;
        if (q[a] > best) {
            best = q[a];
            pick = a;
            ties = 1;
        } else if (q[a] == best && tie_rng) {
            ++ties;
            if (std::uniform_int_distribution<std::size_t>(0, ties - 1)(*tie_rng) == 0) pick = a;
        }
    }
    return pick;
}

float masked_max(const float* q, const std::vector<std::uint8_t>& mask) {
    float best = -std::numeric_limits<float>::infinity();
    for (std::size_t a = 0; a < mask.size(); ++a)
        if (mask[a]) best = std::max(best, q[a]);
    return best;
}

// The agent decides on a lattice: cell centres times altitude layers. A move
// takes it to a neighbouring cell centre or layer and is flown as ordinary
// ticks at full speed; hover holds position for one tick.
struct Agent {
    static constexpr std::size_t kMoves = 11;

    const scene::Scene& scene;
    const EnvConfig& env;
    std::size_t nx, ny;

    Agent(const scene::Scene& sc, const EnvConfig& e)
        : scene(sc), env(e), nx(static_cast<std::size_t>(std::ceil(sc.bounds.width / e.cell))),
          ny(static_cast<std::size_t>(std::ceil(sc.bounds.depth / e.cell))) {}

    std::size_t layer_of(double z) const {
        std::size_t best = 0;
        for (std::size_t i = 1; i < env.layers.size(); ++i)
            if (std::abs(env.layers[i] - z) < std::abs(env.layers[best] - z)) best = i;
        return best;
    }

    Vec3 lattice_point(const Vec3& p) const {
        const double c = env.cell;
        return {(std::floor(p.x() / c) + 0.5) * c, (std::floor(p.y() / c) + 0.5) * c, env.layers[layer_of(p.z())]};
    }

    // Nearest user with bits left, by horizontal distance.
    std::optional<std::size_t> target_of(const MissionState& s) const {
        std::optional<std::size_t> best;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < s.remaining.size(); ++i) {
            if (s.remaining[i] <= 0.0) continue;
            const double d = horizontal_distance(s.position, scene.users[i].position);
            if (d < bd) {
                bd = d;
                best = i;
            }
        }
        return best;
    }

    std::size_t state_of(const Policy& p, const MissionState& s) const {
        const auto t = target_of(s);
        return p.state_index(clamp_index(s.position.x() / env.cell, nx), clamp_index(s.position.y() / env.cell, ny),
                             layer_of(s.position.z()), t.value_or(0));
    }

    // Empty when the move leaves the layer stack.
    std::optional<Vec3> displacement(std::size_t a, const Vec3& from) const {
        static constexpr int kDx[kMoves] = {0, 1, -1, 0, 0, 1, 1, -1, -1, 0, 0};
        static constexpr int kDy[kMoves] = {0, 0, 0, 1, -1, 1, -1, 1, -1, 0, 0};
        if (a < 9) return Vec3(kDx[a] * env.cell, kDy[a] * env.cell, 0.0);
        const std::size_t l = layer_of(from.z());
        if (a == 9) {
            if (l + 1 >= env.layers.size()) return std::nullopt;
            return Vec3(0.0, 0.0, env.layers[l + 1] - from.z());
        }
        if (l == 0) return std::nullopt;
        return Vec3(0.0, 0.0, env.layers[l - 1] - from.z());
    }

    std::vector<std::uint8_t> mask(const KnownMap& map, const Vec3& from) const {
        std::vector<std::uint8_t> m(kMoves, 0);
        m[0] = 1;  // hovering is always an option
        for (std::size_t a = 1; a < kMoves; ++a) {
            const auto d = displacement(a, from);
            m[a] = d && map.segment_free(from, from + *d) ? 1 : 0;
        }
        return m;
    }

    // The deployed rule: greedy over moves tried in training, else head for the
    // target. `stuck` marks a state revisited with nothing served since the last
    // visit; greedy would only repeat the cycle, so it heads for the target too.
    std::size_t decide(const Policy& policy, const MissionState& s, const KnownMap& map, bool stuck = false) const {
        auto m = mask(map, s.position);
        const std::size_t si = state_of(policy, s);
        bool seen = false;
        for (std::size_t k = 0; k < m.size(); ++k) {
            if (m[k] && policy.visits(si)[k] == 0) m[k] = 0;
            seen = seen || m[k];
        }
        if (seen && !stuck) return greedy_action(policy.row(si), m, nullptr);
        std::size_t a = 0;
        if (const auto t = target_of(s)) {
            const auto full = mask(map, s.position);
            double best = horizontal_distance(s.position, scene.users[*t].position);
            for (std::size_t k = 1; k < kMoves; ++k) {
                if (!full[k]) continue;
                const double d = horizontal_distance(s.position + *displacement(k, s.position), scene.users[*t].position);
                if (d < best - 1e-9) {
                    best = d;
                    a = k;
                }
            }
            // Already overhead but out of range: descend.
            if (a == 0 && stuck && full[10]) a = 10;
        }
        return a;
    }

    struct MoveResult {
        MissionState next;
        double reward = 0.0;    // discounted over the move's ticks
        double discount = 1.0;  // gamma^ticks
        bool terminal = false;
    };

    // Flies move `a` after holding position for `wait` seconds. Every tick goes
    // through the environment and is reported to `on_tick`.
    template <class OnTick>
    MoveResult execute(const MissionState& s, std::size_t a, double wait, double gamma, double limit,
                       OnTick&& on_tick) const {
        const Vec3 disp = displacement(a, s.position).value_or(Vec3::Zero());
        const Vec3 goal = s.position + disp;
        double remaining = disp.norm();
        const Vec3 dir = remaining > 0.0 ? Vec3(disp / remaining) : Vec3::Zero();
        double hover = remaining > 0.0 ? 0.0 : env.dt;
        MoveResult r;
        r.next = s;
        while (r.next.elapsed < limit - 1e-9) {
            double budget = env.dt;
            Vec3 p = r.next.position;
            std::vector<Vec3> pts{p};
            const double held = std::min(wait, budget);
            wait -= held;
            budget -= held;
            if (budget > 1e-12 && remaining > 0.0) {
                const double step = std::min(budget * env.speed, remaining);
                remaining -= step;
                budget -= step / env.speed;
                p = remaining <= 1e-9 ? goal : Vec3(p + dir * step);
                if (remaining <= 1e-9) remaining = 0.0;
                pts.push_back(p);
            }
            if (budget > 1e-12 && hover > 0.0) hover -= std::min(hover, budget);
            if (pts.size() == 1) pts.push_back(p);
            const auto o = step_along(r.next, pts, scene, env);
            on_tick(o);
            r.reward += r.discount * o.reward;
            r.discount *= gamma;
            r.next = o.next;
            if (o.terminal) {
                r.terminal = true;
                break;
            }
            if (wait <= 1e-12 && remaining <= 0.0 && hover <= 1e-12) break;
        }
        return r;
    }
};

}  // namespace

TrainResult train_rl(const scene::Scene& scene, const KnownMap& map, const EnvConfig& env, const QConfig& cfg,
                     std::uint64_t seed) {
    if (env.layers.empty()) throw InvalidArgument("train_rl: no altitude layers");
    const Agent agent(scene, env);
    EnvConfig lattice_env = env;
    lattice_env.start = agent.lattice_point(env.start);
    if (map.blocked(lattice_env.start)) throw InvalidArgument("train_rl: start position is blocked");

    TrainResult out;
    out.policy = Policy(agent.nx, agent.ny, env.layers.size(), scene.users.size(), Agent::kMoves);
    out.policy.seed = seed;
    out.policy.episodes = cfg.episodes;
    out.policy.hyper = cfg;
    Policy& pol = out.policy;
    Rng rng = make_stream(seed, 0x71ea);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    auto update = [&](std::size_t state, std::size_t action, double target, std::size_t ep) {
        float& q = pol.row(state)[action];
        q += static_cast<float>(cfg.alpha * (target - q));
        if (!std::isfinite(q) || std::abs(q) > cfg.divergence_bound)
            throw DivergenceError("train_rl: Q-value diverged at episode " + std::to_string(ep));
    };
    struct Transition {
        std::size_t state, action;
        double reward, discount;
        std::size_t next;
        std::vector<std::uint8_t> next_mask;
        bool done;
    };
    std::vector<Transition> episode;

    const double decay_eps = std::max(1.0, cfg.epsilon_decay_fraction * static_cast<double>(cfg.episodes));
    const auto greedy_from = static_cast<std::size_t>(
        std::ceil((1.0 - cfg.greedy_fraction) * static_cast<double>(cfg.episodes)));

    for (std::size_t ep = 0; ep < cfg.episodes; ++ep) {
        const double frac = std::min(1.0, static_cast<double>(ep) / decay_eps);
        const double eps = cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;
        const bool greedy_phase = ep >= greedy_from;
        MissionState s = initial_state(scene, lattice_env);
        std::size_t si = agent.state_of(pol, s);
        auto m = agent.mask(map, s.position);
        double ret = 0.0;
        bool done = s.complete();
        std::set<std::size_t> since_progress;
        episode.clear();
        while (!done && s.elapsed < cfg.episode_time_limit - 1e-9) {
            std::size_t a;
            if (greedy_phase) {
                a = agent.decide(pol, s, map, !since_progress.insert(si).second);
            } else if (unif(rng) < eps) {
                std::vector<std::size_t> allowed;
                for (std::size_t k = 0; k < m.size(); ++k)
                    if (m[k]) allowed.push_back(k);
                a = allowed[std::uniform_int_distribution<std::size_t>(0, allowed.size() - 1)(rng)];
            } else {
                a = greedy_action(pol.row(si), m, &rng);
            }
            double undiscounted = 0.0;
            double bits = 0.0;
            const auto mv = agent.execute(s, a, 0.0, cfg.gamma, cfg.episode_time_limit, [&](const StepOutcome& o) {
                undiscounted += o.reward;
                bits += o.service.bits;
            });
            if (bits > 0.0) since_progress.clear();
            ret += undiscounted;
            done = mv.terminal;
            const std::size_t sn = agent.state_of(pol, mv.next);
            auto mn = agent.mask(map, mv.next.position);
            const double boot = done ? 0.0 : mv.discount * masked_max(pol.row(sn), mn);
            ++pol.visits(si)[a];
            update(si, a, mv.reward + boot, ep);
            if (cfg.backward_replay) episode.push_back({si, a, mv.reward, mv.discount, sn, mn, done});
            s = mv.next;
            si = sn;
            m = std::move(mn);
        }
        // Sweep the episode backwards so late rewards reach early states in one pass.
        for (auto it = episode.rbegin(); it != episode.rend(); ++it) {
            const double boot = it->done ? 0.0 : it->discount * masked_max(pol.row(it->next), it->next_mask);
            update(it->state, it->action, it->reward + boot, ep);
        }
        out.curve.push_back({ep, s.complete() && !s.collided ? s.elapsed : cfg.episode_time_limit, ret});
    }
    return out;
}

PlannerResult evaluate(const Policy& policy, const scene::Scene& scene, const KnownMap& map, const EnvConfig& env,
                       const RolloutOptions& opts) {
    if (opts.command_latency < 0.0) throw InvalidArgument("evaluate: negative latency");
    const Agent agent(scene, env);
    EnvConfig lattice_env = env;
    lattice_env.start = agent.lattice_point(env.start);
    MissionState s = initial_state(scene, lattice_env);
    Recorder rec;
    rec.start(s);
    std::set<std::size_t> since_progress;
    while (!s.complete() && !s.collided && s.elapsed < env.time_limit - 1e-9) {
        const KnownMap* live = opts.map_at ? opts.map_at(s.elapsed) : nullptr;
        const bool stuck = !since_progress.insert(agent.state_of(policy, s)).second;
        const std::size_t a = agent.decide(policy, s, live ? *live : map, stuck);
        double bits = 0.0;
        s = agent.execute(s, a, opts.command_latency, 1.0, env.time_limit,
                          [&](const StepOutcome& o) {
                              rec.record(o);
                              bits += o.service.bits;
                              if (opts.on_tick) opts.on_tick(o);
                          })
                .next;
        if (bits > 0.0) since_progress.clear();
    }
    return rec.finish(s, scene, env.time_limit);
}

// --- shared waypoint follower ----------------------------------------------------

namespace {

struct Follower {
    const scene::Scene& scene;
    const EnvConfig& env;
    MissionState s;
    Recorder rec;

    Follower(const scene::Scene& sc, const EnvConfig& e) : scene(sc), env(e), s(initial_state(sc, e)) {
        rec.start(s);
    }

    bool alive() const { return !s.complete() && !s.collided && s.elapsed < env.time_limit - 1e-9; }

    void tick(const std::vector<Vec3>& pts) {
        const auto o = step_along(s, pts, scene, env);
        rec.record(o);
        s = o.next;
    }

    // Flies the polyline at full speed; stops early once `user` is served.
    void fly(const std::vector<Vec3>& path, std::optional<std::size_t> user) {
        const double hop = env.speed * env.dt;
        std::size_t seg = 0;
        Vec3 p = s.position;
        while (alive() && seg + 1 < path.size()) {
            if (user && s.remaining[*user] <= 0.0) return;
            std::vector<Vec3> pts{p};
            double budget = hop;
            while (seg + 1 < path.size() && budget > 1e-9) {
                const Vec3 d = path[seg + 1] - p;
                const double len = d.norm();
                if (len <= budget) {
                    p = path[seg + 1];
                    budget -= len;
                    ++seg;
                } else {
                    p += d * (budget / len);
                    budget = 0.0;
                }
                pts.push_back(p);
            }
            tick(pts);
        }
    }

    void hover_until(std::size_t user) {
        while (alive() && s.remaining[user] > 0.0) tick({s.position, s.position});
    }

    std::optional<std::size_t> nearest_unserved(const Vec3& from, double altitude) const {
        std::optional<std::size_t> best;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < s.remaining.size(); ++i) {
            if (s.remaining[i] <= 0.0) continue;
            Vec3 goal = scene.users[i].position;
            goal.z() = altitude;
            const double d = (goal - from).norm();
            if (d < bd) {
                bd = d;
                best = i;
            }
        }
        return best;
    }
};

}  // namespace

// --- RRT -----------------------------------------------------------------------

std::optional<std::vector<Vec3>> rrt_path(const KnownMap& map, const Vec3& start, const Vec3& goal,
                                          const RrtConfig& cfg, Rng& rng) {
    if (!(cfg.step > 0.0) || cfg.z_max < cfg.z_min) throw InvalidArgument("rrt_path: bad configuration");
    if (map.blocked(start) || map.blocked(goal)) return std::nullopt;
    if ((goal - start).norm() <= cfg.step && map.segment_free(start, goal)) return std::vector<Vec3>{start, goal};

    std::vector<Vec3> nodes{start};
    std::vector<std::size_t> parent{0};
    std::uniform_real_distribution<double> ux(0.0, map.bounds.width), uy(0.0, map.bounds.depth),
        uz(cfg.z_min, cfg.z_max), u01(0.0, 1.0);

    while (nodes.size() < cfg.max_nodes) {
        const Vec3 q = u01(rng) < cfg.goal_bias ? goal : Vec3(ux(rng), uy(rng), uz(rng));
        std::size_t near = 0;
        double nd = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const double d = (nodes[i] - q).squaredNorm();
            if (d < nd) {
                nd = d;
                near = i;
            }
        }
        const Vec3 dir = q - nodes[near];
        const double len = dir.norm();
        if (len < 1e-9) continue;
        const Vec3 next = len <= cfg.step ? q : Vec3(nodes[near] + dir * (cfg.step / len));
        if (!map.segment_free(nodes[near], next)) continue;
        nodes.push_back(next);
        parent.push_back(near);
        if ((goal - next).norm() <= cfg.step && map.segment_free(next, goal)) {
            std::vector<Vec3> path{goal};
            if ((goal - next).norm() > 1e-9) path.push_back(next);
            for (std::size_t i = parent.back(); ; i = parent[i]) {
                path.push_back(nodes[i]);
                if (i == 0) break;
            }
            std::reverse(path.begin(), path.end());
            return path;
        }
    }
    return std::nullopt;
}

PlannerResult plan_rrt(const scene::Scene& scene, const KnownMap& map, const EnvConfig& env, const RrtConfig& cfg,
                       std::uint64_t seed) {
    Rng rng = make_stream(seed, 0x5577);
    Follower f(scene, env);
    bool infeasible = false;
    while (f.alive()) {
        const auto target = f.nearest_unserved(f.s.position, cfg.hover_altitude);
        if (!target) break;
        Vec3 goal = scene.users[*target].position;
        goal.z() = cfg.hover_altitude;
        std::optional<std::vector<Vec3>> path;
        for (int attempt = 0; attempt < 3 && !path; ++attempt) path = rrt_path(map, f.s.position, goal, cfg, rng);
        if (!path) {
            infeasible = true;
            break;
        }
        f.fly(*path, target);
        f.hover_until(*target);
    }
    auto r = f.rec.finish(f.s, scene, env.time_limit);
    r.infeasible = infeasible;
    return r;
}

// --- ACO -----------------------------------------------------------------------

Vec2 GridGraph::center(std::size_t id) const {
    return origin + Vec2((static_cast<double>(id % nx) + 0.5) * cell, (static_cast<double>(id / nx) + 0.5) * cell);
}

std::optional<std::size_t> GridGraph::nearest_free(const Vec2& p) const {
    std::optional<std::size_t> best;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t id = 0; id < free.size(); ++id) {
        if (!free[id]) continue;
        const double d = (center(id) - p).squaredNorm();
        if (d < bd) {
            bd = d;
            best = id;
        }
    }
    return best;
}

GridGraph grid_graph(const KnownMap& map, double cell, double altitude, int connectivity) {
    if (!(cell > 0.0) || (connectivity != 4 && connectivity != 8))
        throw InvalidArgument("grid_graph: bad cell or connectivity");
    GridGraph g;
    g.cell = cell;
    g.nx = static_cast<std::size_t>(std::ceil(map.bounds.width / cell));
    g.ny = static_cast<std::size_t>(std::ceil(map.bounds.depth / cell));
    g.free.assign(g.nx * g.ny, 0);
    g.neighbours.resize(g.nx * g.ny);
    constexpr int kSamples = 5;
    for (std::size_t id = 0; id < g.free.size(); ++id) {
        const Vec2 c0 = g.origin + Vec2(static_cast<double>(id % g.nx) * cell, static_cast<double>(id / g.nx) * cell);
        bool ok = true;
        for (int i = 0; i < kSamples && ok; ++i)
            for (int j = 0; j < kSamples && ok; ++j) {
                const Vec2 p = c0 + Vec2((i + 0.5) * cell / kSamples, (j + 0.5) * cell / kSamples);
                ok = !map.blocked(Vec3(p.x(), p.y(), altitude));
            }
        g.free[id] = ok ? 1 : 0;
    }
    static constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
    static constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};
    for (std::size_t id = 0; id < g.free.size(); ++id) {
        if (!g.free[id]) continue;
        const auto ix = static_cast<long>(id % g.nx);
        const auto iy = static_cast<long>(id / g.nx);
        for (int k = 0; k < connectivity; ++k) {
            const long jx = ix + kDx[k];
            const long jy = iy + kDy[k];
            if (jx < 0 || jy < 0 || jx >= static_cast<long>(g.nx) || jy >= static_cast<long>(g.ny)) continue;
            const auto nid = static_cast<std::size_t>(jy) * g.nx + static_cast<std::size_t>(jx);
            if (!g.free[nid]) continue;
            const Vec2 a = g.center(id), b = g.center(nid);
            if (!map.segment_free(Vec3(a.x(), a.y(), altitude), Vec3(b.x(), b.y(), altitude))) continue;
            g.neighbours[id].push_back(nid);
        }
    }
    return g;
}

namespace {

std::size_t roulette(const std::vector<double>& w, Rng& rng) {
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    if (!(total > 0.0)) return std::uniform_int_distribution<std::size_t>(0, w.size() - 1)(rng);
    double x = std::uniform_real_distribution<double>(0.0, total)(rng);
    for (std::size_t i = 0; i < w.size(); ++i) {
        x -= w[i];
        if (x <= 0.0) return i;
    }
    return w.size() - 1;
}

}  // namespace

std::optional<std::vector<std::size_t>> aco_grid_path(const GridGraph& g, std::size_t from, std::size_t to,
                                                      const AcoConfig& cfg, Rng& rng) {
    if (from >= g.free.size() || to >= g.free.size() || !g.free[from] || !g.free[to]) return std::nullopt;
    if (from == to) return std::vector<std::size_t>{from};
    // pheromone per (node, neighbour slot)
    std::vector<std::vector<double>> tau(g.free.size());
    for (std::size_t i = 0; i < g.free.size(); ++i) tau[i].assign(g.neighbours[i].size(), 1.0);
    const Vec2 goal = g.center(to);

    std::optional<std::vector<std::size_t>> best;
    double best_len = std::numeric_limits<double>::infinity();
    std::vector<std::uint8_t> visited(g.free.size(), 0);
    std::vector<double> w;
    struct Walk {
        std::vector<std::size_t> nodes;
        std::vector<std::size_t> slots;
        double length;
    };

    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        std::vector<Walk> arrived;
        for (std::size_t ant = 0; ant < cfg.ants; ++ant) {
            Walk walk{{from}, {}, 0.0};
            std::fill(visited.begin(), visited.end(), 0);
            visited[from] = 1;
            std::size_t u = from;
            while (u != to) {
                const auto& nb = g.neighbours[u];
                w.assign(nb.size(), 0.0);
                for (std::size_t k = 0; k < nb.size(); ++k) {
                    if (visited[nb[k]]) continue;
                    const double eta = g.cell / (g.cell + (g.center(nb[k]) - goal).norm());
                    w[k] = std::pow(tau[u][k], cfg.alpha) * std::pow(eta, cfg.beta);
                }
                if (std::all_of(w.begin(), w.end(), [](double x) { return x == 0.0; })) break;  // dead end
                const std::size_t k = roulette(w, rng);
                walk.slots.push_back(k);
                walk.length += (g.center(nb[k]) - g.center(u)).norm();
                u = nb[k];
                visited[u] = 1;
                walk.nodes.push_back(u);
            }
            if (u == to) arrived.push_back(std::move(walk));
        }
        for (auto& row : tau)
            for (double& t : row) t *= 1.0 - cfg.rho;
        for (const auto& walk : arrived) {
            for (std::size_t i = 0; i < walk.slots.size(); ++i)
                tau[walk.nodes[i]][walk.slots[i]] += cfg.deposit / walk.length;
            if (walk.length < best_len) {
                best_len = walk.length;
                best = walk.nodes;
            }
        }
    }
    return best;
}

double tour_cost(const std::vector<std::vector<double>>& cost, const std::vector<std::size_t>& order) {
    double c = 0.0;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) c += cost[order[i]][order[i + 1]];
    return c;
}

std::vector<std::size_t> aco_tour(const std::vector<std::vector<double>>& cost, const AcoConfig& cfg, Rng& rng) {
    const std::size_t n = cost.size();
    if (n == 0) return {};
    std::vector<std::vector<double>> tau(n, std::vector<double>(n, 1.0));
    std::vector<std::size_t> best;
    double best_cost = std::numeric_limits<double>::infinity();
    std::vector<double> w(n);
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        std::vector<std::vector<std::size_t>> tours;
        for (std::size_t ant = 0; ant < cfg.ants; ++ant) {
            std::vector<std::size_t> tour{0};
            std::vector<std::uint8_t> used(n, 0);
            used[0] = 1;
            while (tour.size() < n) {
                const std::size_t u = tour.back();
                for (std::size_t v = 0; v < n; ++v)
                    w[v] = used[v] ? 0.0
                                   : std::pow(tau[u][v], cfg.alpha) * std::pow(1.0 / std::max(cost[u][v], 1e-9), cfg.beta);
                std::size_t v = roulette(w, rng);
                if (used[v])  // all weights underflowed; take the first free node
                    v = static_cast<std::size_t>(std::find(used.begin(), used.end(), 0) - used.begin());
                used[v] = 1;
                tour.push_back(v);
            }
            tours.push_back(std::move(tour));
        }
        for (auto& row : tau)
            for (double& t : row) t *= 1.0 - cfg.rho;
        for (const auto& tour : tours) {
            const double c = tour_cost(cost, tour);
            for (std::size_t i = 0; i + 1 < tour.size(); ++i) {
                tau[tour[i]][tour[i + 1]] += cfg.deposit / std::max(c, 1e-9);
                tau[tour[i + 1]][tour[i]] = tau[tour[i]][tour[i + 1]];
            }
            if (c < best_cost) {
                best_cost = c;
                best = tour;
            }
        }
    }
    return best;
}

PlannerResult plan_aco(const scene::Scene& scene, const KnownMap& map, const EnvConfig& env, const AcoConfig& cfg,
                       std::uint64_t seed) {
    Rng rng = make_stream(seed, 0xac0);
    const GridGraph g = grid_graph(map, cfg.cell, cfg.altitude, cfg.connectivity);
    const std::size_t n = scene.users.size() + 1;

    std::vector<Vec3> anchor(n);  // where the UAV hovers for each tour node
    std::vector<std::size_t> node(n);
    anchor[0] = env.start;
    for (std::size_t i = 1; i < n; ++i) {
        anchor[i] = scene.users[i - 1].position;
        anchor[i].z() = cfg.altitude;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto id = g.nearest_free(anchor[i].head<2>());
        if (!id) throw Error("plan_aco: no free cell in the grid graph");
        node[i] = *id;
    }

    constexpr double kUnreachableCost = 1e9;
    std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
    std::vector<std::vector<std::vector<std::size_t>>> paths(n, std::vector<std::vector<std::size_t>>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto p = aco_grid_path(g, node[i], node[j], cfg, rng);
            if (!p) {
                cost[i][j] = cost[j][i] = kUnreachableCost;
                continue;
            }
            double len = 0.0;
            for (std::size_t k = 0; k + 1 < p->size(); ++k) len += (g.center((*p)[k + 1]) - g.center((*p)[k])).norm();
            cost[i][j] = cost[j][i] = len;
            paths[i][j] = *p;
            paths[j][i] = std::vector<std::size_t>(p->rbegin(), p->rend());
        }
    const auto order = aco_tour(cost, cfg, rng);

    Follower f(scene, env);
    bool infeasible = false;
    std::size_t at = 0;
    for (std::size_t k = 1; k < order.size() && f.alive(); ++k) {
        const std::size_t next = order[k];
        const std::size_t user = next - 1;
        if (f.s.remaining[user] <= 0.0) continue;
        if (cost[at][next] >= kUnreachableCost) {
            infeasible = true;
            continue;
        }
        std::vector<Vec3> route{f.s.position};
        for (std::size_t id : paths[at][next]) {
            const Vec2 c = g.center(id);
            route.emplace_back(c.x(), c.y(), cfg.altitude);
        }
        if (map.segment_free(route.back(), anchor[next])) route.push_back(anchor[next]);
        f.fly(route, std::nullopt);  // legs are flown as planned
        f.hover_until(user);
        at = next;
    }
    auto r = f.rec.finish(f.s, scene, env.time_limit);
    r.infeasible = infeasible;
    return r;
}

}  // namespace sc3::control

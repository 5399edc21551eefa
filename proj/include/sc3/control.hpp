// SPDX-License-Identifier: Apache-2.0
//
// control.hpp - mission environment, tabular Q-learning agent, RRT and ACO
// baselines
//
// Every planner is scored by rolling it out in the same environment: the UAV
// moves at most speed * dt per tick, one ground user is served per tick at
// the link rate of the current geometry, and touching a building ends the run.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sc3/channel.hpp"
#include "sc3/scene.hpp"
#include "sc3/types.hpp"

namespace sc3::control {

/// Downlink to ground users. Users below the SNR floor are out of range.
///
/// A link blocked by a building takes the full NLoS excess. An unblocked link
/// still crosses ground clutter the building boxes do not model; its excess is
/// the elevation-weighted mix p*los + (1-p)*nlos with
/// p = 1 / (1 + a exp(-b (theta_deg - a))) (urban air-to-ground fit).
struct ServiceModel {
    channel::LinkBudget budget{5.8e9, 0.1, 7.0, 0.0};
    double bandwidth = 1.44e6;  // one 12-subcarrier block per user
    double snr_min_db = 10.0;
    double nlos_excess_db = 20.0;
    double los_excess_db = 1.0;
    bool clutter = true;
    double clutter_a = 9.61;
    double clutter_b = 0.16;

    double los_probability(const Vec3& uav, const Vec3& user) const;

    double snr(const Vec3& uav, const Vec3& user, const scene::Scene& scene) const;
    /// bits/s, zero when the user is out of range.
    double rate(const Vec3& uav, const Vec3& user, const scene::Scene& scene) const;
};

struct RewardWeights {
    double per_mbit = 1.0;
    double per_second = 1.0;
    double collision = 50.0;
};

struct EnvConfig {
    double dt = 0.25;
    double speed = 40.0;
    double collision_margin = 1.0;  // against true geometry
    double time_limit = 200.0;
    Vec3 start = Vec3(37.5, 37.5, 20.0);
    std::vector<double> layers{20.0, 50.0, 80.0, 110.0};
    double cell = 25.0;  // horizontal state discretization
    ServiceModel service;
    RewardWeights weights;
};

struct MissionState {
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    std::vector<double> remaining;
    double elapsed = 0.0;
    bool collided = false;

    double remaining_total() const;
    bool complete() const { return remaining_total() <= 0.0; }
};

MissionState initial_state(const scene::Scene& scene, const EnvConfig& env);

struct Action {
    Vec3 velocity = Vec3::Zero();
    std::string name;
};

/// hover, four axis moves, four diagonals, ascend, descend; all at `speed`.
std::vector<Action> action_set(double speed);

struct ServiceResult {
    double bits = 0.0;
    std::optional<std::size_t> user;
    double rate = 0.0;
};

/// Serves one user for dt at `position`: the in-range user with the most
/// remaining bits, nearest first on ties. Updates `remaining` in place.
ServiceResult serve_tick(const Vec3& position, std::vector<double>& remaining, const scene::Scene& scene,
                         const ServiceModel& service, double dt);

struct StepOutcome {
    MissionState next;
    double reward = 0.0;
    ServiceResult service;
    bool collision = false;
    bool terminal = false;
};

/// Moves by a.velocity * dt, checks collision against the true scene, then serves.
StepOutcome env_step(const MissionState& s, const Action& a, const scene::Scene& scene, const EnvConfig& env);

/// What a planner believes about obstacles: a dilated 2-D footprint map that
/// blocks everything below `ceiling`, inside the scene bounds.
struct KnownMap {
    scene::OccupancyGrid grid;
    double ceiling = 0.0;
    scene::Bounds bounds;

    bool blocked(const Vec3& p) const;
    bool segment_free(const Vec3& a, const Vec3& b, double step = 1.0) const;
};

/// Footprints rasterized at `cell` and dilated so every free cell is at least
/// `margin` from a building; ceiling = tallest building + margin.
KnownMap ground_truth_map(const scene::Scene& scene, double cell, double margin);
KnownMap map_from_occupancy(const scene::OccupancyGrid& grid, double ceiling, const scene::Bounds& bounds);

struct Waypoint {
    double t = 0.0;
    Vec3 position = Vec3::Zero();
    double served_total = 0.0;
};

struct PlannerResult {
    std::vector<Waypoint> trajectory;
    double completion_time = 0.0;  // time limit when not completed
    std::size_t collisions = 0;
    std::vector<double> served;
    bool completed = false;
    bool time_limited = false;
    bool infeasible = false;
};

/// Re-scores a stored position sequence (one per tick) in the environment.
PlannerResult replay(const std::vector<Vec3>& positions, const scene::Scene& scene, const EnvConfig& env);

// --- tabular Q-learning --------------------------------------------------------

struct QConfig {
    std::size_t episodes = 6000;
    double alpha = 0.2;
    double gamma = 0.99;
    double epsilon_start = 1.0;
    double epsilon_end = 0.02;
    double epsilon_decay_fraction = 0.8;  // of episodes spent decaying
    double divergence_bound = 1e6;
    double episode_time_limit = 150.0;
    bool backward_replay = false;  // re-apply each episode's updates in reverse
    double greedy_fraction = 0.1;  // final episodes run the deployed greedy rule
};

struct TrainingRecord {
    std::size_t episode = 0;
    double completion_time = 0.0;
    double episode_return = 0.0;
};

class Policy {
public:
    Policy() = default;
    Policy(std::size_t nx, std::size_t ny, std::size_t layers, std::size_t users, std::size_t actions);

    std::size_t state_index(std::size_t cx, std::size_t cy, std::size_t layer, std::size_t target) const;
    float* row(std::size_t state) { return &q_[state * actions_]; }
    const float* row(std::size_t state) const { return &q_[state * actions_]; }
    std::uint32_t* visits(std::size_t state) { return &n_[state * actions_]; }
    const std::uint32_t* visits(std::size_t state) const { return &n_[state * actions_]; }
    std::size_t actions() const { return actions_; }
    std::size_t states() const { return actions_ ? q_.size() / actions_ : 0; }

    std::uint64_t seed = 0;
    std::size_t episodes = 0;
    QConfig hyper;

private:
    std::size_t nx_ = 0, ny_ = 0, layers_ = 0, users_ = 0, actions_ = 0;
    std::vector<float> q_;
    std::vector<std::uint32_t> n_;
};

/// Raised when Q-values leave the configured bound.
class DivergenceError : public Error {
public:
    using Error::Error;
};

struct TrainResult {
    Policy policy;
    std::vector<TrainingRecord> curve;
};

TrainResult train_rl(const scene::Scene& scene, const KnownMap& map, const EnvConfig& env, const QConfig& cfg,
                     std::uint64_t seed);

struct RolloutOptions {
    double command_latency = 0.0;  // s between a decision and its actuation
    /// Map for a decision taken at time t; a null return keeps the base map.
    std::function<const KnownMap*(double t)> map_at;
    /// Called after every environment tick.
    std::function<void(const StepOutcome&)> on_tick;
};

/// Greedy rollout over actions tried during training; in a state never seen
/// in training the UAV heads for the nearest unserved user. Decisions are
/// taken every tick from the current state and actuated `command_latency`
/// later; until then the previous command holds.
PlannerResult evaluate(const Policy& policy, const scene::Scene& scene, const KnownMap& map, const EnvConfig& env,
                       const RolloutOptions& opts = {});

// --- RRT -----------------------------------------------------------------------

struct RrtConfig {
    double step = 10.0;
    double goal_bias = 0.1;
    std::size_t max_nodes = 20000;
    double z_min = 15.0;
    double z_max = 35.0;
    double hover_altitude = 25.0;
};

/// Single-query RRT; empty when the node budget runs out.
std::optional<std::vector<Vec3>> rrt_path(const KnownMap& map, const Vec3& start, const Vec3& goal,
                                          const RrtConfig& cfg, Rng& rng);

PlannerResult plan_rrt(const scene::Scene& scene, const KnownMap& map, const EnvConfig& env, const RrtConfig& cfg,
                       std::uint64_t seed);

// --- ACO -----------------------------------------------------------------------

struct AcoConfig {
    std::size_t ants = 20;
    std::size_t iterations = 40;
    double alpha = 1.0;  // pheromone exponent
    double beta = 3.0;   // heuristic exponent
    double rho = 0.3;    // evaporation
    double deposit = 1.0;
    double cell = 25.0;
    double altitude = 20.0;
    int connectivity = 8;
};

/// Undirected grid graph; node id = iy * nx + ix.
struct GridGraph {
    std::size_t nx = 0, ny = 0;
    double cell = 1.0;
    Vec2 origin = Vec2::Zero();
    std::vector<std::uint8_t> free;
    std::vector<std::vector<std::size_t>> neighbours;

    Vec2 center(std::size_t id) const;
    std::optional<std::size_t> nearest_free(const Vec2& p) const;
};

GridGraph grid_graph(const KnownMap& map, double cell, double altitude, int connectivity);

/// Ant search for a path between two nodes; empty when no ant arrives.
std::optional<std::vector<std::size_t>> aco_grid_path(const GridGraph& g, std::size_t from, std::size_t to,
                                                      const AcoConfig& cfg, Rng& rng);

/// Open tour from node 0 through all nodes; returns the visiting order.
std::vector<std::size_t> aco_tour(const std::vector<std::vector<double>>& cost, const AcoConfig& cfg, Rng& rng);
double tour_cost(const std::vector<std::vector<double>>& cost, const std::vector<std::size_t>& order);

PlannerResult plan_aco(const scene::Scene& scene, const KnownMap& map, const EnvConfig& env, const AcoConfig& cfg,
                       std::uint64_t seed);

double path_length(const std::vector<Vec3>& path);

}  // namespace sc3::control

// SPDX-License-Identifier: Apache-2.0
//
// loop.hpp - closed-loop orchestration and the batch experiments
//
// One tick of the closed loop: the UAV flies and transmits wideband frames,
// users are served, echoes from the tick form a short coherent look; the look
// is offloaded and the occupancy map it produces becomes usable only once the
// compute latency of the active mode has elapsed. The policy always acts on
// the newest map already delivered.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sc3/compute.hpp"
#include "sc3/config.hpp"
#include "sc3/control.hpp"
#include "sc3/sar.hpp"
#include "sc3/scene.hpp"

namespace sc3::loop {

struct RunOptions {
    std::filesystem::path out_dir = "out";
    std::size_t threads = 1;
};

struct ExperimentReport {
    std::string experiment;
    std::vector<std::string> files;  // relative to the output directory
    nlohmann::json summary;
    std::string config_hash;
    std::uint64_t seed = 0;
};

/// One subcarrier allocation in a tick's frame plan.
struct Allocation {
    std::string purpose;
    std::size_t first = 0;
    std::size_t count = 0;
};

/// Sensing (wideband, with the imaging sub-band) and downlink (narrowband).
/// Throws ConfigError when the allocations overlap.
std::vector<Allocation> frame_plan(const config::SimConfig& cfg);

struct TickRecord {
    double t = 0.0;  // end of the tick
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    std::vector<double> served;      // bits delivered to each user in this tick
    std::size_t frames = 0;          // sensing frames accumulated so far
    std::size_t map_version = 0;     // 0 = nothing delivered yet
    double map_ready = 0.0;          // completion time of that version
    double control_latency = 0.0;
};

struct MapVersion {
    std::size_t version = 0;
    double captured = 0.0;  // end of the tick whose echoes it includes
    double ready = 0.0;     // captured + compute latency
    std::size_t looks = 0;
    control::KnownMap map;
};

/// Incoherent sum of short coherent looks over the whole scene.
class LookImager {
public:
    LookImager(const scene::Scene& scene, const config::SimConfig& cfg, std::uint64_t seed);

    /// Forms one look from frames spaced along the segment a -> b, starting at a.
    /// Returns false when the segment is too short or nothing is in range.
    bool look(const Vec3& a, const Vec3& b, std::size_t threads);

    std::size_t looks() const { return looks_; }
    std::size_t frames() const { return frames_; }
    sar::SarImage image() const;
    scene::OccupancyGrid occupancy() const;
    const sar::SarConfig& sar_config() const { return sar_; }

private:
    const scene::Scene& scene_;
    config::ClosedLoopSection cl_;
    sar::SarConfig sar_;
    scene::ScattererSet scatterers_;
    std::vector<double> acc_;
    std::size_t looks_ = 0;
    std::size_t frames_ = 0;
    Rng rng_;
};

/// Latency of a named mode on the calibrated profile. "edge" lets
/// choose_mode pick; "local", "pando", "relay" force one.
compute::LatencyBreakdown mode_latency(const config::SimConfig& cfg, const std::string& mode);

struct ClosedLoopRun {
    std::string mode;
    compute::LatencyBreakdown latency;
    control::PlannerResult result;
    std::vector<TickRecord> ticks;
    std::vector<MapVersion> versions;
    sar::SarImage image;
    scene::OccupancyGrid occupancy;
    double map_iou = 0.0;  // final map against the true footprints
};

struct ClosedLoopOptions {
    bool sensing = true;  // false: fly on the ground-truth map
};

ClosedLoopRun closed_loop_episode(const config::SimConfig& cfg, const scene::Scene& scene,
                                  const control::Policy& policy, const std::string& mode, std::uint64_t seed,
                                  std::size_t threads, const ClosedLoopOptions& opts = {});

/// Map from a serpentine survey flown at the top layer with the closed-loop imager.
control::KnownMap survey_map(const config::SimConfig& cfg, const scene::Scene& scene, std::uint64_t seed,
                             std::size_t threads);

/// The map every planner uses in the mission experiment.
control::KnownMap mission_map(const config::SimConfig& cfg, const scene::Scene& scene, std::size_t threads);

ExperimentReport run_ber(const config::SimConfig& cfg, const RunOptions& opts);
ExperimentReport run_latency(const config::SimConfig& cfg, const RunOptions& opts);
ExperimentReport run_sar(const config::SimConfig& cfg, const RunOptions& opts);
ExperimentReport run_mission(const config::SimConfig& cfg, const RunOptions& opts);
ExperimentReport run_closed_loop(const config::SimConfig& cfg, const RunOptions& opts);

/// Dispatch by name: ber, latency, sar, mission, closed-loop.
ExperimentReport run_experiment(const std::string& name, const config::SimConfig& cfg, const RunOptions& opts);

/// Writes manifest.json (experiment, config hash, seed, config, file hashes, summary).
void write_manifest(const ExperimentReport& report, const config::SimConfig& cfg, const RunOptions& opts);

double median(std::vector<double> v);

}  // namespace sc3::loop

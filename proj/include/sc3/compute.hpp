// SPDX-License-Identifier: Apache-2.0
//
// compute.hpp - UAV / edge / cloud latency and energy models
//
// Three ways to turn a sensing batch into a control command: run it on the
// UAV, package the raw input and offload it whole, or split it into three
// stages that stream chunks through UAV -> edge -> cloud.

#pragma once

#include <limits>
#include <string>
#include <vector>

namespace sc3::compute {

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

enum class Mode { local, pando, relay };
enum class Role { uav, edge, cloud };

std::string mode_name(Mode m);
Mode parse_mode(const std::string& name);

struct Stage {
    double cycles = 0.0;
    double out_bits = 0.0;
};

struct TaskSpec {
    double input_bits = 0.0;
    double total_cycles = 0.0;
    double output_bits = 0.0;
    std::vector<Stage> stages;  // uav, edge, cloud for relay processing
};

struct NodeProfile {
    Role role = Role::uav;
    double frequency = 1e9;  // cycles/s
};

struct Nodes {
    NodeProfile uav{Role::uav, 2e9};
    NodeProfile edge{Role::edge, 40e9};
    NodeProfile cloud{Role::cloud, 100e9};
};

struct LinkProfile {
    double bandwidth = 15.36e6;  // Hz, UAV-edge
    double snr_linear = 10.0;
    double backhaul_rate = 1e9;  // bits/s, edge-cloud

    /// Shannon rate of the UAV-edge link (used in both directions).
    double access_rate() const;
};

struct LatencyBreakdown {
    double upload = 0.0;
    double compute = 0.0;
    double download = 0.0;
    double total = 0.0;
    Mode mode = Mode::local;
};

LatencyBreakdown latency_local(const TaskSpec& task, const NodeProfile& uav);

/// Whole-task offload to `executor` (edge or cloud). Cloud adds backhaul legs.
LatencyBreakdown latency_pando(const TaskSpec& task, const Nodes& nodes, const LinkProfile& links,
                               Role executor = Role::edge);

/// Pipelined split execution over five resources (UAV compute, access uplink,
/// edge compute, backhaul, cloud compute) with `chunks` equal parts, followed
/// by the command's return trip cloud -> edge -> UAV.
LatencyBreakdown latency_relay(const TaskSpec& task, const Nodes& nodes, const LinkProfile& links,
                               std::size_t chunks);

/// Per-chunk service time of each pipeline resource, in pipeline order.
std::vector<double> relay_stage_times(const TaskSpec& task, const Nodes& nodes, const LinkProfile& links,
                                      std::size_t chunks);

struct ModeChoice {
    Mode mode = Mode::local;
    LatencyBreakdown predicted;
    LatencyBreakdown local, pando, relay;
};

/// Minimum predicted latency; ties within 1e-12 s go to local, then pando, then relay.
ModeChoice choose_mode(const TaskSpec& task, const Nodes& nodes, const LinkProfile& links, std::size_t chunks);

struct EnergyParams {
    double kappa = 1e-27;      // effective switched capacitance
    double uav_tx_power = 1.0;  // W
};

struct EnergyBreakdown {
    double uav_compute = 0.0;
    double uav_transmit = 0.0;
    double edge_compute = 0.0;
    double cloud_compute = 0.0;
    double uav_side() const { return uav_compute + uav_transmit; }
    double total() const { return uav_compute + uav_transmit + edge_compute + cloud_compute; }
};

/// kappa f^2 per cycle on every executing node plus UAV transmit power times uplink time.
EnergyBreakdown energy_estimate(const TaskSpec& task, Mode mode, const Nodes& nodes, const LinkProfile& links,
                                const EnergyParams& params = {}, std::size_t chunks = 4);

/// Latency anchors and the shape of the reference workload.
struct Calibration {
    double local_latency = 0.541;      // s
    double pando_latency = 0.077;      // s at the reference edge/link point
    double uav_frequency = 2e9;
    double edge_frequency = 40e9;
    double cloud_frequency = 100e9;
    double bandwidth = 15.36e6;
    double snr_db = 10.0;
    double backhaul_rate = 1e9;
    double output_bits = 1e4;
    std::vector<double> stage_fractions{0.135, 0.565, 0.30};
    std::vector<double> feature_fractions{0.10, 0.02};  // stage outputs as a share of input_bits
    std::size_t chunks = 4;
};

struct ComputeProfile {
    TaskSpec task;
    Nodes nodes;
    LinkProfile links;
    std::size_t chunks = 4;
};

/// Solves for total cycles and input size so the two latency anchors hold exactly.
ComputeProfile calibrate(const Calibration& cal);

struct SweepRow {
    Mode mode = Mode::local;
    double edge_gcps = 0.0;
    double bandwidth_hz = 0.0;
    LatencyBreakdown latency;
};

/// Every mode at every (edge capacity, bandwidth) pair, edge outer, bandwidth inner.
std::vector<SweepRow> latency_sweep(const ComputeProfile& base, const std::vector<double>& edge_gcps,
                                    const std::vector<double>& bandwidths);

}  // namespace sc3::compute

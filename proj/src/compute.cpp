// SPDX-License-Identifier: Apache-2.0

#include "sc3/compute.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sc3/channel.hpp"
#include "sc3/types.hpp"

namespace sc3::compute {

std::string mode_name(Mode m) {
    switch (m) {
        case Mode::local: return "local";
        case Mode::pando: return "pando";
        case Mode::relay: return "relay";
    }
    return "unknown";
}

Mode parse_mode(const std::string& name) {
    for (Mode m : {Mode::local, Mode::pando, Mode::relay})
        if (mode_name(m) == name) return m;
    throw InvalidArgument("unknown compute mode '" + name + "'");
}

double LinkProfile::access_rate() const {
    if (!(bandwidth > 0) || !(snr_linear > 0)) return 0.0;
    if (std::isinf(snr_linear) || std::isinf(bandwidth)) return kUnreachable;
    return channel::achievable_rate(snr_linear, bandwidth);
}

namespace {

// bits / rate with the conventions 0 bits -> 0 s and dead link -> unreachable.
double transfer(double bits, double rate) {
    if (!(rate > 0)) return kUnreachable;
    if (bits == 0.0 || std::isinf(rate)) return 0.0;
    return bits / rate;
}

double run(double cycles, double frequency) {
    if (cycles == 0.0 || std::isinf(frequency)) return 0.0;
    if (!(frequency > 0)) return kUnreachable;
    return cycles / frequency;
}

}  // namespace

LatencyBreakdown latency_local(const TaskSpec& task, const NodeProfile& uav) {
    LatencyBreakdown b;
    b.mode = Mode::local;
    b.compute = run(task.total_cycles, uav.frequency);
    b.total = b.upload + b.compute + b.download;
    return b;
}

LatencyBreakdown latency_pando(const TaskSpec& task, const Nodes& nodes, const LinkProfile& links, Role executor) {
    if (executor == Role::uav) throw InvalidArgument("latency_pando: executor must be edge or cloud");
    const double r = links.access_rate();
    LatencyBreakdown b;
    b.mode = Mode::pando;
    b.upload = transfer(task.input_bits, r);
    b.download = transfer(task.output_bits, r);
    if (executor == Role::cloud) {
        b.upload += transfer(task.input_bits, links.backhaul_rate);
        b.download += transfer(task.output_bits, links.backhaul_rate);
        b.compute = run(task.total_cycles, nodes.cloud.frequency);
    } else {
        b.compute = run(task.total_cycles, nodes.edge.frequency);
    }
    b.total = b.upload + b.compute + b.download;
    return b;
}

std::vector<double> relay_stage_times(const TaskSpec& task, const Nodes& nodes, const LinkProfile& links,
                                      std::size_t chunks) {
    if (task.stages.size() != 3) throw InvalidArgument("latency_relay: exactly three stages are required");
    if (chunks == 0) throw InvalidArgument("latency_relay: chunks must be positive");
    const double m = static_cast<double>(chunks);
    const auto& s = task.stages;
    return {run(s[0].cycles, nodes.uav.frequency) / m, transfer(s[0].out_bits, links.access_rate()) / m,
            run(s[1].cycles, nodes.edge.frequency) / m, transfer(s[1].out_bits, links.backhaul_rate) / m,
            run(s[2].cycles, nodes.cloud.frequency) / m};
}

LatencyBreakdown latency_relay(const TaskSpec& task, const Nodes& nodes, const LinkProfile& links, std::size_t chunks) {
    const auto t = relay_stage_times(task, nodes, links, chunks);
    const double m = static_cast<double>(chunks);
    LatencyBreakdown b;
    b.mode = Mode::relay;
    b.compute = (t[0] + t[2] + t[4]) * m;
    b.upload = (t[1] + t[3]) * m;
    b.download = transfer(task.output_bits, links.backhaul_rate) + transfer(task.output_bits, links.access_rate());
    const double sum = std::accumulate(t.begin(), t.end(), 0.0);
    const double bottleneck = *std::max_element(t.begin(), t.end());
    b.total = sum + (m - 1.0) * bottleneck + b.download;
    return b;
}

ModeChoice choose_mode(const TaskSpec& task, const Nodes& nodes, const LinkProfile& links, std::size_t chunks) {
    ModeChoice c;
    c.local = latency_local(task, nodes.uav);
    c.pando = latency_pando(task, nodes, links, Role::edge);
    c.relay = latency_relay(task, nodes, links, chunks);
    const double best = std::min({c.local.total, c.pando.total, c.relay.total});
    constexpr double tie = 1e-12;
    if (c.local.total <= best + tie)
        c.predicted = c.local;
    else if (c.pando.total <= best + tie)
        c.predicted = c.pando;
    else
        c.predicted = c.relay;
    c.mode = c.predicted.mode;
    return c;
}

EnergyBreakdown energy_estimate(const TaskSpec& task, Mode mode, const Nodes& nodes, const LinkProfile& links,
                                const EnergyParams& params, std::size_t chunks) {
    auto cpu = [&](double cycles, double f) { return cycles == 0.0 ? 0.0 : params.kappa * f * f * cycles; };
    EnergyBreakdown e;
    switch (mode) {
        case Mode::local:
            e.uav_compute = cpu(task.total_cycles, nodes.uav.frequency);
            break;
        case Mode::pando: {
            const auto lat = latency_pando(task, nodes, links, Role::edge);
            if (!std::isfinite(lat.total)) throw InvalidArgument("energy_estimate: mode is unreachable");
            e.uav_transmit = params.uav_tx_power * transfer(task.input_bits, links.access_rate());
            e.edge_compute = cpu(task.total_cycles, nodes.edge.frequency);
            break;
        }
        case Mode::relay: {
            const auto lat = latency_relay(task, nodes, links, chunks);
            if (!std::isfinite(lat.total)) throw InvalidArgument("energy_estimate: mode is unreachable");
            const auto& s = task.stages;
            e.uav_compute = cpu(s[0].cycles, nodes.uav.frequency);
            e.uav_transmit = params.uav_tx_power * transfer(s[0].out_bits, links.access_rate());
            e.edge_compute = cpu(s[1].cycles, nodes.edge.frequency);
            e.cloud_compute = cpu(s[2].cycles, nodes.cloud.frequency);
            break;
        }
    }
    return e;
}

ComputeProfile calibrate(const Calibration& cal) {
    if (cal.stage_fractions.size() != 3 || cal.feature_fractions.size() != 2)
        throw InvalidArgument("calibrate: three stage fractions and two feature fractions are required");
    const double frac_sum = std::accumulate(cal.stage_fractions.begin(), cal.stage_fractions.end(), 0.0);
    if (std::abs(frac_sum - 1.0) > 1e-12) throw InvalidArgument("calibrate: stage fractions must sum to 1");
    ComputeProfile p;
    p.chunks = cal.chunks;
    p.nodes.uav.frequency = cal.uav_frequency;
    p.nodes.edge.frequency = cal.edge_frequency;
    p.nodes.cloud.frequency = cal.cloud_frequency;
    p.links.bandwidth = cal.bandwidth;
    p.links.snr_linear = db_to_linear(cal.snr_db);
    p.links.backhaul_rate = cal.backhaul_rate;

    auto& t = p.task;
    t.total_cycles = cal.local_latency * cal.uav_frequency;
    t.output_bits = cal.output_bits;
    const double r = p.links.access_rate();
    const double upload_time = cal.pando_latency - t.total_cycles / cal.edge_frequency - t.output_bits / r;
    if (!(upload_time > 0)) throw InvalidArgument("calibrate: anchors leave no time for the upload");
    t.input_bits = upload_time * r;
    t.stages = {{cal.stage_fractions[0] * t.total_cycles, cal.feature_fractions[0] * t.input_bits},
                {cal.stage_fractions[1] * t.total_cycles, cal.feature_fractions[1] * t.input_bits},
                {0.0, t.output_bits}};
    // Last stage takes the remainder so the cycle total is exact.
    t.stages[2].cycles = t.total_cycles - t.stages[0].cycles - t.stages[1].cycles;
    return p;
}

std::vector<SweepRow> latency_sweep(const ComputeProfile& base, const std::vector<double>& edge_gcps,
                                    const std::vector<double>& bandwidths) {
    std::vector<SweepRow> rows;
    for (double g : edge_gcps)
        for (double bw : bandwidths) {
            Nodes nodes = base.nodes;
            nodes.edge.frequency = g * 1e9;
            LinkProfile links = base.links;
            links.bandwidth = bw;
            const auto c = choose_mode(base.task, nodes, links, base.chunks);
            for (const auto& lat : {c.local, c.pando, c.relay}) rows.push_back({lat.mode, g, bw, lat});
        }
    return rows;
}

}  // namespace sc3::compute

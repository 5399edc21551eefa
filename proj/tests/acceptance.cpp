// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
// Criteria 4-9 read the outputs of the batch experiments; criterion 10 runs
// every experiment a second time into a separate directory and compares the
// file hashes listed in the two manifests.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "oracles.hpp"
#include "sc3/compute.hpp"
#include "sc3/config.hpp"
#include "sc3/io.hpp"
#include "sc3/loop.hpp"
#include "sc3/waveform.hpp"

using namespace sc3;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

CVec random_symbols(std::size_t n, Rng& rng) { return waveform::qpsk_modulate(waveform::random_bits(2 * n, rng)); }

double max_abs_diff(const CVec& a, const CVec& b) {
    if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

Verdict modem_exactness() {
    using namespace waveform;
    Rng rng(101);
    double round_trip = 0.0, unitarity = 0.0;
    for (std::size_t n : {16u, 64u, 128u}) {
        const CVec x = random_symbols(n, rng);
        const ModemConfig m{n, 120e3, n / 8, 0};
        round_trip = std::max(round_trip, max_abs_diff(ofdm_demodulate(ofdm_modulate(x, m), m), x));
        const auto p = AfdmParams::for_doppler(n, 2, n / 8);
        round_trip = std::max(round_trip, max_abs_diff(afdm_demodulate(afdm_modulate(x, p), p), x));

        auto bare = p;
        bare.cp_len = 0;
        Eigen::MatrixXcd a(n, n);
        for (std::size_t k = 0; k < n; ++k) {
            CVec e(n, cdouble(0.0, 0.0));
            e[k] = 1.0;
            const CVec col = afdm_demodulate(e, bare);
            for (std::size_t r = 0; r < n; ++r) a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = col[r];
        }
        unitarity = std::max(unitarity, (a.adjoint() * a - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff());
    }
    return {round_trip < 1e-10 && unitarity < 1e-9,
            "round-trip error " + fmt("%.2e", round_trip) + ", max|A^H A - I| " + fmt("%.2e", unitarity) +
                " at N = 16, 64, 128"};
}

Verdict afdm_contains_ofdm() {
    using namespace waveform;
    Rng rng(102);
    bool same = true;
    for (std::size_t n : {16u, 64u, 128u}) {
        const CVec x = random_symbols(n, rng);
        const AfdmParams p{n, 0.0, 0.0, n / 8};
        const ModemConfig m{n, 120e3, n / 8, 0};
        const CVec a = afdm_modulate(x, p), o = ofdm_modulate(x, m);
        same = same && a.size() == o.size() && std::equal(a.begin(), a.end(), o.begin());
        const CVec ad = afdm_demodulate(a, p), od = ofdm_demodulate(o, m);
        same = same && std::equal(ad.begin(), ad.end(), od.begin());
    }
    return {same, same ? "transmit and receive samples identical at N = 16, 64, 128" : "samples differ"};
}

Verdict oracle_equivalence() {
    using namespace waveform;
    Rng rng(103);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double probe = 0.0, mmse = 0.0;
    std::size_t channels = 0;
    for (std::size_t n : {8u, 16u, 32u}) {
        for (int trial = 0; trial < 8; ++trial) {
            const std::size_t cp = n / 4;
            const auto p = AfdmParams::for_doppler(n, 1, cp, trial % 3 != 2);
            channel::ChannelRealization h;
            h.sample_rate = 1e6;
            const int paths = 1 + trial % 3;
            for (int k = 0; k < paths; ++k) {
                double nu = u(rng);
                if (trial % 2 == 0) nu = std::round(nu);
                const auto delay = static_cast<double>(static_cast<std::size_t>((u(rng) + 1.0) * 0.5 * static_cast<double>(cp - 1)));
                h.taps.push_back({cdouble(u(rng), u(rng)), delay / h.sample_rate, nu * h.sample_rate / static_cast<double>(n)});
            }
            const auto closed = build_af_channel_matrix(h, p);
            channel::ApplyOptions opt;
            opt.add_noise = false;
            opt.time_offset = -static_cast<double>(cp);
            for (std::size_t q = 0; q < n; ++q) {
                CVec e(n, cdouble(0.0, 0.0));
                e[q] = 1.0;
                const CVec rx = channel::apply_channel(afdm_modulate(e, p), h, rng, opt);
                const CVec col = afdm_demodulate(std::span<const cdouble>(rx).first(p.block_len()), p);
                for (std::size_t r = 0; r < n; ++r)
                    probe = std::max(probe, std::abs(closed(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(q)) - col[r]));
            }
            CVec y(n);
            for (auto& v : y) v = cdouble(u(rng), u(rng));
            Eigen::VectorXcd ye(static_cast<Eigen::Index>(n));
            for (std::size_t i = 0; i < n; ++i) ye(static_cast<Eigen::Index>(i)) = y[i];
            for (double s2 : {1e-3, 0.1}) {
                const CVec x = afdm_mmse_equalize(y, closed, s2);
                const Eigen::VectorXcd ref = oracle::mmse_dense(closed, ye, s2);
                for (std::size_t i = 0; i < n; ++i) mmse = std::max(mmse, std::abs(x[i] - ref(static_cast<Eigen::Index>(i))));
            }
            ++channels;
        }
    }
    return {probe < 1e-9 && mmse < 1e-8, std::to_string(channels) + " channels at N <= 32: column probing " +
                                             fmt("%.2e", probe) + ", dense inverse " + fmt("%.2e", mmse)};
}

std::vector<std::map<std::string, std::string>> read_csv(const fs::path& path) {
    std::ifstream in(path);
    std::string line;
    std::vector<std::string> header;
    std::vector<std::map<std::string, std::string>> rows;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string c;
        while (std::getline(ss, c, ',')) out.push_back(c);
        return out;
    };
    if (std::getline(in, line)) header = split(line);
    while (std::getline(in, line)) {
        const auto cells = split(line);
        std::map<std::string, std::string> row;
        for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) row[header[i]] = cells[i];
        rows.push_back(row);
    }
    return rows;
}

struct BerTable {
    std::map<std::string, std::map<double, double>> ber;
    std::size_t min_bits = std::numeric_limits<std::size_t>::max();
    std::vector<double> snrs;
};

BerTable load_ber(const fs::path& dir) {
    BerTable t;
    for (const auto& r : read_csv(dir / "ber.csv")) {
        const double snr = std::stod(r.at("snr_db"));
        t.ber[r.at("scheme")][snr] = std::stod(r.at("ber"));
        t.min_bits = std::min<std::size_t>(t.min_bits, std::stoull(r.at("bits")));
        if (std::find(t.snrs.begin(), t.snrs.end(), snr) == t.snrs.end()) t.snrs.push_back(snr);
    }
    return t;
}

Verdict ber_ordering(const BerTable& t, double runtime) {
    const auto& tf = t.ber.at("OFDM-TF-pilot");
    const auto& af = t.ber.at("OFDM-AF-pilot");
    const auto& mmse = t.ber.at("AFDM-MMSE");
    bool ordered = true, band = true;
    std::string d;
    for (double s : t.snrs) {
        ordered = ordered && tf.at(s) > af.at(s);
        if (s < 15.0) band = band && af.at(s) <= 2.0 * mmse.at(s);
        d += fmt(" %g dB:", s) + fmt(" TF %.3g", tf.at(s)) + fmt(" AF %.3g", af.at(s)) + fmt(" MMSE %.3g;", mmse.at(s));
    }
    const bool bits = t.min_bits >= 100000;
    return {ordered && band && bits && runtime <= 300.0,
            "TF > AF everywhere: " + std::string(ordered ? "yes" : "no") + ", AF <= 2 x MMSE below 15 dB: " +
                (band ? "yes" : "no") + ", min bits " + std::to_string(t.min_bits) + ";" + d + fmt(" %.0f s", runtime)};
}

Verdict slp_reliability(const BerTable& t, double runtime) {
    const auto& slp = t.ber.at("AFDM-SLP");
    const auto& mmse = t.ber.at("AFDM-MMSE");
    std::size_t ok = 0;
    std::string d;
    for (double s : t.snrs) {
        ok += slp.at(s) <= mmse.at(s);
        d += fmt(" %g dB:", s) + fmt(" SLP %.3g", slp.at(s)) + fmt(" vs %.3g;", mmse.at(s));
    }
    const double share = static_cast<double>(ok) / static_cast<double>(t.snrs.size());
    return {share >= 0.8 && runtime <= 300.0,
            std::to_string(ok) + "/" + std::to_string(t.snrs.size()) + " points SLP <= MMSE;" + d};
}

Verdict sar_resolution(const json& s, double runtime) {
    const double r = s["range_width"], a = s["azimuth_width"], iou = s["footprint_iou"];
    const bool pass = r >= 0.78 && r <= 1.30 && a >= 0.375 && a <= 0.625 && iou >= 0.5 && runtime <= 120.0;
    return {pass, "range " + fmt("%.4f m", r) + ", azimuth " + fmt("%.4f m", a) + ", footprint IoU " + fmt("%.3f", iou) +
                      fmt(", %.0f s", runtime)};
}

Verdict latency_anchors(const json& s, const config::SimConfig& cfg) {
    const double local = s["local"], pando = s["pando_reference"], relay = s["relay_reference"];
    const double reduction = 1.0 - pando / local;
    const bool anchors = std::abs(local - 0.541) < 1e-12 && std::abs(pando - 0.077) < 1e-12;
    const bool low = static_cast<double>(s["relay_low"]) < static_cast<double>(s["pando_low"]);
    const bool gap = std::abs(relay - pando) <= 0.05 * pando;

    // Pipeline total against an event-driven schedule over the whole sweep.
    const auto base = compute::calibrate(cfg.compute.calibration);
    double worst = 0.0;
    for (double f : cfg.compute.edge_gcps)
        for (double bw : cfg.compute.bandwidths)
            for (std::size_t m : {1u, 2u, 4u, 8u}) {
                auto p = base;
                p.nodes.edge.frequency = f * 1e9;
                p.links.bandwidth = bw;
                const auto t = compute::relay_stage_times(p.task, p.nodes, p.links, m);
                const double ev = oracle::flow_shop_makespan(t, m) + p.task.output_bits / p.links.backhaul_rate +
                                  p.task.output_bits / p.links.access_rate();
                worst = std::max(worst, std::abs(compute::latency_relay(p.task, p.nodes, p.links, m).total - ev) / ev);
            }
    const bool schedule = worst <= 1e-14;
    return {anchors && reduction >= 0.85 && low && gap && schedule,
            "local " + fmt("%.6g s", local) + ", offload " + fmt("%.6g s", pando) + ", reduction " +
                fmt("%.2f%%", 100.0 * reduction) + ", relay at (5, 1.92 MHz) " + fmt("%.4g", s["relay_low"]) +
                " vs " + fmt("%.4g", s["pando_low"]) + ", gap at (40, 15.36 MHz) " +
                fmt("%.2f%%", 100.0 * std::abs(relay - pando) / pando) + ", schedule rel. diff " + fmt("%.1e", worst)};
}

Verdict planner_ordering(const json& s, double runtime) {
    const std::size_t collisions = s["collisions_rl"].get<std::size_t>() + s["collisions_rrt"].get<std::size_t>() +
                                   s["collisions_aco"].get<std::size_t>();
    const double rl = s["median_rl"], rrt = s["median_rrt"], aco = s["median_aco"];
    const bool ascends = s["rl_exceeds_median_height_in_first_third"];
    const std::size_t seeds = s["seeds"];
    return {seeds >= 5 && rl < rrt && rrt < aco && collisions == 0 && ascends && runtime <= 900.0,
            std::to_string(seeds) + " seeds, medians RL " + fmt("%.2f s", rl) + " < RRT " + fmt("%.2f s", rrt) +
                " < ACO " + fmt("%.2f s", aco) + ", collisions " + std::to_string(collisions) + ", RL climbs early: " +
                (ascends ? "yes" : "no") + fmt(", %.0f s", runtime)};
}

Verdict closed_loop_benefit(const json& s, double runtime) {
    const double edge = s["median_edge"], local = s["median_local"];
    const std::size_t seeds = s["seeds"];
    const bool causal = s["causal"];
    return {seeds >= 5 && edge <= local && causal && runtime <= 600.0,
            std::to_string(seeds) + " seeds, median edge " + fmt("%.2f s", edge) + " vs local " + fmt("%.2f s", local) +
                ", causal: " + (causal ? "yes" : "no") + fmt(", %.0f s", runtime)};
}

Verdict determinism(const std::vector<std::string>& experiments, const fs::path& first, const fs::path& second) {
    std::size_t files = 0;
    std::vector<std::string> mismatched;
    for (const auto& e : experiments) {
        const auto a = json::parse(std::ifstream(first / e / "manifest.json"));
        const auto b = json::parse(std::ifstream(second / e / "manifest.json"));
        if (a["files"] != b["files"] || a["config_hash"] != b["config_hash"]) mismatched.push_back(e + "/manifest");
        for (const auto& f : a["files"]) {
            const std::string p = f["path"];
            ++files;
            if (!fs::exists(second / e / p) || io::file_hash(first / e / p) != io::file_hash(second / e / p))
                mismatched.push_back(e + "/" + p);
        }
    }
    std::string d = std::to_string(files) + " files across " + std::to_string(experiments.size()) + " experiments";
    if (!mismatched.empty()) d += ", differing: " + mismatched.front();
    return {mismatched.empty() && files > 0, d};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sc3 acceptance run"};
    std::string out = "acceptance_out";
    std::size_t threads = 1;
    app.add_option("--out", out, "Output directory");
    app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);

    const fs::path root(out);
    fs::remove_all(root);
    const auto cfg = config::reference_config();
    const std::vector<std::string> experiments{"ber", "latency", "sar", "mission", "closed-loop"};

    std::map<std::string, loop::ExperimentReport> reports;
    std::map<std::string, double> runtime;
    auto run_all = [&](const fs::path& dir, bool record) {
        for (const auto& e : experiments) {
            const auto t0 = std::chrono::steady_clock::now();
            auto rep = loop::run_experiment(e, cfg, {dir / e, threads});
            if (record) {
                runtime[e] = seconds_since(t0);
                reports[e] = std::move(rep);
            }
        }
    };

    std::vector<std::pair<int, std::function<Verdict()>>> criteria{
        {1, modem_exactness},
        {2, afdm_contains_ofdm},
        {3, oracle_equivalence},
        {4, [&] { return ber_ordering(load_ber(root / "first" / "ber"), runtime["ber"]); }},
        {5, [&] { return slp_reliability(load_ber(root / "first" / "ber"), runtime["ber"]); }},
        {6, [&] { return sar_resolution(reports["sar"].summary, runtime["sar"]); }},
        {7, [&] { return latency_anchors(reports["latency"].summary, cfg); }},
        {8, [&] { return planner_ordering(reports["mission"].summary, runtime["mission"]); }},
        {9, [&] { return closed_loop_benefit(reports["closed-loop"].summary, runtime["closed-loop"]); }},
        {10, [&] {
             run_all(root / "second", false);
             return determinism(experiments, root / "first", root / "second");
         }},
    };

    try {
        run_all(root / "first", true);
    } catch (const std::exception& e) {
        std::printf("experiments failed: %s\n", e.what());
        return 1;
    }

    int failed = 0;
    for (auto& [id, check] : criteria) {
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        failed += !v.pass;
        std::printf("criterion %2d: %s  %s\n", id, v.pass ? "PASS" : "FAIL", v.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}

// SPDX-License-Identifier: Apache-2.0
//
// sc3 - batch experiments of the closed-loop simulator
//
//   sc3 <ber|latency|sar|mission|closed-loop> [--config FILE] [--seed N] [--out DIR] [--threads N]
//   sc3 config            print the built-in reference config
//
// On failure a single JSON line {"status":"error",...} goes to stderr.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "sc3/config.hpp"
#include "sc3/loop.hpp"

namespace {

enum Exit { ok = 0, usage = 2, bad_config = 3, failed = 4 };

int fail(Exit code, const std::string& kind, const std::string& message) {
    std::cerr << nlohmann::json{{"status", "error"}, {"kind", kind}, {"exit_code", code}, {"message", message}}.dump()
              << std::endl;
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sc3 - sensing, communication, computation and control loop simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";
    std::size_t threads = 1;

    const std::vector<std::string> experiments{"ber", "latency", "sar", "mission", "closed-loop"};
    for (const auto& name : experiments) {
        auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
        sub->add_option("--config", config_path, "JSON config (default: built-in reference)");
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--out", out_dir, "output directory")->capture_default_str();
        sub->add_option("--threads", threads, "worker threads")->capture_default_str()->check(CLI::Range(1, 1024));
    }
    auto* dump = app.add_subcommand("config", "print the reference config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail(usage, "usage", e.what());
    }

    try {
        if (dump->parsed()) {
            std::cout << sc3::config::to_json(sc3::config::reference_config()).dump(2) << std::endl;
            return ok;
        }
        auto cfg = config_path.empty() ? sc3::config::reference_config() : sc3::config::load(config_path);
        if (seed) cfg.seed = *seed;
        sc3::config::validate(cfg);
        std::string name;
        for (const auto& e : experiments)
            if (app.got_subcommand(e)) name = e;
        const auto report = sc3::loop::run_experiment(name, cfg, {out_dir, threads});
        std::cout << nlohmann::json{{"status", "ok"},
                                    {"experiment", report.experiment},
                                    {"out", out_dir},
                                    {"config_hash", report.config_hash},
                                    {"seed", report.seed},
                                    {"summary", report.summary}}
                         .dump()
                  << std::endl;
        return ok;
    } catch (const sc3::ConfigError& e) {
        return fail(bad_config, "config", e.what());
    } catch (const std::exception& e) {
        return fail(failed, "runtime", e.what());
    }
}

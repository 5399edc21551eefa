// Python bindings. Configs and reports cross the boundary as JSON text; the
// package wrapper turns them into dicts.

#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "sc3/compute.hpp"
#include "sc3/config.hpp"
#include "sc3/loop.hpp"
#include "sc3/scene.hpp"
#include "sc3/waveform.hpp"

namespace py = pybind11;
using namespace sc3;

namespace {

config::SimConfig parse_config(const std::string& text) {
    return text.empty() ? config::reference_config() : config::from_json(nlohmann::json::parse(text));
}

std::string report_json(const loop::ExperimentReport& r) {
    return nlohmann::json{{"experiment", r.experiment},
                          {"files", r.files},
                          {"summary", r.summary},
                          {"config_hash", r.config_hash},
                          {"seed", r.seed}}
        .dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "sc3 native core";

    // Translators run newest first, so the base class goes first.
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);

    m.def("reference_config", [] { return config::to_json(config::reference_config()).dump(); });
    m.def("config_hash", [](const std::string& text) { return config::config_hash(parse_config(text)); },
          py::arg("config_json"));

    m.def(
        "run_experiment",
        [](const std::string& name, const std::string& text, const std::string& out, std::size_t threads) {
            const auto cfg = parse_config(text);
            loop::ExperimentReport r;
            {
                py::gil_scoped_release release;
                r = loop::run_experiment(name, cfg, {out, threads});
            }
            return report_json(r);
        },
        py::arg("name"), py::arg("config_json"), py::arg("out"), py::arg("threads") = 1);

    m.def(
        "latency_modes",
        [](const std::string& text) {
            const auto cfg = parse_config(text);
            const auto p = compute::calibrate(cfg.compute.calibration);
            const auto c = compute::choose_mode(p.task, p.nodes, p.links, p.chunks);
            return py::dict(py::arg("local") = c.local.total, py::arg("pando") = c.pando.total,
                            py::arg("relay") = c.relay.total, py::arg("chosen") = compute::mode_name(c.mode));
        },
        py::arg("config_json") = "");

    m.def("ofdm_modulate",
          [](const CVec& x, std::size_t cp) {
              return waveform::ofdm_modulate(x, waveform::ModemConfig{x.size(), 120e3, cp, 0});
          },
          py::arg("symbols"), py::arg("cp_len"));
    m.def("ofdm_demodulate",
          [](const CVec& y, std::size_t n, std::size_t cp) {
              return waveform::ofdm_demodulate(y, waveform::ModemConfig{n, 120e3, cp, 0});
          },
          py::arg("samples"), py::arg("n"), py::arg("cp_len"));
    m.def("afdm_modulate",
          [](const CVec& x, double c1, double c2, std::size_t cp) {
              return waveform::afdm_modulate(x, waveform::AfdmParams{x.size(), c1, c2, cp});
          },
          py::arg("symbols"), py::arg("c1"), py::arg("c2"), py::arg("cp_len"));
    m.def("afdm_demodulate",
          [](const CVec& y, std::size_t n, double c1, double c2, std::size_t cp) {
              return waveform::afdm_demodulate(y, waveform::AfdmParams{n, c1, c2, cp});
          },
          py::arg("samples"), py::arg("n"), py::arg("c1"), py::arg("c2"), py::arg("cp_len"));

    m.def("generate_scene",
          [](std::uint64_t seed, std::size_t n_buildings) {
              return scene::serialize(scene::generate_scene(seed, n_buildings, scene::Bounds{}));
          },
          py::arg("seed"), py::arg("n_buildings"));
    m.def("is_los",
          [](const std::array<double, 3>& a, const std::array<double, 3>& b, const std::string& scene_json) {
              return scene::is_los(Vec3(a[0], a[1], a[2]), Vec3(b[0], b[1], b[2]), scene::parse_scene(scene_json));
          },
          py::arg("a"), py::arg("b"), py::arg("scene_json"));
}

// SPDX-License-Identifier: Apache-2.0
//
// config.hpp - the single JSON document that drives every experiment
//
// Each module reads its own section. Keys left out of a section keep their
// defaults; unknown keys are rejected so typos do not pass silently.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "sc3/compute.hpp"
#include "sc3/control.hpp"
#include "sc3/sar.hpp"
#include "sc3/scene.hpp"
#include "sc3/waveform.hpp"

namespace sc3::config {

struct SceneSection {
    std::uint64_t seed = 7;
    scene::SceneParams params;
    scene::Bounds bounds;
};

/// Wideband carries sensing, narrowband carries control and user data.
struct ModemSection {
    double carrier = 5.8e9;
    waveform::ModemConfig wideband{1200, 120e3, 96, 0};
    waveform::ModemConfig narrowband{128, 120e3, 16, 1200};
};

/// Point-target pass and single-building footprint pass.
struct SarSection {
    std::size_t oversample = 8;
    // point target
    double altitude = 100.0;
    double ground_range = 200.0;
    double azimuth_resolution = 0.5;
    double point_spacing_wavelengths = 0.25;
    double point_pixel = 0.1;
    std::size_t point_grid = 256;
    // footprint
    Vec2 building_center = Vec2(0.0, 120.0);
    double building_width = 30.0;
    double building_depth = 20.0;
    double building_height = 12.0;
    double footprint_pixel = 0.25;
    std::size_t footprint_grid = 256;
    double footprint_plane = 12.0;
    double track_length = 50.0;
    double track_spacing_wavelengths = 0.5;
    double scatterer_spacing = 1.0;
    double scatterer_jitter = 1.0;
    std::uint64_t scatterer_seed = 3;
    double threshold = 0.3;
    double dilation = 0.0;
    double smoothing = 3.0;
};

struct ComputeSection {
    compute::Calibration calibration;
    std::vector<double> edge_gcps{5.0, 10.0, 20.0, 40.0, 80.0};
    std::vector<double> bandwidths{1.92e6, 3.84e6, 7.68e6, 15.36e6};
    compute::EnergyParams energy;
};

struct ControlSection {
    control::EnvConfig env;
    control::QConfig q;
    control::RrtConfig rrt;
    control::AcoConfig aco;
    std::size_t n_seeds = 5;       // runs use seeds seed, seed + 1, ...
    std::string map = "ground_truth";  // or "sar"
    double map_cell = 5.0;
    double map_margin = 5.0;
};

/// Imaging on the mission trajectory: each look is a short coherent
/// sub-aperture flown inside one tick; looks add incoherently.
struct ClosedLoopSection {
    std::size_t n_subcarriers = 150;
    std::size_t oversample = 4;
    double pixel = 10.0;
    double plane_height = 30.0;
    std::size_t frames_per_look = 32;
    double frame_spacing_wavelengths = 0.5;
    std::size_t look_stride = 4;  // ticks between looks
    double sensing_range = 300.0;
    double scatterer_spacing = 8.0;
    double scatterer_jitter = 1.0;
    double threshold = 0.1;
    double smoothing = 0.0;
    double dilation = 0.0;
    std::vector<std::string> modes{"edge", "local"};
};

struct SimConfig {
    std::uint64_t seed = 7;
    double tick = 0.25;
    SceneSection scene;
    ModemSection modems;
    waveform::BerConfig ber;
    SarSection sar;
    ComputeSection compute;
    ControlSection control;
    ClosedLoopSection closed_loop;
    /// Sections present in the source document ("scene", "ber", ...).
    std::vector<std::string> sections;

    bool has(const std::string& section) const;
    /// Throws ConfigError naming the first missing section.
    void require(const std::vector<std::string>& needed) const;
};

/// All sections at their defaults.
SimConfig reference_config();

/// Parses and validates. Throws ConfigError.
SimConfig from_json(const nlohmann::json& doc);
SimConfig load(const std::string& path);
nlohmann::json to_json(const SimConfig& cfg);

/// Rejects overlapping subcarrier allocations, a tick shorter than one frame,
/// and out-of-range values.
void validate(const SimConfig& cfg);

/// FNV-1a of the canonical JSON dump, 16 hex digits.
std::string config_hash(const SimConfig& cfg);

/// BerConfig with the narrowband modem, carrier and seed applied.
waveform::BerConfig ber_config(const SimConfig& cfg);
/// Mission environment with the loop tick applied.
control::EnvConfig env_config(const SimConfig& cfg);
scene::Scene reference_scene(const SimConfig& cfg);

}  // namespace sc3::config

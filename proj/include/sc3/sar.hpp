// SPDX-License-Identifier: Apache-2.0
//
// sar.hpp - mono-static imaging with the wideband OFDM waveform
//
// Echoes are kept per subcarrier after the known transmit symbols have been
// divided out, so a row is the scene's frequency response seen from one
// position. Range compression is a zero-padded IDFT; image formation is
// time-domain back-projection onto a horizontal plane.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "sc3/scene.hpp"
#include "sc3/types.hpp"

namespace sc3::sar {

struct ImageGrid {
    Vec2 origin = Vec2::Zero();  // corner of pixel (0, 0)
    double pixel = 0.1;          // m
    std::size_t nx = 256;
    std::size_t ny = 256;
    double height = 0.0;         // z of the image plane
};

struct SarConfig {
    std::size_t n_subcarriers = 1200;
    double subcarrier_spacing = 120e3;
    double carrier = 5.8e9;
    std::size_t oversample = 8;  // zero-padding factor of the range transform
    ImageGrid grid;

    double bandwidth() const { return static_cast<double>(n_subcarriers) * subcarrier_spacing; }
    double wavelength() const { return kSpeedOfLight / carrier; }
    std::size_t profile_len() const { return oversample * n_subcarriers; }
    /// Slant-range extent of one profile sample.
    double range_bin() const;
    /// Absolute frequency of subcarrier k (carrier sits at index n/2).
    double subcarrier_frequency(std::size_t k) const;
};

struct EchoBuffer {
    std::vector<Vec3> positions;
    std::vector<double> times;
    std::vector<CVec> rows;  // rows[p][k]
};

struct SarImage {
    ImageGrid grid;
    std::vector<double> intensity;  // row-major, iy * nx + ix
    bool peak_normalized = false;
    double peak_value = 0.0;        // |accumulation|^2 at the peak before normalization
    Vec3 aperture_center = Vec3::Zero();

    double at(std::size_t ix, std::size_t iy) const { return intensity[iy * grid.nx + ix]; }
    Vec2 pixel_center(std::size_t ix, std::size_t iy) const;
};

struct EchoOptions {
    double noise_variance = 0.0;             // per subcarrier sample
    const scene::Scene* occluders = nullptr;  // drops scatterers hidden from a position
    std::size_t threads = 1;
};

/// Evenly spaced positions along a straight line, first point at `start`.
std::vector<Vec3> straight_track(const Vec3& start, const Vec3& direction, double length, double spacing);

/// Aperture that gives azimuth resolution `resolution` at range `range`: lambda R / (2 delta).
double aperture_for_resolution(const SarConfig& cfg, double range, double resolution);

/// echo[k] = sum_s sigma_s / R_s^2 * exp(-j 4 pi f_k R_s / c), plus optional noise.
EchoBuffer synthesize_echoes(const std::vector<Vec3>& trajectory, const scene::ScattererSet& scatterers,
                             const SarConfig& cfg, Rng& rng, const EchoOptions& opts = {},
                             const std::vector<double>& times = {});

/// Zero-padded inverse transform of one echo row; sample m sits at slant range m * range_bin().
CVec range_compress(std::span<const cdouble> row, const SarConfig& cfg);

/// Coherent back-projection, |.|^2, peak-normalized.
SarImage back_project(const EchoBuffer& buf, const SarConfig& cfg, std::size_t threads = 1);

struct ResolutionReport {
    double range_width = 0.0;    // m, -3 dB, along ground range
    double azimuth_width = 0.0;  // m, -3 dB
    Vec2 peak = Vec2::Zero();
    double peak_error = 0.0;     // horizontal distance from the true point
    double range_asymmetry = 0.0;  // |left - right| half-width difference, m
};

/// Measures the point response. Throws Error if the peak is not unique.
ResolutionReport resolution_report(const SarImage& img, const Vec3& true_point);

/// Cells with intensity >= threshold * max, then dilated by `dilation` metres.
/// A positive `smoothing` first box-averages intensity over that radius (m)
/// to suppress speckle; the threshold then applies to the smoothed image.
scene::OccupancyGrid image_to_occupancy(const SarImage& img, double threshold, double dilation = 0.0,
                                        double smoothing = 0.0);

/// Footprint raster on the image's own pixel grid.
scene::OccupancyGrid footprint_on_grid(const scene::Scene& scene, const ImageGrid& grid);

}  // namespace sc3::sar

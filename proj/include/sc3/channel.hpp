// SPDX-License-Identifier: Apache-2.0
//
// channel.hpp - doubly-dispersive air-ground link
//
// Taps carry a complex gain, an on-grid delay and a Doppler shift. Gains are
// normalized to unit total power; path loss and transmit power enter through
// ChannelRealization::amplitude so the normalized profile stays inspectable.

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "sc3/scene.hpp"
#include "sc3/types.hpp"

namespace sc3::channel {

struct PathTap {
    cdouble gain{1.0, 0.0};
    double delay = 0.0;    // s
    double doppler = 0.0;  // Hz
};

struct ChannelRealization {
    std::vector<PathTap> taps;
    double sample_rate = 1.0;  // Hz
    double noise_psd = 0.0;    // W/Hz
    double amplitude = 1.0;    // sqrt(received power / transmitted power)
    double pathloss_db = 0.0;
    bool los = true;

    /// Per-sample received SNR for a unit-power transmit stream.
    double snr_linear() const;
    std::size_t max_delay_samples() const;
};

struct LinkBudget {
    double carrier = 5.8e9;        // Hz
    double tx_power = 1.0;         // W
    double noise_figure_db = 7.0;
    double antenna_gain_dbi = 0.0;  // sum of both ends
};

struct ChannelProfile {
    double k_factor_db = 10.0;
    std::size_t n_nlos = 3;
    double decay_samples = 3.0;        // NLoS power ~ exp(-delay / decay)
    std::size_t max_delay_samples = 8;
    double nlos_excess_db = 20.0;
};

struct UavState {
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
};

/// Draws one quasi-static realization. LoS links get a Rician dominant tap at
/// zero delay plus n_nlos scattered taps; NLoS links get Rayleigh taps only.
ChannelRealization sample_channel(const UavState& uav, const Vec3& target, const scene::Scene& scene,
                                  const LinkBudget& budget, const ChannelProfile& profile, double sample_rate,
                                  Rng& rng);

struct ApplyOptions {
    bool add_noise = true;
    std::optional<double> noise_variance;  // overrides noise_psd * sample_rate
    std::size_t max_delay_samples = 1024;
    double time_offset = 0.0;  // samples; Doppler phase uses (n + time_offset) * Ts
};

/// y[n] = a * sum_p g_p e^{j2pi f_p (n + offset) Ts} x[n - l_p] + w[n].
/// Output is longer than the input by the largest tap delay.
CVec apply_channel(std::span<const cdouble> x, const ChannelRealization& h, Rng& rng,
                   const ApplyOptions& opts = {});

/// Adds circular complex Gaussian noise of total variance `variance` in place.
void add_awgn(std::span<cdouble> x, double variance, Rng& rng);

double pathloss_db(double distance, bool los, double carrier, double nlos_excess_db = 20.0);

double achievable_rate(double snr_linear, double bandwidth);

/// Thermal noise PSD kT times the noise figure.
double noise_psd(double noise_figure_db);

/// Received SNR of a narrowband link over `bandwidth` at the given geometry.
double link_snr(double distance, bool los, const LinkBudget& budget, double bandwidth, double nlos_excess_db);

}  // namespace sc3::channel

// SPDX-License-Identifier: Apache-2.0

#include "sc3/channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sc3::channel {

double ChannelRealization::snr_linear() const {
    const double noise = noise_psd * sample_rate;
    return noise > 0 ? amplitude * amplitude / noise : std::numeric_limits<double>::infinity();
}

std::size_t ChannelRealization::max_delay_samples() const {
    std::size_t m = 0;
    for (const auto& t : taps) m = std::max(m, static_cast<std::size_t>(std::llround(t.delay * sample_rate)));
    return m;
}

double noise_psd(double noise_figure_db) {
    return kBoltzmann * kNoiseTemperature * db_to_linear(noise_figure_db);
}

double pathloss_db(double distance, bool los, double carrier, double nlos_excess_db) {
    if (!(distance > 0)) throw InvalidArgument("pathloss_db: distance must be positive");
    const double fs = 20.0 * std::log10(4.0 * kPi * distance * carrier / kSpeedOfLight);
    return los ? fs : fs + nlos_excess_db;
}

double achievable_rate(double snr_linear, double bandwidth) {
    if (snr_linear < 0 || !(bandwidth > 0)) throw InvalidArgument("achievable_rate: bad arguments");
    return bandwidth * std::log2(1.0 + snr_linear);
}

double link_snr(double distance, bool los, const LinkBudget& budget, double bandwidth, double nlos_excess_db) {
    const double pl = pathloss_db(distance, los, budget.carrier, nlos_excess_db);
    const double rx = budget.tx_power * db_to_linear(budget.antenna_gain_dbi - pl);
    return rx / (noise_psd(budget.noise_figure_db) * bandwidth);
}

namespace {

cdouble complex_normal(Rng& rng, double variance) {
    std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
    const double re = n(rng);
    const double im = n(rng);
    return {re, im};
}

Vec3 random_direction(Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec3 d;
    do {
        d = Vec3(n(rng), n(rng), n(rng));
    } while (d.norm() < 1e-12);
    return d.normalized();
}

}  // namespace

ChannelRealization sample_channel(const UavState& uav, const Vec3& target, const scene::Scene& scene,
                                  const LinkBudget& budget, const ChannelProfile& profile, double sample_rate,
                                  Rng& rng) {
    if (!(sample_rate > 0)) throw InvalidArgument("sample_channel: sample_rate must be positive");
    if (profile.n_nlos > profile.max_delay_samples)
        throw InvalidArgument("sample_channel: more scattered taps than delay bins");
    ChannelRealization h;
    h.sample_rate = sample_rate;
    h.noise_psd = noise_psd(budget.noise_figure_db);

    const Vec3 to_target = target - uav.position;
    const double distance = std::max(to_target.norm(), 1e-3);
    h.los = scene::is_los(uav.position, target, scene);
    h.pathloss_db = pathloss_db(distance, h.los, budget.carrier, profile.nlos_excess_db);
    h.amplitude = std::sqrt(budget.tx_power * db_to_linear(budget.antenna_gain_dbi - h.pathloss_db));

    const double doppler_scale = budget.carrier / kSpeedOfLight;
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);

    // Distinct scattered delays from 1..max_delay (LoS) or 0..max_delay-1 shifted to start at 0 (NLoS).
    std::vector<std::size_t> bins(profile.max_delay_samples);
    for (std::size_t i = 0; i < bins.size(); ++i) bins[i] = i + 1;
    std::shuffle(bins.begin(), bins.end(), rng);
    std::vector<std::size_t> delays(bins.begin(), bins.begin() + static_cast<std::ptrdiff_t>(profile.n_nlos));
    std::sort(delays.begin(), delays.end());

    double scattered = 0.0;
    std::vector<double> weights;
    for (auto d : delays) {
        weights.push_back(std::exp(-static_cast<double>(d) / profile.decay_samples));
        scattered += weights.back();
    }

    if (h.los) {
        const double k = db_to_linear(profile.k_factor_db);
        const double p_los = k / (1.0 + k);
        PathTap t;
        t.gain = std::polar(std::sqrt(p_los), phase(rng));
        t.delay = 0.0;
        t.doppler = uav.velocity.dot(to_target / distance) * doppler_scale;
        h.taps.push_back(t);
        for (std::size_t i = 0; i < delays.size(); ++i) {
            PathTap s;
            s.gain = complex_normal(rng, (1.0 - p_los) * weights[i] / scattered);
            s.delay = static_cast<double>(delays[i]) / sample_rate;
            s.doppler = uav.velocity.dot(random_direction(rng)) * doppler_scale;
            h.taps.push_back(s);
        }
    } else {
        const std::size_t first = delays.empty() ? 0 : delays.front();
        for (std::size_t i = 0; i < delays.size(); ++i) {
            PathTap s;
            s.gain = complex_normal(rng, weights[i] / scattered);
            s.delay = static_cast<double>(delays[i] - first) / sample_rate;
            s.doppler = uav.velocity.dot(random_direction(rng)) * doppler_scale;
            h.taps.push_back(s);
        }
    }

    double total = 0.0;
    for (const auto& t : h.taps) total += std::norm(t.gain);
    const double scale = 1.0 / std::sqrt(total);
    for (auto& t : h.taps) t.gain *= scale;
    return h;
}

void add_awgn(std::span<cdouble> x, double variance, Rng& rng) {
    if (variance <= 0) return;
    std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
    for (auto& v : x) {
        const double re = n(rng);
        const double im = n(rng);
        v += cdouble(re, im);
    }
}

CVec apply_channel(std::span<const cdouble> x, const ChannelRealization& h, Rng& rng, const ApplyOptions& opts) {
    if (h.taps.empty()) throw InvalidArgument("apply_channel: realization has no taps");
    std::vector<std::size_t> lags;
    std::size_t max_lag = 0;
    for (const auto& t : h.taps) {
        if (t.delay < 0) throw InvalidArgument("apply_channel: negative tap delay");
        const auto lag = static_cast<std::size_t>(std::llround(t.delay * h.sample_rate));
        if (lag > opts.max_delay_samples) throw InvalidArgument("apply_channel: tap delay exceeds the configured maximum");
        lags.push_back(lag);
        max_lag = std::max(max_lag, lag);
    }
    CVec y(x.size() + max_lag, cdouble(0.0, 0.0));
    for (std::size_t p = 0; p < h.taps.size(); ++p) {
        const auto& t = h.taps[p];
        const cdouble g = h.amplitude * t.gain;
        const double w = kTwoPi * t.doppler / h.sample_rate;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const std::size_t n = i + lags[p];
            // Phase computed directly per sample so long frames do not accumulate drift.
            y[n] += g * std::polar(1.0, w * (static_cast<double>(n) + opts.time_offset)) * x[i];
        }
    }
    if (opts.add_noise) {
        const double var = opts.noise_variance.value_or(h.noise_psd * h.sample_rate);
        add_awgn(y, var, rng);
    }
    return y;
}

}  // namespace sc3::channel

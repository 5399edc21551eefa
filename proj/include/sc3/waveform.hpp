// SPDX-License-Identifier: Apache-2.0
//
// waveform.hpp - OFDM and AFDM modems, AF-domain pilot estimation,
// equalizers, symbol-level precoding and the BER harness
//
// Conventions: all transforms are unitary, symbols have unit average energy,
// and a per-sample noise variance sigma^2 therefore means SNR = 1/sigma^2.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sc3/channel.hpp"
#include "sc3/types.hpp"

namespace sc3::waveform {

using CMat = Eigen::MatrixXcd;

/// Raised when a linear solve is rank deficient; the caller drops the frame.
class SolverError : public Error {
public:
    using Error::Error;
};

struct ModemConfig {
    std::size_t n_subcarriers = 128;
    double subcarrier_spacing = 120e3;  // Hz
    std::size_t cp_len = 16;
    std::size_t first_subcarrier = 0;   // offset of this allocation in the shared band

    double sample_rate() const { return static_cast<double>(n_subcarriers) * subcarrier_spacing; }
    std::size_t symbol_len() const { return n_subcarriers + cp_len; }
};

struct AfdmParams {
    std::size_t n = 128;
    double c1 = 0.0;
    double c2 = 0.0;
    std::size_t cp_len = 16;

    /// c1 = (2*alpha_max + 1) / (2n); c2 = sqrt(2) / (2n^2) unless disabled.
    static AfdmParams for_doppler(std::size_t n, int alpha_max, std::size_t cp_len, bool use_c2 = true);
    /// Delay-to-AF-index stride 2*n*c1 (an integer for on-grid parameter sets).
    int delay_stride() const;
    std::size_t block_len() const { return n + cp_len; }
};

struct PilotLayout {
    std::size_t pilot_index = 64;
    std::size_t guard_width = 26;       // zeroed AF indices on each side of the pilot
    double pilot_power_boost_db = 0.0;  // pilot energy relative to a data symbol
    std::size_t max_delay = 8;          // samples searched
    int alpha_max = 1;                  // Doppler bins searched on each side
    std::size_t max_paths = 16;

    double pilot_amplitude() const;
};

struct EstimatedPath {
    std::size_t delay_idx = 0;
    int doppler_idx = 0;
    cdouble gain{0.0, 0.0};
};

struct ChannelEstimate {
    std::vector<EstimatedPath> paths;
    double sample_rate = 1.0;         // Hz
    double doppler_resolution = 1.0;  // Hz per Doppler index
    bool empty() const { return paths.empty(); }
};

// QPSK with Gray mapping: bit pair (b0, b1) -> ((1-2b0) + j(1-2b1)) / sqrt(2).
CVec qpsk_modulate(std::span<const std::uint8_t> bits);
std::vector<std::uint8_t> qpsk_demodulate(std::span<const cdouble> symbols);
std::size_t count_bit_errors(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);
std::vector<std::uint8_t> random_bits(std::size_t count, Rng& rng);

/// Unitary IDFT with cyclic prefix. Input: n_subcarriers symbols. Output: symbol_len samples.
CVec ofdm_modulate(std::span<const cdouble> symbols, const ModemConfig& cfg);
/// Drops the prefix and applies the unitary DFT. Input must be exactly symbol_len samples.
CVec ofdm_demodulate(std::span<const cdouble> samples, const ModemConfig& cfg);

/// Inverse DAFT with a chirp-periodic prefix. c1 = c2 = 0 reproduces ofdm_modulate bit for bit.
CVec afdm_modulate(std::span<const cdouble> symbols, const AfdmParams& p);
/// Drops the prefix and applies the forward DAFT. Input must be exactly block_len samples.
CVec afdm_demodulate(std::span<const cdouble> samples, const AfdmParams& p);

/// Effective AF-domain matrix of a channel for a block whose first body
/// sample sits at absolute index `time_offset` (Doppler phase reference).
CMat build_af_channel_matrix(const channel::ChannelRealization& h, const AfdmParams& p, double time_offset = 0.0);

/// Reads path peaks around an embedded AF-domain pilot. Gains are referenced to
/// the first body sample of the block. Peaks with |y| <= threshold are ignored.
ChannelEstimate af_pilot_estimate(std::span<const cdouble> rx_af, const AfdmParams& p, const PilotLayout& layout,
                                  double threshold);

/// Tap set implied by an estimate, for rebuilding H_af.
channel::ChannelRealization estimate_to_realization(const ChannelEstimate& est);

/// Per-subcarrier response of the estimated taps with Doppler phase frozen at
/// `freeze_sample` (samples after the estimate's reference instant).
CVec estimate_to_tf(const ChannelEstimate& est, std::size_t n_subcarriers, double freeze_sample);

/// Scalar MMSE per subcarrier: conj(h) y / (|h|^2 + sigma^2).
CVec equalize_onetap(std::span<const cdouble> rx, std::span<const cdouble> coeffs, double noise_var);

/// Regularized least squares (H^H H + sigma^2 I)^{-1} H^H y, solved by QR of [H; sigma I].
CVec afdm_mmse_equalize(std::span<const cdouble> rx, const CMat& h, double noise_var);

struct SlpResult {
    CVec transmit;           // scaled so that ||t||^2 = power_budget
    double margin = 0.0;     // smallest normalized constructive-region distance at the receiver
    double snr_penalty_db = 0.0;  // power above the symbol-energy reference, 0 when within budget
    std::size_t iterations = 0;
};

/// Constructive-interference precoding for QPSK: minimum-power t with every
/// received component of H t on the correct side of its decision boundary by
/// at least the nominal QPSK amplitude, then scaled to the power budget.
SlpResult slp_precode(std::span<const cdouble> symbols, const CMat& h, double power_budget);

enum class Scheme { ofdm_tf_pilot, afdm_mmse, ofdm_af_pilot, afdm_slp };

std::string scheme_name(Scheme s);
Scheme parse_scheme(const std::string& name);

struct BerConfig {
    std::vector<Scheme> schemes{Scheme::ofdm_tf_pilot, Scheme::afdm_mmse, Scheme::ofdm_af_pilot, Scheme::afdm_slp};
    std::vector<double> snr_db{5.0, 10.0, 15.0};
    double speed = 40.0;  // m/s
    std::uint64_t seed = 7;
    std::size_t min_frames = 64;
    std::size_t min_bits = 100000;
    ModemConfig modem;                  // narrowband numerology
    std::size_t ofdm_data_symbols = 256;
    std::size_t af_pilot_len = 65536;   // long AF pilot block for the hybrid scheme
    int af_pilot_alpha_max = 3;
    int afdm_alpha_max = 1;
    std::size_t afdm_guard = 26;
    std::size_t afdm_blocks_per_frame = 16;
    double detection_sigmas = 3.0;
    double altitude = 100.0;
    double min_ground_range = 100.0;
    double max_ground_range = 500.0;
    channel::ChannelProfile profile;
    double carrier = 5.8e9;
};

struct BerPoint {
    Scheme scheme = Scheme::afdm_mmse;
    double snr_db = 0.0;
    double speed = 0.0;
    std::size_t frames = 0;
    std::size_t bits = 0;
    std::size_t bit_errors = 0;
    std::size_t dropped_frames = 0;
    double ber() const { return bits ? static_cast<double>(bit_errors) / static_cast<double>(bits) : 0.0; }
};

/// Doppler grid the BER harness snaps every tap to.
double ber_doppler_resolution(const BerConfig& cfg);

/// Monte-Carlo BER, one row per (scheme, SNR). Channels depend only on
/// (seed, frame), so all schemes and SNR points see the same draws.
std::vector<BerPoint> ber_experiment(const BerConfig& cfg, std::size_t threads = 1);

}  // namespace sc3::waveform

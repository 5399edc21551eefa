// SPDX-License-Identifier: Apache-2.0

#include "sc3/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sc3/fft.hpp"
#include "sc3/parallel.hpp"
#include "sc3/scene.hpp"

namespace sc3::waveform {
namespace {

// e^{j 2 pi cycles}, with the integer part removed first to keep large chirp
// phases accurate.
cdouble cis_cycles(double cycles) {
    return std::polar(1.0, kTwoPi * (cycles - std::floor(cycles)));
}

// (1/N) sum_{n<N} e^{j 2 pi n x / N}; exactly 1 or 0 at integer x.
cdouble dirichlet(double x, std::size_t n) {
    const double nn = static_cast<double>(n);
    const double r = x - std::round(x / nn) * nn;
    if (std::abs(r) < 1e-12) return {1.0, 0.0};
    if (std::abs(r - std::round(r)) < 1e-12) return {0.0, 0.0};
    const double num = std::sin(kPi * r);
    const double den = nn * std::sin(kPi * r / nn);
    return std::polar(num / den, kPi * r * (nn - 1.0) / nn);
}

void require_len(std::size_t got, std::size_t want, const char* what) {
    if (got != want)
        throw InvalidArgument(std::string(what) + ": expected " + std::to_string(want) + " samples, got " +
                              std::to_string(got));
}

}  // namespace

AfdmParams AfdmParams::for_doppler(std::size_t n, int alpha_max, std::size_t cp_len, bool use_c2) {
    if (n == 0 || alpha_max < 0) throw InvalidArgument("AfdmParams: bad size or Doppler span");
    AfdmParams p;
    p.n = n;
    p.cp_len = cp_len;
    const double nn = static_cast<double>(n);
    p.c1 = (2.0 * alpha_max + 1.0) / (2.0 * nn);
    p.c2 = use_c2 ? std::sqrt(2.0) / (2.0 * nn * nn) : 0.0;
    return p;
}

int AfdmParams::delay_stride() const {
    return static_cast<int>(std::llround(2.0 * static_cast<double>(n) * c1));
}

double PilotLayout::pilot_amplitude() const { return std::sqrt(db_to_linear(pilot_power_boost_db)); }

CVec qpsk_modulate(std::span<const std::uint8_t> bits) {
    if (bits.size() % 2) throw InvalidArgument("qpsk_modulate: odd bit count");
    const double a = 1.0 / std::sqrt(2.0);
    CVec out(bits.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = cdouble(bits[2 * i] ? -a : a, bits[2 * i + 1] ? -a : a);
    return out;
}

std::vector<std::uint8_t> qpsk_demodulate(std::span<const cdouble> symbols) {
    std::vector<std::uint8_t> bits(2 * symbols.size());
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        bits[2 * i] = symbols[i].real() < 0 ? 1 : 0;
        bits[2 * i + 1] = symbols[i].imag() < 0 ? 1 : 0;
    }
    return bits;
}

std::size_t count_bit_errors(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    if (a.size() != b.size()) throw InvalidArgument("count_bit_errors: length mismatch");
    std::size_t e = 0;
    for (std::size_t i = 0; i < a.size(); ++i) e += (a[i] != b[i]);
    return e;
}

std::vector<std::uint8_t> random_bits(std::size_t count, Rng& rng) {
    std::vector<std::uint8_t> bits(count);
    for (std::size_t i = 0; i < count; i += 64) {
        const std::uint64_t word = rng();
        for (std::size_t j = 0; j < 64 && i + j < count; ++j) bits[i + j] = (word >> j) & 1u;
    }
    return bits;
}

CVec ofdm_modulate(std::span<const cdouble> symbols, const ModemConfig& cfg) {
    const std::size_t n = cfg.n_subcarriers;
    require_len(symbols.size(), n, "ofdm_modulate");
    if (cfg.cp_len > n) throw InvalidArgument("ofdm_modulate: prefix longer than the symbol");
    const CVec body = fft::idft_unitary(symbols);
    CVec out(cfg.symbol_len());
    std::copy(body.end() - static_cast<std::ptrdiff_t>(cfg.cp_len), body.end(), out.begin());
    std::copy(body.begin(), body.end(), out.begin() + static_cast<std::ptrdiff_t>(cfg.cp_len));
    return out;
}

CVec ofdm_demodulate(std::span<const cdouble> samples, const ModemConfig& cfg) {
    require_len(samples.size(), cfg.symbol_len(), "ofdm_demodulate");
    return fft::dft_unitary(samples.subspan(cfg.cp_len));
}

CVec afdm_modulate(std::span<const cdouble> symbols, const AfdmParams& p) {
    const std::size_t n = p.n;
    require_len(symbols.size(), n, "afdm_modulate");
    if (p.cp_len > n) throw InvalidArgument("afdm_modulate: prefix longer than the block");
    // Zero chirp rates skip the multiplications entirely so the OFDM special case is bit-exact.
    CVec pre(symbols.begin(), symbols.end());
    if (p.c2 != 0.0)
        for (std::size_t m = 0; m < n; ++m) pre[m] *= cis_cycles(p.c2 * static_cast<double>(m) * static_cast<double>(m));
    CVec body = fft::idft_unitary(pre);
    if (p.c1 != 0.0)
        for (std::size_t k = 0; k < n; ++k) body[k] *= cis_cycles(p.c1 * static_cast<double>(k) * static_cast<double>(k));

    CVec out(p.block_len());
    const double nn = static_cast<double>(n);
    for (std::size_t i = 0; i < p.cp_len; ++i) {
        // Prefix sample at body index k = i - cp_len < 0.
        const double k = static_cast<double>(i) - static_cast<double>(p.cp_len);
        const cdouble v = body[n - p.cp_len + i];
        out[i] = p.c1 != 0.0 ? v * cis_cycles(-p.c1 * (nn * nn + 2.0 * nn * k)) : v;
    }
    std::copy(body.begin(), body.end(), out.begin() + static_cast<std::ptrdiff_t>(p.cp_len));
    return out;
}

CVec afdm_demodulate(std::span<const cdouble> samples, const AfdmParams& p) {
    require_len(samples.size(), p.block_len(), "afdm_demodulate");
    const std::size_t n = p.n;
    CVec r(samples.begin() + static_cast<std::ptrdiff_t>(p.cp_len), samples.end());
    if (p.c1 != 0.0)
        for (std::size_t k = 0; k < n; ++k) r[k] *= cis_cycles(-p.c1 * static_cast<double>(k) * static_cast<double>(k));
    CVec y = fft::dft_unitary(r);
    if (p.c2 != 0.0)
        for (std::size_t m = 0; m < n; ++m) y[m] *= cis_cycles(-p.c2 * static_cast<double>(m) * static_cast<double>(m));
    return y;
}

CMat build_af_channel_matrix(const channel::ChannelRealization& h, const AfdmParams& p, double time_offset) {
    const std::size_t n = p.n;
    const double nn = static_cast<double>(n);
    CMat H = CMat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::vector<cdouble> row_phase(n);
    for (std::size_t q = 0; q < n; ++q) row_phase[q] = cis_cycles(-p.c2 * static_cast<double>(q) * static_cast<double>(q));
    std::vector<cdouble> kernel(2 * n - 1);
    for (const auto& tap : h.taps) {
        const double ell = std::round(tap.delay * h.sample_rate);
        const double nu = tap.doppler * nn / h.sample_rate;
        const cdouble g = h.amplitude * tap.gain * cis_cycles(tap.doppler * time_offset / h.sample_rate);
        // Kernel depends on q - p only.
        for (std::size_t d = 0; d < kernel.size(); ++d) {
            const double diff = static_cast<double>(d) - (nn - 1.0);
            kernel[d] = dirichlet(nu + diff - 2.0 * nn * p.c1 * ell, n);
        }
        for (std::size_t q = 0; q < n; ++q) {
            const double qq = static_cast<double>(q);
            const cdouble col = g * cis_cycles(p.c1 * ell * ell - ell * qq / nn + p.c2 * qq * qq);
            for (std::size_t r = 0; r < n; ++r) {
                const cdouble k = kernel[q + n - 1 - r];
                if (k == cdouble(0.0, 0.0)) continue;
                H(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(q)) += col * row_phase[r] * k;
            }
        }
    }
    return H;
}

ChannelEstimate af_pilot_estimate(std::span<const cdouble> rx_af, const AfdmParams& p, const PilotLayout& layout,
                                  double threshold) {
    const std::size_t n = p.n;
    require_len(rx_af.size(), n, "af_pilot_estimate");
    if (layout.pilot_index >= n) throw InvalidArgument("af_pilot_estimate: pilot index out of range");
    const long stride = p.delay_stride();
    const long span = stride * static_cast<long>(layout.max_delay) + 2L * layout.alpha_max;
    if (span >= static_cast<long>(n)) throw InvalidArgument("af_pilot_estimate: search window wraps around the block");

    const double a = layout.pilot_amplitude();
    const double nn = static_cast<double>(n);
    const double mp = static_cast<double>(layout.pilot_index);
    ChannelEstimate est;
    est.sample_rate = 1.0;
    est.doppler_resolution = 1.0 / nn;
    for (std::size_t ell = 0; ell <= layout.max_delay; ++ell) {
        for (int alpha = -layout.alpha_max; alpha <= layout.alpha_max; ++alpha) {
            long idx = static_cast<long>(layout.pilot_index) + alpha - stride * static_cast<long>(ell);
            idx = ((idx % static_cast<long>(n)) + static_cast<long>(n)) % static_cast<long>(n);
            const cdouble y = rx_af[static_cast<std::size_t>(idx)];
            if (!(std::abs(y) > threshold)) continue;
            const double l = static_cast<double>(ell);
            const double pp = static_cast<double>(idx);
            const cdouble phase = cis_cycles(p.c1 * l * l - l * mp / nn + p.c2 * (mp * mp - pp * pp));
            est.paths.push_back({ell, alpha, y / (a * phase)});
        }
    }
    if (est.paths.size() > layout.max_paths) {
        std::stable_sort(est.paths.begin(), est.paths.end(),
                         [](const EstimatedPath& x, const EstimatedPath& y) { return std::abs(x.gain) > std::abs(y.gain); });
        est.paths.resize(layout.max_paths);
        std::stable_sort(est.paths.begin(), est.paths.end(), [](const EstimatedPath& x, const EstimatedPath& y) {
            return x.delay_idx != y.delay_idx ? x.delay_idx < y.delay_idx : x.doppler_idx < y.doppler_idx;
        });
    }
    return est;
}

channel::ChannelRealization estimate_to_realization(const ChannelEstimate& est) {
    channel::ChannelRealization h;
    h.sample_rate = est.sample_rate;
    for (const auto& path : est.paths)
        h.taps.push_back({path.gain, static_cast<double>(path.delay_idx) / est.sample_rate,
                          path.doppler_idx * est.doppler_resolution});
    return h;
}

CVec estimate_to_tf(const ChannelEstimate& est, std::size_t n_subcarriers, double freeze_sample) {
    if (est.empty()) throw InvalidArgument("estimate_to_tf: empty estimate");
    const double nn = static_cast<double>(n_subcarriers);
    CVec out(n_subcarriers, cdouble(0.0, 0.0));
    for (const auto& path : est.paths) {
        const double f = path.doppler_idx * est.doppler_resolution;
        const cdouble g = path.gain * cis_cycles(f * freeze_sample / est.sample_rate);
        const double ell = static_cast<double>(path.delay_idx);
        for (std::size_t k = 0; k < n_subcarriers; ++k) out[k] += g * cis_cycles(-static_cast<double>(k) * ell / nn);
    }
    return out;
}

CVec equalize_onetap(std::span<const cdouble> rx, std::span<const cdouble> coeffs, double noise_var) {
    if (rx.size() != coeffs.size()) throw InvalidArgument("equalize_onetap: length mismatch");
    CVec out(rx.size());
    for (std::size_t k = 0; k < rx.size(); ++k) {
        const cdouble h = coeffs[k];
        if (noise_var == 0.0)
            out[k] = rx[k] / h;
        else
            out[k] = std::conj(h) * rx[k] / (std::norm(h) + noise_var);
    }
    return out;
}

CVec afdm_mmse_equalize(std::span<const cdouble> rx, const CMat& h, double noise_var) {
    if (static_cast<Eigen::Index>(rx.size()) != h.rows()) throw InvalidArgument("afdm_mmse_equalize: length mismatch");
    if (noise_var < 0) throw InvalidArgument("afdm_mmse_equalize: negative noise variance");
    const Eigen::Index rows = h.rows(), cols = h.cols();
    CMat stacked = CMat::Zero(rows + cols, cols);
    stacked.topRows(rows) = h;
    stacked.bottomRows(cols).diagonal().setConstant(std::sqrt(noise_var));
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(rows + cols);
    for (Eigen::Index i = 0; i < rows; ++i) rhs(i) = rx[static_cast<std::size_t>(i)];
    Eigen::ColPivHouseholderQR<CMat> qr(stacked);
    if (qr.rank() < cols) throw SolverError("afdm_mmse_equalize: channel matrix is rank deficient");
    const Eigen::VectorXcd x = qr.solve(rhs);
    return CVec(x.data(), x.data() + x.size());
}

SlpResult slp_precode(std::span<const cdouble> symbols, const CMat& h, double power_budget) {
    const Eigen::Index n = static_cast<Eigen::Index>(symbols.size());
    if (h.rows() != n || h.cols() != n) throw InvalidArgument("slp_precode: channel must be square and match the symbols");
    if (!(power_budget > 0)) throw InvalidArgument("slp_precode: power budget must be positive");

    // Real form: z = [Re t; Im t], rows [Re(Ht); Im(Ht)], each flipped by the target sign.
    Eigen::MatrixXd g(2 * n, 2 * n);
    g << h.real(), -h.imag(), h.imag(), h.real();
    Eigen::VectorXd b(2 * n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const cdouble x = symbols[static_cast<std::size_t>(k)];
        const double sr = x.real() < 0 ? -1.0 : 1.0;
        const double si = x.imag() < 0 ? -1.0 : 1.0;
        g.row(k) *= sr;
        g.row(n + k) *= si;
        b(k) = std::abs(x.real());
        b(n + k) = std::abs(x.imag());
    }

    // Dual of min 0.5|z|^2 s.t. G z >= b, solved by projected coordinate descent.
    const Eigen::MatrixXd q = g * g.transpose();
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(2 * n);
    Eigen::VectorXd grad = -b;
    SlpResult res;
    const double tol = 1e-12 * std::max(1.0, b.cwiseAbs().maxCoeff());
    for (res.iterations = 0; res.iterations < 5000; ++res.iterations) {
        double biggest = 0.0;
        for (Eigen::Index i = 0; i < 2 * n; ++i) {
            if (q(i, i) <= 0) continue;
            const double next = std::max(0.0, mu(i) - grad(i) / q(i, i));
            const double delta = next - mu(i);
            if (delta == 0.0) continue;
            mu(i) = next;
            grad.noalias() += delta * q.col(i);
            biggest = std::max(biggest, std::abs(delta) * q(i, i));
        }
        if (biggest < tol) break;
    }

    const Eigen::VectorXd z = g.transpose() * mu;
    const double raw = z.squaredNorm();
    if (!(raw > 0)) throw SolverError("slp_precode: degenerate precoder");
    const double scale = std::sqrt(power_budget / raw);
    res.snr_penalty_db = raw > power_budget ? linear_to_db(raw / power_budget) : 0.0;
    res.transmit.resize(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) res.transmit[static_cast<std::size_t>(k)] = scale * cdouble(z(k), z(n + k));
    const Eigen::VectorXd achieved = scale * (g * z);
    res.margin = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < 2 * n; ++i)
        if (b(i) > 0) res.margin = std::min(res.margin, achieved(i) / b(i));
    return res;
}

std::string scheme_name(Scheme s) {
    switch (s) {
        case Scheme::ofdm_tf_pilot: return "OFDM-TF-pilot";
        case Scheme::afdm_mmse: return "AFDM-MMSE";
        case Scheme::ofdm_af_pilot: return "OFDM-AF-pilot";
        case Scheme::afdm_slp: return "AFDM-SLP";
    }
    return "unknown";
}

Scheme parse_scheme(const std::string& name) {
    for (Scheme s : {Scheme::ofdm_tf_pilot, Scheme::afdm_mmse, Scheme::ofdm_af_pilot, Scheme::afdm_slp})
        if (scheme_name(s) == name) return s;
    throw InvalidArgument("unknown scheme '" + name + "'");
}

// ---------------------------------------------------------------------------
// BER harness

namespace {

struct FrameResult {
    std::size_t bits = 0;
    std::size_t errors = 0;
    bool dropped = false;
};

channel::ChannelRealization draw_ber_channel(const BerConfig& cfg, std::size_t frame) {
    Rng rng = make_stream(cfg.seed, 1, frame);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double range = cfg.min_ground_range + (cfg.max_ground_range - cfg.min_ground_range) * unit(rng);
    const double bearing = kTwoPi * unit(rng);
    const double heading = kTwoPi * unit(rng);
    channel::UavState uav;
    uav.position = Vec3(0.0, 0.0, cfg.altitude);
    uav.velocity = Vec3(cfg.speed * std::cos(heading), cfg.speed * std::sin(heading), 0.0);
    const Vec3 target(range * std::cos(bearing), range * std::sin(bearing), 0.0);
    channel::LinkBudget budget;
    budget.carrier = cfg.carrier;
    const scene::Scene open;
    auto h = channel::sample_channel(uav, target, open, budget, cfg.profile, cfg.modem.sample_rate(), rng);
    h.amplitude = 1.0;
    const double res = ber_doppler_resolution(cfg);
    for (auto& t : h.taps) t.doppler = std::round(t.doppler / res) * res;
    return h;
}

std::size_t frame_bits(const BerConfig& cfg, Scheme s) {
    const std::size_t n = cfg.modem.n_subcarriers;
    switch (s) {
        case Scheme::ofdm_tf_pilot:
        case Scheme::ofdm_af_pilot: return 2 * n * cfg.ofdm_data_symbols;
        case Scheme::afdm_mmse: return 2 * (n - (2 * cfg.afdm_guard + 1)) * cfg.afdm_blocks_per_frame;
        case Scheme::afdm_slp: return 2 * n * cfg.afdm_blocks_per_frame;
    }
    return 0;
}

channel::ApplyOptions noisy(double sigma2, std::size_t max_delay) {
    channel::ApplyOptions o;
    o.noise_variance = sigma2;
    o.max_delay_samples = max_delay;
    return o;
}

std::span<const cdouble> slice(const CVec& v, std::size_t start, std::size_t len) {
    return std::span<const cdouble>(v).subspan(start, len);
}

FrameResult run_tf_pilot(const BerConfig& cfg, const channel::ChannelRealization& h, double sigma2, Rng& rng) {
    const auto& m = cfg.modem;
    const std::size_t n = m.n_subcarriers, len = m.symbol_len();
    const CVec pilot = qpsk_modulate(random_bits(2 * n, rng));
    const auto bits = random_bits(frame_bits(cfg, Scheme::ofdm_tf_pilot), rng);
    const CVec data = qpsk_modulate(bits);
    CVec tx = ofdm_modulate(pilot, m);
    for (std::size_t d = 0; d < cfg.ofdm_data_symbols; ++d) {
        const CVec sym = ofdm_modulate(slice(data, d * n, n), m);
        tx.insert(tx.end(), sym.begin(), sym.end());
    }
    const CVec rx = channel::apply_channel(tx, h, rng, noisy(sigma2, m.cp_len));

    // Least squares on the preamble, then keep only taps inside the prefix.
    CVec coeffs = ofdm_demodulate(slice(rx, 0, len), m);
    for (std::size_t k = 0; k < n; ++k) coeffs[k] /= pilot[k];
    fft::transform(coeffs, fft::Direction::inverse);
    for (std::size_t k = m.cp_len; k < n; ++k) coeffs[k] = 0.0;
    fft::transform(coeffs, fft::Direction::forward);
    for (auto& c : coeffs) c /= static_cast<double>(n);

    CVec est(data.size());
    for (std::size_t d = 0; d < cfg.ofdm_data_symbols; ++d) {
        const CVec y = ofdm_demodulate(slice(rx, (d + 1) * len, len), m);
        const CVec x = equalize_onetap(y, coeffs, sigma2);
        std::copy(x.begin(), x.end(), est.begin() + static_cast<std::ptrdiff_t>(d * n));
    }
    return {bits.size(), count_bit_errors(bits, qpsk_demodulate(est)), false};
}

FrameResult run_af_pilot(const BerConfig& cfg, const channel::ChannelRealization& h, double sigma2, Rng& rng) {
    const auto& m = cfg.modem;
    const std::size_t n = m.n_subcarriers, len = m.symbol_len();
    const AfdmParams ap = AfdmParams::for_doppler(cfg.af_pilot_len, cfg.af_pilot_alpha_max, m.cp_len);
    PilotLayout layout;
    layout.pilot_index = cfg.af_pilot_len / 2;
    layout.guard_width = 0;
    layout.pilot_power_boost_db = linear_to_db(static_cast<double>(cfg.af_pilot_len));
    layout.max_delay = m.cp_len - 1;
    layout.alpha_max = cfg.af_pilot_alpha_max;

    CVec pilot(cfg.af_pilot_len, cdouble(0.0, 0.0));
    pilot[layout.pilot_index] = layout.pilot_amplitude();
    CVec tx = afdm_modulate(pilot, ap);
    const std::size_t data_start = tx.size();
    const auto bits = random_bits(frame_bits(cfg, Scheme::ofdm_af_pilot), rng);
    const CVec data = qpsk_modulate(bits);
    for (std::size_t d = 0; d < cfg.ofdm_data_symbols; ++d) {
        const CVec sym = ofdm_modulate(slice(data, d * n, n), m);
        tx.insert(tx.end(), sym.begin(), sym.end());
    }
    const CVec rx = channel::apply_channel(tx, h, rng, noisy(sigma2, m.cp_len));

    const CVec rx_af = afdm_demodulate(slice(rx, 0, ap.block_len()), ap);
    ChannelEstimate est = af_pilot_estimate(rx_af, ap, layout, cfg.detection_sigmas * std::sqrt(sigma2));
    if (est.empty()) return {bits.size(), bits.size(), true};
    est.sample_rate = m.sample_rate();
    est.doppler_resolution = m.sample_rate() / static_cast<double>(cfg.af_pilot_len);

    CVec x_hat(data.size());
    for (std::size_t d = 0; d < cfg.ofdm_data_symbols; ++d) {
        const std::size_t start = data_start + d * len;
        // Body midpoint of this symbol, measured from the pilot block's first body sample.
        const double freeze = static_cast<double>(start + m.cp_len - ap.cp_len) + (static_cast<double>(n) - 1.0) / 2.0;
        const CVec coeffs = estimate_to_tf(est, n, freeze);
        const CVec y = ofdm_demodulate(slice(rx, start, len), m);
        const CVec x = equalize_onetap(y, coeffs, sigma2);
        std::copy(x.begin(), x.end(), x_hat.begin() + static_cast<std::ptrdiff_t>(d * n));
    }
    return {bits.size(), count_bit_errors(bits, qpsk_demodulate(x_hat)), false};
}

FrameResult run_afdm_mmse(const BerConfig& cfg, const channel::ChannelRealization& h, double sigma2, Rng& rng) {
    const auto& m = cfg.modem;
    const std::size_t n = m.n_subcarriers;
    const AfdmParams ap = AfdmParams::for_doppler(n, cfg.afdm_alpha_max, m.cp_len);
    PilotLayout layout;
    layout.pilot_index = n / 2;
    layout.guard_width = cfg.afdm_guard;
    layout.pilot_power_boost_db = linear_to_db(static_cast<double>(2 * cfg.afdm_guard + 1));
    layout.max_delay = cfg.profile.max_delay_samples;
    layout.alpha_max = cfg.afdm_alpha_max;
    const double a = layout.pilot_amplitude();

    std::vector<Eigen::Index> data_idx;
    for (std::size_t q = 0; q < n; ++q) {
        const auto off = static_cast<long>(q) - static_cast<long>(layout.pilot_index);
        if (static_cast<std::size_t>(std::labs(off)) > layout.guard_width) data_idx.push_back(static_cast<Eigen::Index>(q));
    }
    const std::size_t per_block = data_idx.size();
    const auto bits = random_bits(frame_bits(cfg, Scheme::afdm_mmse), rng);
    const CVec data = qpsk_modulate(bits);

    CVec tx;
    for (std::size_t b = 0; b < cfg.afdm_blocks_per_frame; ++b) {
        CVec x(n, cdouble(0.0, 0.0));
        x[layout.pilot_index] = a;
        for (std::size_t i = 0; i < per_block; ++i) x[static_cast<std::size_t>(data_idx[i])] = data[b * per_block + i];
        const CVec s = afdm_modulate(x, ap);
        tx.insert(tx.end(), s.begin(), s.end());
    }
    const CVec rx = channel::apply_channel(tx, h, rng, noisy(sigma2, m.cp_len));

    CVec x_hat(data.size());
    FrameResult out{bits.size(), 0, false};
    for (std::size_t b = 0; b < cfg.afdm_blocks_per_frame; ++b) {
        const CVec y = afdm_demodulate(slice(rx, b * ap.block_len(), ap.block_len()), ap);
        ChannelEstimate est = af_pilot_estimate(y, ap, layout, cfg.detection_sigmas * std::sqrt(sigma2));
        bool ok = !est.empty();
        if (ok) {
            est.sample_rate = m.sample_rate();
            est.doppler_resolution = m.sample_rate() / static_cast<double>(n);
            const CMat H = build_af_channel_matrix(estimate_to_realization(est), ap);
            Eigen::VectorXcd resid(static_cast<Eigen::Index>(n));
            for (std::size_t i = 0; i < n; ++i) resid(static_cast<Eigen::Index>(i)) = y[i];
            resid -= a * H.col(static_cast<Eigen::Index>(layout.pilot_index));
            const CMat hd = H(Eigen::all, data_idx);
            try {
                const CVec x = afdm_mmse_equalize(std::span<const cdouble>(resid.data(), n), hd, sigma2);
                std::copy(x.begin(), x.end(), x_hat.begin() + static_cast<std::ptrdiff_t>(b * per_block));
            } catch (const SolverError&) {
                ok = false;
            }
        }
        if (!ok) {
            // Outage: every bit of the block counts as an error.
            out.dropped = true;
            for (std::size_t i = 0; i < per_block; ++i) {
                const cdouble s = data[b * per_block + i];
                x_hat[b * per_block + i] = -s;
            }
        }
    }
    out.errors = count_bit_errors(bits, qpsk_demodulate(x_hat));
    return out;
}

FrameResult run_slp(const BerConfig& cfg, const channel::ChannelRealization& h, double sigma2, Rng& rng) {
    const auto& m = cfg.modem;
    const std::size_t n = m.n_subcarriers;
    const AfdmParams ap = AfdmParams::for_doppler(n, cfg.afdm_alpha_max, m.cp_len);
    const auto bits = random_bits(frame_bits(cfg, Scheme::afdm_slp), rng);
    const CVec data = qpsk_modulate(bits);
    CVec tx;
    for (std::size_t b = 0; b < cfg.afdm_blocks_per_frame; ++b) {
        const double body_start = static_cast<double>(b * ap.block_len() + ap.cp_len);
        const CMat H = build_af_channel_matrix(h, ap, body_start);
        const SlpResult pre = slp_precode(slice(data, b * n, n), H, static_cast<double>(n));
        const CVec s = afdm_modulate(pre.transmit, ap);
        tx.insert(tx.end(), s.begin(), s.end());
    }
    const CVec rx = channel::apply_channel(tx, h, rng, noisy(sigma2, m.cp_len));
    CVec y_all;
    for (std::size_t b = 0; b < cfg.afdm_blocks_per_frame; ++b) {
        const CVec y = afdm_demodulate(slice(rx, b * ap.block_len(), ap.block_len()), ap);
        y_all.insert(y_all.end(), y.begin(), y.end());
    }
    return {bits.size(), count_bit_errors(bits, qpsk_demodulate(y_all)), false};
}

}  // namespace

double ber_doppler_resolution(const BerConfig& cfg) {
    return cfg.modem.sample_rate() / static_cast<double>(cfg.af_pilot_len);
}

std::vector<BerPoint> ber_experiment(const BerConfig& cfg, std::size_t threads) {
    if (cfg.speed < 0 || cfg.speed > 40.0 + 1e-9) throw InvalidArgument("ber_experiment: speed must lie in [0, 40] m/s");
    if (cfg.modem.cp_len < cfg.profile.max_delay_samples)
        throw InvalidArgument("ber_experiment: prefix shorter than the channel delay spread");
    std::vector<BerPoint> rows;
    for (std::size_t si = 0; si < cfg.schemes.size(); ++si) {
        const Scheme scheme = cfg.schemes[si];
        const std::size_t bpf = frame_bits(cfg, scheme);
        const std::size_t frames = std::max(cfg.min_frames, (cfg.min_bits + bpf - 1) / bpf);
        for (std::size_t pi = 0; pi < cfg.snr_db.size(); ++pi) {
            const double sigma2 = db_to_linear(-cfg.snr_db[pi]);
            std::vector<FrameResult> results(frames);
            parallel_for(frames, threads, [&](std::size_t f) {
                const auto h = draw_ber_channel(cfg, f);
                Rng rng = make_stream(cfg.seed, 100 + 16 * pi + static_cast<std::uint64_t>(scheme), f);
                switch (scheme) {
                    case Scheme::ofdm_tf_pilot: results[f] = run_tf_pilot(cfg, h, sigma2, rng); break;
                    case Scheme::ofdm_af_pilot: results[f] = run_af_pilot(cfg, h, sigma2, rng); break;
                    case Scheme::afdm_mmse: results[f] = run_afdm_mmse(cfg, h, sigma2, rng); break;
                    case Scheme::afdm_slp: results[f] = run_slp(cfg, h, sigma2, rng); break;
                }
            });
            BerPoint row;
            row.scheme = scheme;
            row.snr_db = cfg.snr_db[pi];
            row.speed = cfg.speed;
            row.frames = frames;
            for (const auto& r : results) {
                row.bits += r.bits;
                row.bit_errors += r.errors;
                row.dropped_frames += r.dropped;
            }
            rows.push_back(row);
        }
    }
    return rows;
}

}  // namespace sc3::waveform

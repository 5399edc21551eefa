#include <doctest.h>

#include <algorithm>

#include "oracles.hpp"
#include "sc3/waveform.hpp"

using namespace sc3;
using namespace sc3::waveform;

namespace {

CVec random_symbols(std::size_t n, Rng& rng) { return qpsk_modulate(random_bits(2 * n, rng)); }

double max_abs_diff(const CVec& a, const CVec& b) {
    REQUIRE(a.size() == b.size());
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

Eigen::VectorXcd to_eigen(const CVec& v) {
    Eigen::VectorXcd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
    return out;
}

// Random doubly-dispersive taps inside the prefix, Doppler within +-alpha_max bins.
channel::ChannelRealization random_channel(std::size_t n, std::size_t max_delay, int alpha_max, bool integer_doppler,
                                           Rng& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<std::size_t> d(0, max_delay);
    channel::ChannelRealization h;
    h.sample_rate = 1e6;
    const std::size_t paths = 1 + d(rng) % 3;
    for (std::size_t p = 0; p < paths; ++p) {
        double nu = alpha_max * u(rng);
        if (integer_doppler) nu = std::round(nu);
        h.taps.push_back({cdouble(u(rng), u(rng)), static_cast<double>(d(rng)) / h.sample_rate,
                          nu * h.sample_rate / static_cast<double>(n)});
    }
    return h;
}

}  // namespace

TEST_SUITE("waveform") {
    TEST_CASE("qpsk gray mapping round trip") {
        const std::vector<std::uint8_t> bits{0, 0, 0, 1, 1, 0, 1, 1};
        const auto s = qpsk_modulate(bits);
        CHECK(s[0].real() > 0);
        CHECK(s[0].imag() > 0);
        CHECK(s[3].real() < 0);
        CHECK(s[3].imag() < 0);
        for (const auto& x : s) CHECK(std::norm(x) == doctest::Approx(1.0));
        CHECK(qpsk_demodulate(s) == bits);
        CHECK(count_bit_errors(bits, qpsk_demodulate(s)) == 0);
    }

    TEST_CASE("ofdm and afdm noiseless round trips") {
        Rng rng(11);
        for (std::size_t n : {16u, 64u, 128u}) {
            const CVec x = random_symbols(n, rng);
            ModemConfig m{n, 120e3, n / 8, 0};
            CHECK(max_abs_diff(ofdm_demodulate(ofdm_modulate(x, m), m), x) < 1e-10);
            const auto p = AfdmParams::for_doppler(n, 1, n / 8);
            CHECK(max_abs_diff(afdm_demodulate(afdm_modulate(x, p), p), x) < 1e-10);
        }
    }

    TEST_CASE("daft is unitary and matches the dense definition") {
        for (std::size_t n : {16u, 64u, 128u}) {
            auto p = AfdmParams::for_doppler(n, 2, 0);
            Eigen::MatrixXcd a(n, n);
            for (std::size_t k = 0; k < n; ++k) {
                CVec e(n, cdouble(0.0, 0.0));
                e[k] = 1.0;
                const CVec col = afdm_demodulate(e, p);
                for (std::size_t m = 0; m < n; ++m) a(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) = col[m];
            }
            const Eigen::MatrixXcd g = a.adjoint() * a - Eigen::MatrixXcd::Identity(n, n);
            CHECK(g.cwiseAbs().maxCoeff() < 1e-9);
            CHECK((a - oracle::daft_matrix(n, p.c1, p.c2)).cwiseAbs().maxCoeff() < 1e-9);
        }
    }

    TEST_CASE("zero chirp afdm is bit-identical to ofdm") {
        Rng rng(5);
        for (std::size_t n : {16u, 128u}) {
            const CVec x = random_symbols(n, rng);
            AfdmParams p{n, 0.0, 0.0, 16};
            ModemConfig m{n, 120e3, 16, 0};
            const CVec a = afdm_modulate(x, p);
            const CVec o = ofdm_modulate(x, m);
            REQUIRE(a.size() == o.size());
            CHECK(std::equal(a.begin(), a.end(), o.begin()));
            const CVec ad = afdm_demodulate(a, p);
            const CVec od = ofdm_demodulate(o, m);
            CHECK(std::equal(ad.begin(), ad.end(), od.begin()));
        }
    }

    TEST_CASE("chirp-periodic prefix makes the block look circular") {
        const std::size_t n = 32;
        const auto p = AfdmParams::for_doppler(n, 1, 8);
        Rng rng(2);
        const CVec s = afdm_modulate(random_symbols(n, rng), p);
        // s[-k] = s[N-k] e^{-j2pi c1 (N^2 - 2Nk)}
        for (std::size_t i = 0; i < p.cp_len; ++i) {
            const double k = static_cast<double>(p.cp_len - i);
            const double nn = static_cast<double>(n);
            const cdouble want = s[p.cp_len + n - (p.cp_len - i)] * oracle::cis(-p.c1 * (nn * nn - 2.0 * nn * k));
            CHECK(std::abs(s[i] - want) < 1e-10);
        }
    }

    TEST_CASE("closed-form af channel matrix matches column probing") {
        Rng rng(3);
        for (std::size_t n : {8u, 16u, 32u}) {
            for (int trial = 0; trial < 6; ++trial) {
                const std::size_t cp = n / 4;
                const bool integer = trial % 2 == 0;
                const auto p = AfdmParams::for_doppler(n, 1, cp, trial % 3 != 2);
                const auto h = random_channel(n, cp - 1, 1, integer, rng);
                const auto closed = build_af_channel_matrix(h, p);
                channel::ApplyOptions opt;
                opt.add_noise = false;
                opt.time_offset = -static_cast<double>(cp);  // body sample 0 at t = 0
                double worst = 0.0;
                for (std::size_t q = 0; q < n; ++q) {
                    CVec e(n, cdouble(0.0, 0.0));
                    e[q] = 1.0;
                    const CVec rx = channel::apply_channel(afdm_modulate(e, p), h, rng, opt);
                    const CVec col = afdm_demodulate(std::span<const cdouble>(rx).first(p.block_len()), p);
                    for (std::size_t r = 0; r < n; ++r)
                        worst = std::max(worst, std::abs(closed(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(q)) - col[r]));
                }
                CHECK(worst < 1e-9);
            }
        }
    }

    TEST_CASE("mmse equalizer matches the dense inverse") {
        Rng rng(9);
        std::normal_distribution<double> g(0.0, 1.0);
        for (auto [rows, cols] : {std::pair{16, 16}, std::pair{32, 20}, std::pair{64, 64}}) {
            Eigen::MatrixXcd h(rows, cols);
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j) h(i, j) = cdouble(g(rng), g(rng));
            CVec y(static_cast<std::size_t>(rows));
            for (auto& v : y) v = cdouble(g(rng), g(rng));
            for (double s2 : {1e-3, 0.1, 1.0}) {
                const CVec x = afdm_mmse_equalize(y, h, s2);
                const Eigen::VectorXcd ref = oracle::mmse_dense(h, to_eigen(y), s2);
                double worst = 0.0;
                for (int i = 0; i < cols; ++i) worst = std::max(worst, std::abs(x[static_cast<std::size_t>(i)] - ref(i)));
                CHECK(worst < 1e-8);
            }
        }
    }

    TEST_CASE("one-tap equalizer is the scalar mmse") {
        const CVec y{cdouble(1, 1), cdouble(0, 2)};
        const CVec h{cdouble(2, 0), cdouble(0, 1)};
        const CVec x = equalize_onetap(y, h, 0.5);
        CHECK(std::abs(x[0] - std::conj(h[0]) * y[0] / (4.0 + 0.5)) < 1e-15);
        CHECK(std::abs(x[1] - std::conj(h[1]) * y[1] / (1.0 + 0.5)) < 1e-15);
    }

    TEST_CASE("af pilot recovers on-grid paths without noise") {
        const std::size_t n = 128;
        const auto p = AfdmParams::for_doppler(n, 1, 16);
        PilotLayout layout;
        layout.pilot_index = n / 2;
        layout.guard_width = 26;
        layout.max_delay = 8;
        layout.alpha_max = 1;
        channel::ChannelRealization h;
        h.sample_rate = 15.36e6;
        const double bin = h.sample_rate / static_cast<double>(n);
        h.taps = {{cdouble(0.8, 0.1), 0.0, bin}, {cdouble(-0.2, 0.3), 3.0 / h.sample_rate, -bin}};
        CVec x(n, cdouble(0.0, 0.0));
        x[layout.pilot_index] = layout.pilot_amplitude();
        channel::ApplyOptions opt;
        opt.add_noise = false;
        opt.time_offset = -16.0;
        Rng rng(1);
        const CVec rx = channel::apply_channel(afdm_modulate(x, p), h, rng, opt);
        const auto est = af_pilot_estimate(afdm_demodulate(std::span<const cdouble>(rx).first(p.block_len()), p), p,
                                           layout, 1e-6);
        REQUIRE(est.paths.size() == 2);
        for (const auto& e : est.paths) {
            if (e.delay_idx == 0) {
                CHECK(e.doppler_idx == 1);
                CHECK(std::abs(e.gain - h.taps[0].gain) < 1e-9);
            } else {
                CHECK(e.delay_idx == 3);
                CHECK(e.doppler_idx == -1);
                CHECK(std::abs(e.gain - h.taps[1].gain) < 1e-9);
            }
        }
    }

    TEST_CASE("slp lands every symbol in its constructive region") {
        Rng rng(4);
        std::normal_distribution<double> g(0.0, 1.0);
        const std::size_t n = 16;
        Eigen::MatrixXcd h(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cdouble(g(rng), g(rng)) / std::sqrt(2.0 * n);
        const CVec s = random_symbols(n, rng);
        const auto r = slp_precode(s, h, static_cast<double>(n));
        double energy = 0.0;
        for (const auto& v : r.transmit) energy += std::norm(v);
        CHECK(energy == doctest::Approx(static_cast<double>(n)).epsilon(1e-9));
        CHECK(r.margin > 0.0);
        Eigen::VectorXcd t(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) t(static_cast<Eigen::Index>(i)) = r.transmit[i];
        const Eigen::VectorXcd y = h * t;
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(y(static_cast<Eigen::Index>(i)).real() * s[i].real() > 0.0);
            CHECK(y(static_cast<Eigen::Index>(i)).imag() * s[i].imag() > 0.0);
        }
    }

    TEST_CASE("scheme names round trip") {
        for (auto s : {Scheme::ofdm_tf_pilot, Scheme::afdm_mmse, Scheme::ofdm_af_pilot, Scheme::afdm_slp})
            CHECK(parse_scheme(scheme_name(s)) == s);
        CHECK_THROWS_AS(parse_scheme("bogus"), InvalidArgument);
    }

    TEST_CASE("ber harness shape and thread independence") {
        BerConfig cfg;
        cfg.min_frames = 2;
        cfg.min_bits = 1;
        cfg.af_pilot_len = 4096;
        cfg.snr_db = {5.0, 15.0};
        const auto a = ber_experiment(cfg, 1);
        const auto b = ber_experiment(cfg, 3);
        REQUIRE(a.size() == 4 * cfg.snr_db.size());
        REQUIRE(b.size() == a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].scheme == b[i].scheme);
            CHECK(a[i].bit_errors == b[i].bit_errors);
            CHECK(a[i].bits == b[i].bits);
            CHECK(a[i].frames >= cfg.min_frames);
        }
    }

    TEST_CASE("malformed inputs are rejected") {
        ModemConfig m{16, 120e3, 4, 0};
        CVec short_in(5);
        CHECK_THROWS_AS(ofdm_modulate(short_in, m), InvalidArgument);
        CHECK_THROWS_AS(ofdm_demodulate(short_in, m), InvalidArgument);
        AfdmParams p{16, 0.0, 0.0, 32};
        CHECK_THROWS_AS(afdm_modulate(CVec(16), p), InvalidArgument);
    }
}

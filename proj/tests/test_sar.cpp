#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "sc3/sar.hpp"
#include "sc3/scene.hpp"

using namespace sc3;
using namespace sc3::sar;

namespace {

scene::ScattererSet points(std::initializer_list<Vec3> ps, double sigma = 1.0) {
    scene::ScattererSet s;
    for (const auto& p : ps) s.push_back({p, sigma, Vec3::Zero()});
    return s;
}

// -3 dB width of |p|^2 around its maximum, linear interpolation between samples.
double half_power_width(const CVec& p, double bin) {
    std::vector<double> a(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) a[i] = std::norm(p[i]);
    const auto peak = static_cast<std::size_t>(std::max_element(a.begin(), a.end()) - a.begin());
    const double half = 0.5 * a[peak];
    std::size_t l = peak, r = peak;
    while (a[l - 1] >= half) --l;
    while (a[r + 1] >= half) ++r;
    const double left = static_cast<double>(l) - (a[l] - half) / (a[l] - a[l - 1]);
    const double right = static_cast<double>(r) + (a[r] - half) / (a[r] - a[r + 1]);
    return (right - left) * bin;
}

}  // namespace

TEST_SUITE("sar") {
    TEST_CASE("echo synthesis is linear in the scatterers") {
        SarConfig cfg;
        cfg.n_subcarriers = 64;
        const auto track = straight_track(Vec3(0, 0, 100), Vec3(1, 0, 0), 2.0, 0.5);
        Rng rng(1);
        const auto a = points({Vec3(1, 150, 0)});
        const auto b = points({Vec3(-3, 170, 2)}, 0.5);
        auto ab = a;
        ab.insert(ab.end(), b.begin(), b.end());
        const auto ea = synthesize_echoes(track, a, cfg, rng);
        const auto eb = synthesize_echoes(track, b, cfg, rng);
        const auto eab = synthesize_echoes(track, ab, cfg, rng);
        const auto e2 = synthesize_echoes(track, points({Vec3(1, 150, 0)}, 2.0), cfg, rng);
        for (std::size_t p = 0; p < track.size(); ++p)
            for (std::size_t k = 0; k < cfg.n_subcarriers; ++k) {
                CHECK(std::abs(eab.rows[p][k] - ea.rows[p][k] - eb.rows[p][k]) < 1e-10 * std::abs(ea.rows[p][k]));
                CHECK(std::abs(e2.rows[p][k] - 2.0 * ea.rows[p][k]) < 1e-15);
            }
        // single echo against the closed form
        const double r = (track[0] - a[0].position).norm();
        const cdouble expect = std::polar(1.0 / (r * r), -4.0 * kPi * cfg.subcarrier_frequency(5) * r / kSpeedOfLight);
        CHECK(std::abs(ea.rows[0][5] - expect) < 1e-12 * std::abs(expect));
    }

    TEST_CASE("range resolution tracks c / 2B") {
        for (std::size_t n : {300u, 600u, 1200u}) {
            SarConfig cfg;
            cfg.n_subcarriers = n;
            cfg.oversample = 8;
            Rng rng(2);
            const Vec3 pos(0, 0, 0);
            const double range = 212.3;
            const auto e = synthesize_echoes({pos}, points({Vec3(0, range, 0)}), cfg, rng);
            const CVec prof = range_compress(e.rows[0], cfg);
            const double width = half_power_width(prof, cfg.range_bin());
            const double nominal = kSpeedOfLight / (2.0 * cfg.bandwidth());
            CHECK(width / nominal == doctest::Approx(1.0).epsilon(0.25));
            std::size_t peak = 0;
            for (std::size_t i = 1; i < prof.size(); ++i)
                if (std::abs(prof[i]) > std::abs(prof[peak])) peak = i;
            CHECK(std::abs(static_cast<double>(peak) * cfg.range_bin() - range) <= 0.5 * cfg.range_bin() + 1e-9);
        }
    }

    TEST_CASE("back projection focuses a point and is scale invariant") {
        SarConfig cfg;
        cfg.n_subcarriers = 600;
        cfg.oversample = 8;
        cfg.grid = ImageGrid{Vec2(-6.4, 93.6), 0.1, 128, 128, 0.0};
        const Vec3 target(0.03, 100.02, 0.0);
        const double spacing = cfg.wavelength() / 4.0;
        const double len = aperture_for_resolution(cfg, 100.0 * std::sqrt(2.0), 1.0);
        CHECK(len == doctest::Approx(cfg.wavelength() * 100.0 * std::sqrt(2.0) / 2.0));
        const auto track = straight_track(Vec3(-len / 2, 0, 100), Vec3(1, 0, 0), len, spacing);
        Rng rng(3);
        const auto e1 = synthesize_echoes(track, points({target}), cfg, rng);
        const auto e3 = synthesize_echoes(track, points({target}, 3.0), cfg, rng);
        const auto i1 = back_project(e1, cfg);
        const auto i3 = back_project(e3, cfg);
        double diff = 0.0;
        for (std::size_t i = 0; i < i1.intensity.size(); ++i) diff = std::max(diff, std::abs(i1.intensity[i] - i3.intensity[i]));
        CHECK(diff < 1e-12);
        CHECK(i3.peak_value == doctest::Approx(9.0 * i1.peak_value));
        const auto rep = resolution_report(i1, target);
        CHECK(rep.peak_error <= 0.5 * std::sqrt(2.0) * cfg.grid.pixel);
        CHECK(rep.azimuth_width == doctest::Approx(0.886).epsilon(0.25));
        const auto two = back_project(e1, cfg, 2);
        CHECK(two.intensity == i1.intensity);
    }

    TEST_CASE("occupancy from an image") {
        SarImage img;
        img.grid = ImageGrid{Vec2(0, 0), 1.0, 10, 10, 0.0};
        img.intensity.assign(100, 0.0);
        img.intensity[5 * 10 + 5] = 1.0;
        img.intensity[5 * 10 + 6] = 0.5;
        const auto g = image_to_occupancy(img, 0.4);
        CHECK(g.count() == 2);
        CHECK(image_to_occupancy(img, 0.6).count() == 1);
        CHECK(image_to_occupancy(img, 0.6, 1.0).count() == 5);
    }

    TEST_CASE("malformed inputs throw") {
        SarConfig cfg;
        EchoBuffer b;
        CHECK_THROWS_AS(back_project(b, cfg), InvalidArgument);
        CVec row(3);
        CHECK_THROWS_AS(range_compress(row, cfg), InvalidArgument);
    }
}

// SPDX-License-Identifier: Apache-2.0

#include "sc3/sar.hpp"

#include <algorithm>
#include <cmath>

#include "sc3/channel.hpp"
#include "sc3/fft.hpp"
#include "sc3/parallel.hpp"

namespace sc3::sar {

double SarConfig::range_bin() const {
    return kSpeedOfLight / (2.0 * subcarrier_spacing * static_cast<double>(profile_len()));
}

double SarConfig::subcarrier_frequency(std::size_t k) const {
    return carrier + (static_cast<double>(k) - static_cast<double>(n_subcarriers / 2)) * subcarrier_spacing;
}

Vec2 SarImage::pixel_center(std::size_t ix, std::size_t iy) const {
    return grid.origin + Vec2((static_cast<double>(ix) + 0.5) * grid.pixel, (static_cast<double>(iy) + 0.5) * grid.pixel);
}

std::vector<Vec3> straight_track(const Vec3& start, const Vec3& direction, double length, double spacing) {
    if (!(spacing > 0) || length < 0) throw InvalidArgument("straight_track: bad spacing or length");
    const Vec3 u = direction.normalized();
    const auto count = static_cast<std::size_t>(std::floor(length / spacing + 1e-9)) + 1;
    std::vector<Vec3> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(start + u * (static_cast<double>(i) * spacing));
    return out;
}

double aperture_for_resolution(const SarConfig& cfg, double range, double resolution) {
    return cfg.wavelength() * range / (2.0 * resolution);
}

EchoBuffer synthesize_echoes(const std::vector<Vec3>& trajectory, const scene::ScattererSet& scatterers,
                             const SarConfig& cfg, Rng& rng, const EchoOptions& opts,
                             const std::vector<double>& times) {
    if (!times.empty() && times.size() != trajectory.size())
        throw InvalidArgument("synthesize_echoes: one time stamp per position required");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw InvalidArgument("synthesize_echoes: positions must be strictly time-ordered");

    const std::size_t n = cfg.n_subcarriers;
    EchoBuffer buf;
    buf.positions = trajectory;
    buf.times = times;
    if (buf.times.empty())
        for (std::size_t i = 0; i < trajectory.size(); ++i) buf.times.push_back(static_cast<double>(i));
    buf.rows.assign(trajectory.size(), CVec(n, cdouble(0.0, 0.0)));

    const double f0 = cfg.subcarrier_frequency(0);
    parallel_for(trajectory.size(), opts.threads, [&](std::size_t p) {
        const Vec3& pos = trajectory[p];
        CVec& row = buf.rows[p];
        for (const auto& s : scatterers) {
            if (opts.occluders) {
                const Vec3 off = s.position - pos;
                if (s.normal.squaredNorm() > 0 && s.normal.dot(off) >= 0) continue;  // back face
                if (!scene::is_los(pos, s.position + 1e-3 * s.normal, *opts.occluders)) continue;
            }
            const double r = (s.position - pos).norm();
            const double k = 4.0 * kPi / kSpeedOfLight * r;
            // Phase recurrence over subcarriers, resynchronized every 64 steps.
            const cdouble step = std::polar(1.0, -k * cfg.subcarrier_spacing);
            const double amp = s.reflectivity / (r * r);
            cdouble ph;
            for (std::size_t i = 0; i < n; ++i) {
                if (i % 64 == 0) ph = std::polar(amp, -std::fmod(k * (f0 + static_cast<double>(i) * cfg.subcarrier_spacing), kTwoPi));
                row[i] += ph;
                ph *= step;
            }
        }
    });
    if (opts.noise_variance > 0)
        for (auto& row : buf.rows) channel::add_awgn(row, opts.noise_variance, rng);
    return buf;
}

CVec range_compress(std::span<const cdouble> row, const SarConfig& cfg) {
    const std::size_t n = cfg.n_subcarriers, m = cfg.profile_len();
    if (row.size() != n) throw InvalidArgument("range_compress: row length does not match the subcarrier count");
    CVec prof(m, cdouble(0.0, 0.0));
    const long half = static_cast<long>(n / 2);
    for (std::size_t k = 0; k < n; ++k) {
        const long base = static_cast<long>(k) - half;
        const long idx = ((base % static_cast<long>(m)) + static_cast<long>(m)) % static_cast<long>(m);
        prof[static_cast<std::size_t>(idx)] = row[k];
    }
    fft::transform(prof, fft::Direction::inverse);
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& v : prof) v *= scale;
    return prof;
}

SarImage back_project(const EchoBuffer& buf, const SarConfig& cfg, std::size_t threads) {
    if (buf.positions.size() < 2) throw InvalidArgument("back_project: at least two positions are required");
    if (buf.rows.size() != buf.positions.size()) throw InvalidArgument("back_project: one echo row per position");
    const auto& g = cfg.grid;
    const std::size_t m = cfg.profile_len();
    const double inv_bin = 1.0 / cfg.range_bin();
    const double k0 = 4.0 * kPi * cfg.carrier / kSpeedOfLight;
    std::vector<cdouble> acc(g.nx * g.ny, cdouble(0.0, 0.0));

    // Profiles are formed in chunks so memory stays bounded; pixel rows are
    // split across workers and each pixel sums positions in index order.
    const std::size_t chunk = 256;
    std::vector<CVec> profiles;
    for (std::size_t first = 0; first < buf.positions.size(); first += chunk) {
        const std::size_t count = std::min(chunk, buf.positions.size() - first);
        profiles.assign(count, CVec());
        parallel_for(count, threads, [&](std::size_t i) { profiles[i] = range_compress(buf.rows[first + i], cfg); });
        parallel_for(g.ny, threads, [&](std::size_t iy) {
            const double y = g.origin.y() + (static_cast<double>(iy) + 0.5) * g.pixel;
            for (std::size_t i = 0; i < count; ++i) {
                const Vec3& p = buf.positions[first + i];
                const CVec& prof = profiles[i];
                const double dy = y - p.y(), dz = g.height - p.z();
                const double base = dy * dy + dz * dz;
                for (std::size_t ix = 0; ix < g.nx; ++ix) {
                    const double dx = g.origin.x() + (static_cast<double>(ix) + 0.5) * g.pixel - p.x();
                    const double r = std::sqrt(dx * dx + base);
                    const auto bin = static_cast<std::size_t>(std::llround(r * inv_bin)) % m;
                    acc[iy * g.nx + ix] += prof[bin] * std::polar(1.0, std::fmod(k0 * r, kTwoPi));
                }
            }
        });
    }

    SarImage img;
    img.grid = g;
    img.intensity.resize(acc.size());
    double peak = 0.0;
    for (std::size_t i = 0; i < acc.size(); ++i) {
        img.intensity[i] = std::norm(acc[i]);
        peak = std::max(peak, img.intensity[i]);
    }
    img.peak_value = peak;
    if (peak > 0)
        for (auto& v : img.intensity) v /= peak;
    img.peak_normalized = true;
    Vec3 c = Vec3::Zero();
    for (const auto& p : buf.positions) c += p;
    img.aperture_center = c / static_cast<double>(buf.positions.size());
    return img;
}

namespace {

double bilinear(const SarImage& img, const Vec2& w) {
    const auto& g = img.grid;
    const double fx = (w.x() - g.origin.x()) / g.pixel - 0.5;
    const double fy = (w.y() - g.origin.y()) / g.pixel - 0.5;
    if (fx < 0 || fy < 0 || fx > static_cast<double>(g.nx - 1) || fy > static_cast<double>(g.ny - 1)) return 0.0;
    const auto x0 = std::min(static_cast<std::size_t>(fx), g.nx - 2);
    const auto y0 = std::min(static_cast<std::size_t>(fy), g.ny - 2);
    const double tx = fx - static_cast<double>(x0), ty = fy - static_cast<double>(y0);
    return (1 - tx) * (1 - ty) * img.at(x0, y0) + tx * (1 - ty) * img.at(x0 + 1, y0) +
           (1 - tx) * ty * img.at(x0, y0 + 1) + tx * ty * img.at(x0 + 1, y0 + 1);
}

// Distance from `centre` along `dir` to the first crossing of `level`.
double half_width(const SarImage& img, const Vec2& centre, const Vec2& dir, double level) {
    const double step = img.grid.pixel / 20.0;
    const double limit = img.grid.pixel * static_cast<double>(std::max(img.grid.nx, img.grid.ny));
    double prev = bilinear(img, centre);
    for (double t = step; t <= limit; t += step) {
        const double v = bilinear(img, centre + dir * t);
        if (v < level) return t - step + step * (prev - level) / (prev - v);
        prev = v;
    }
    throw Error("resolution_report: response does not fall below half power inside the image");
}

}  // namespace

ResolutionReport resolution_report(const SarImage& img, const Vec3& true_point) {
    const auto& g = img.grid;
    if (g.nx < 2 || g.ny < 2) throw InvalidArgument("resolution_report: image too small");
    const auto it = std::max_element(img.intensity.begin(), img.intensity.end());
    if (*it <= 0) throw Error("resolution_report: image has no peak");
    const std::size_t best = static_cast<std::size_t>(it - img.intensity.begin());
    if (std::count(img.intensity.begin(), img.intensity.end(), *it) != 1) throw Error("resolution_report: peak is not unique");
    const std::size_t ix = best % g.nx, iy = best / g.nx;

    // Sub-pixel peak by a separable parabola fit, used as the cut centre.
    auto vertex = [](double l, double c, double r) {
        const double den = l - 2 * c + r;
        return den != 0 ? 0.5 * (l - r) / den : 0.0;
    };
    double ox = 0, oy = 0;
    if (ix > 0 && ix + 1 < g.nx) ox = vertex(img.at(ix - 1, iy), img.at(ix, iy), img.at(ix + 1, iy));
    if (iy > 0 && iy + 1 < g.ny) oy = vertex(img.at(ix, iy - 1), img.at(ix, iy), img.at(ix, iy + 1));
    ResolutionReport rep;
    rep.peak = img.pixel_center(ix, iy) + Vec2(ox, oy) * g.pixel;
    rep.peak_error = (rep.peak - true_point.head<2>()).norm();

    Vec2 ur = true_point.head<2>() - img.aperture_center.head<2>();
    if (ur.norm() < 1e-9) ur = Vec2::UnitX();
    ur.normalize();
    const Vec2 ua(-ur.y(), ur.x());
    const double level = 0.5 * bilinear(img, rep.peak);
    const double r_plus = half_width(img, rep.peak, ur, level);
    const double r_minus = half_width(img, rep.peak, -ur, level);
    rep.range_width = r_plus + r_minus;
    rep.range_asymmetry = std::abs(r_plus - r_minus);
    rep.azimuth_width = half_width(img, rep.peak, ua, level) + half_width(img, rep.peak, -ua, level);
    return rep;
}

namespace {

// Mean over a (2r+1)^2 window clipped at the borders, via a summed-area table.
std::vector<double> box_mean(const std::vector<double>& v, std::size_t nx, std::size_t ny, long r) {
    std::vector<double> sat((nx + 1) * (ny + 1), 0.0);
    for (std::size_t y = 0; y < ny; ++y)
        for (std::size_t x = 0; x < nx; ++x)
            sat[(y + 1) * (nx + 1) + x + 1] =
                v[y * nx + x] + sat[y * (nx + 1) + x + 1] + sat[(y + 1) * (nx + 1) + x] - sat[y * (nx + 1) + x];
    std::vector<double> out(v.size());
    for (std::size_t y = 0; y < ny; ++y)
        for (std::size_t x = 0; x < nx; ++x) {
            const std::size_t x0 = static_cast<std::size_t>(std::max(0L, static_cast<long>(x) - r));
            const std::size_t y0 = static_cast<std::size_t>(std::max(0L, static_cast<long>(y) - r));
            const std::size_t x1 = std::min(nx, x + static_cast<std::size_t>(r) + 1);
            const std::size_t y1 = std::min(ny, y + static_cast<std::size_t>(r) + 1);
            const double s = sat[y1 * (nx + 1) + x1] - sat[y0 * (nx + 1) + x1] - sat[y1 * (nx + 1) + x0] + sat[y0 * (nx + 1) + x0];
            out[y * nx + x] = s / static_cast<double>((x1 - x0) * (y1 - y0));
        }
    return out;
}

}  // namespace

scene::OccupancyGrid image_to_occupancy(const SarImage& img, double threshold, double dilation, double smoothing) {
    const auto& g = img.grid;
    scene::OccupancyGrid out(g.origin, g.pixel, g.nx, g.ny);
    const long sr = static_cast<long>(std::floor(smoothing / g.pixel + 1e-9));
    const std::vector<double> level = sr > 0 ? box_mean(img.intensity, g.nx, g.ny, sr) : img.intensity;
    const double peak = level.empty() ? 0.0 : *std::max_element(level.begin(), level.end());
    if (!(peak > 0)) return out;
    scene::OccupancyGrid raw(g.origin, g.pixel, g.nx, g.ny);
    for (std::size_t i = 0; i < level.size(); ++i) raw.cells[i] = level[i] >= threshold * peak ? 1 : 0;
    const long r = static_cast<long>(std::floor(dilation / g.pixel + 1e-9));
    if (r <= 0) return raw;
    for (std::size_t iy = 0; iy < g.ny; ++iy)
        for (std::size_t ix = 0; ix < g.nx; ++ix) {
            if (!raw.at(ix, iy)) continue;
            for (long dy = -r; dy <= r; ++dy)
                for (long dx = -r; dx <= r; ++dx) {
                    if (dx * dx + dy * dy > r * r) continue;
                    const long x = static_cast<long>(ix) + dx, y = static_cast<long>(iy) + dy;
                    if (x < 0 || y < 0 || x >= static_cast<long>(g.nx) || y >= static_cast<long>(g.ny)) continue;
                    out.set(static_cast<std::size_t>(x), static_cast<std::size_t>(y), true);
                }
        }
    return out;
}

scene::OccupancyGrid footprint_on_grid(const scene::Scene& scene, const ImageGrid& grid) {
    return scene::rasterize_footprints(scene, grid.origin, grid.pixel, grid.nx, grid.ny, 0.0);
}

}  // namespace sc3::sar

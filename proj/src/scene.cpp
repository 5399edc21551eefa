// SPDX-License-Identifier: Apache-2.0

#include "sc3/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sc3::scene {

Box Building::box() const {
    Box b;
    b.min = Vec3(center.x() - width / 2, center.y() - depth / 2, 0.0);
    b.max = Vec3(center.x() + width / 2, center.y() + depth / 2, height);
    return b;
}

double Scene::max_building_height() const {
    double h = 0.0;
    for (const auto& b : buildings) h = std::max(h, b.height);
    return h;
}

double Scene::median_building_height() const {
    if (buildings.empty()) return 0.0;
    std::vector<double> h;
    for (const auto& b : buildings) h.push_back(b.height);
    std::sort(h.begin(), h.end());
    const std::size_t n = h.size();
    return n % 2 ? h[n / 2] : 0.5 * (h[n / 2 - 1] + h[n / 2]);
}

namespace {

// Gap between two footprints; negative when they overlap.
double footprint_gap(const Building& a, const Building& b) {
    const double gx = std::abs(a.center.x() - b.center.x()) - 0.5 * (a.width + b.width);
    const double gy = std::abs(a.center.y() - b.center.y()) - 0.5 * (a.depth + b.depth);
    if (gx < 0 && gy < 0) return std::max(gx, gy);
    return std::hypot(std::max(gx, 0.0), std::max(gy, 0.0));
}

double distance_to_footprint(const Vec2& p, const Building& b) {
    const double dx = std::max(std::abs(p.x() - b.center.x()) - b.width / 2, 0.0);
    const double dy = std::max(std::abs(p.y() - b.center.y()) - b.depth / 2, 0.0);
    return std::hypot(dx, dy);
}

double distance_to_box(const Vec3& p, const Box& box) {
    double s = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double d = std::max({box.min[k] - p[k], 0.0, p[k] - box.max[k]});
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace

Scene generate_scene(std::uint64_t seed, const SceneParams& params, const Bounds& bounds) {
    if (bounds.width <= 0 || bounds.depth <= 0) throw InvalidArgument("scene bounds must be positive");
    if (params.min_side > params.max_side || params.min_height > params.max_height)
        throw InvalidArgument("scene parameter ranges are inverted");
    Scene scene;
    scene.bounds = bounds;
    scene.rng_seed = seed;
    Rng rng = make_stream(seed, 0x5ce7e);
    std::uniform_real_distribution<double> side(params.min_side, params.max_side);
    std::uniform_real_distribution<double> height(params.min_height, params.max_height);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double m = params.edge_margin;

    for (std::size_t i = 0; i < params.n_buildings; ++i) {
        bool placed = false;
        for (std::size_t attempt = 0; attempt < params.max_attempts && !placed; ++attempt) {
            Building b;
            b.width = side(rng);
            b.depth = side(rng);
            b.height = height(rng);
            const double xlo = m + b.width / 2, xhi = bounds.width - m - b.width / 2;
            const double ylo = m + b.depth / 2, yhi = bounds.depth - m - b.depth / 2;
            if (xhi < xlo || yhi < ylo) continue;
            b.center = Vec2(xlo + (xhi - xlo) * unit(rng), ylo + (yhi - ylo) * unit(rng));
            placed = std::all_of(scene.buildings.begin(), scene.buildings.end(), [&](const Building& o) {
                return footprint_gap(b, o) >= params.building_gap;
            });
            if (placed) scene.buildings.push_back(b);
        }
        if (!placed) throw Error("could not place building " + std::to_string(i) + " without overlap");
    }

    for (std::size_t i = 0; i < params.n_users; ++i) {
        bool placed = false;
        for (std::size_t attempt = 0; attempt < params.max_attempts && !placed; ++attempt) {
            const Vec2 p(m + (bounds.width - 2 * m) * unit(rng), m + (bounds.depth - 2 * m) * unit(rng));
            placed = std::all_of(scene.buildings.begin(), scene.buildings.end(), [&](const Building& b) {
                return distance_to_footprint(p, b) >= params.user_clearance;
            });
            if (placed) {
                scene.users.push_back({Vec3(p.x(), p.y(), 0.0), params.demanded_bits, params.demanded_bits});
            }
        }
        if (!placed) throw Error("could not place ground user " + std::to_string(i));
    }
    return scene;
}

Scene generate_scene(std::uint64_t seed, std::size_t n_buildings, const Bounds& bounds) {
    SceneParams params;
    params.n_buildings = n_buildings;
    return generate_scene(seed, params, bounds);
}

bool segment_hits_box(const Vec3& a_in, const Vec3& b_in, const Box& box) {
    // Canonical endpoint order makes the floating-point path identical for (a,b) and (b,a).
    const bool swap = std::lexicographical_compare(b_in.data(), b_in.data() + 3, a_in.data(), a_in.data() + 3);
    const Vec3& a = swap ? b_in : a_in;
    const Vec3& b = swap ? a_in : b_in;
    const Vec3 d = b - a;
    double t0 = 0.0, t1 = 1.0;
    for (int k = 0; k < 3; ++k) {
        if (d[k] == 0.0) {
            if (a[k] < box.min[k] || a[k] > box.max[k]) return false;
            continue;
        }
        double ta = (box.min[k] - a[k]) / d[k];
        double tb = (box.max[k] - a[k]) / d[k];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return false;
    }
    return true;
}

bool is_los(const Vec3& a, const Vec3& b, const Scene& scene) {
    for (const auto& bld : scene.buildings)
        if (segment_hits_box(a, b, bld.box())) return false;
    return true;
}

bool collides(const Vec3& p, const Scene& scene, double margin) {
    if (p.x() < 0 || p.y() < 0 || p.x() > scene.bounds.width || p.y() > scene.bounds.depth || p.z() < 0)
        return true;
    for (const auto& b : scene.buildings)
        if (distance_to_box(p, b.box()) <= margin) return true;
    return false;
}

ScattererSet scatterers(const Scene& scene, double spacing, double jitter, std::uint64_t seed) {
    if (!(spacing > 0)) throw InvalidArgument("scatterer spacing must be positive");
    if (jitter < 0 || jitter > 1) throw InvalidArgument("scatterer jitter must lie in [0, 1]");
    ScattererSet out;
    Rng rng = make_stream(seed, 0x5ca7);
    std::uniform_real_distribution<double> offset(-0.5 * jitter, 0.5 * jitter);
    auto cells = [&](double extent) { return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(extent / spacing - 1e-9))); };
    // Lays a grid of cell centres over the rectangle origin + s*u + t*v.
    auto face = [&](const Vec3& origin, const Vec3& u, double lu, const Vec3& v, double lv, const Vec3& normal) {
        const std::size_t nu = cells(lu), nv = cells(lv);
        for (std::size_t i = 0; i < nu; ++i)
            for (std::size_t j = 0; j < nv; ++j) {
                double a = 0.0, b = 0.0;
                if (jitter > 0) {
                    a = offset(rng);
                    b = offset(rng);
                }
                const Vec3 p = origin + u * ((i + 0.5 + a) * lu / nu) + v * ((j + 0.5 + b) * lv / nv);
                out.push_back({p, 1.0, normal});
            }
    };
    const Vec3 ex = Vec3::UnitX(), ey = Vec3::UnitY(), ez = Vec3::UnitZ();
    for (const auto& b : scene.buildings) {
        const Box box = b.box();
        const double w = b.width, d = b.depth, h = b.height;
        face(box.min, ey, d, ez, h, -ex);
        face(Vec3(box.max.x(), box.min.y(), 0), ey, d, ez, h, ex);
        face(box.min, ex, w, ez, h, -ey);
        face(Vec3(box.min.x(), box.max.y(), 0), ex, w, ez, h, ey);
        face(Vec3(box.min.x(), box.min.y(), h), ex, w, ey, d, ez);
    }
    return out;
}

OccupancyGrid::OccupancyGrid(Vec2 origin_, double cell_, std::size_t nx_, std::size_t ny_)
    : origin(origin_), cell(cell_), nx(nx_), ny(ny_), cells(nx_ * ny_, 0) {
    if (!(cell_ > 0)) throw InvalidArgument("grid cell size must be positive");
}

bool OccupancyGrid::occupied(const Vec2& p) const {
    const double fx = (p.x() - origin.x()) / cell, fy = (p.y() - origin.y()) / cell;
    if (fx < 0 || fy < 0) return false;
    const auto ix = static_cast<std::size_t>(fx), iy = static_cast<std::size_t>(fy);
    if (ix >= nx || iy >= ny) return false;
    return at(ix, iy);
}

Vec2 OccupancyGrid::cell_center(std::size_t ix, std::size_t iy) const {
    return origin + Vec2((ix + 0.5) * cell, (iy + 0.5) * cell);
}

std::size_t OccupancyGrid::count() const {
    return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), std::uint8_t{1}));
}

OccupancyGrid rasterize_footprints(const Scene& scene, Vec2 origin, double cell, std::size_t nx, std::size_t ny,
                                   double margin) {
    OccupancyGrid g(origin, cell, nx, ny);
    for (std::size_t iy = 0; iy < ny; ++iy)
        for (std::size_t ix = 0; ix < nx; ++ix) {
            const Vec2 c = g.cell_center(ix, iy);
            for (const auto& b : scene.buildings)
                if (distance_to_footprint(c, b) <= margin) {
                    g.set(ix, iy, true);
                    break;
                }
        }
    return g;
}

double iou(const OccupancyGrid& a, const OccupancyGrid& b) {
    if (a.nx != b.nx || a.ny != b.ny) throw InvalidArgument("iou: grid shapes differ");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
        inter += (a.cells[i] && b.cells[i]);
        uni += (a.cells[i] || b.cells[i]);
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

nlohmann::json to_json(const Scene& scene) {
    nlohmann::json doc;
    doc["bounds"] = {{"width", scene.bounds.width}, {"depth", scene.bounds.depth}};
    doc["seed"] = scene.rng_seed;
    doc["buildings"] = nlohmann::json::array();
    for (const auto& b : scene.buildings)
        doc["buildings"].push_back({{"center", {b.center.x(), b.center.y()}},
                                    {"width", b.width},
                                    {"depth", b.depth},
                                    {"height", b.height}});
    doc["users"] = nlohmann::json::array();
    for (const auto& u : scene.users)
        doc["users"].push_back({{"position", {u.position.x(), u.position.y(), u.position.z()}},
                                {"demanded_bits", u.demanded_bits},
                                {"remaining_bits", u.remaining_bits}});
    return doc;
}

Scene scene_from_json(const nlohmann::json& doc) {
    try {
        Scene s;
        s.bounds.width = doc.at("bounds").at("width").get<double>();
        s.bounds.depth = doc.at("bounds").at("depth").get<double>();
        s.rng_seed = doc.value("seed", std::uint64_t{0});
        for (const auto& jb : doc.at("buildings")) {
            Building b;
            const auto& c = jb.at("center");
            b.center = Vec2(c.at(0).get<double>(), c.at(1).get<double>());
            b.width = jb.at("width").get<double>();
            b.depth = jb.at("depth").get<double>();
            b.height = jb.at("height").get<double>();
            s.buildings.push_back(b);
        }
        for (const auto& ju : doc.at("users")) {
            GroundUser u;
            const auto& p = ju.at("position");
            u.position = Vec3(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
            u.demanded_bits = ju.at("demanded_bits").get<double>();
            u.remaining_bits = ju.value("remaining_bits", u.demanded_bits);
            s.users.push_back(u);
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed scene document: ") + e.what());
    }
}

// max_digits10 output keeps the round trip exact.
std::string serialize(const Scene& scene) { return to_json(scene).dump(2); }

Scene parse_scene(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scene text is not valid JSON: ") + e.what());
    }
    return scene_from_json(doc);
}

}  // namespace sc3::scene

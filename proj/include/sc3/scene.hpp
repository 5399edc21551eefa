// SPDX-License-Identifier: Apache-2.0
//
// scene.hpp - synthetic urban world: buildings, ground users, visibility
//
// Buildings are axis-aligned boxes standing on z = 0. The scene occupies
// [0, width] x [0, depth] in the horizontal plane.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "sc3/types.hpp"

namespace sc3::scene {

struct Bounds {
    double width = 1000.0;  // extent along x, m
    double depth = 1000.0;  // extent along y, m
};

struct Box {
    Vec3 min;
    Vec3 max;
};

struct Building {
    Vec2 center;
    double width = 0.0;   // along x
    double depth = 0.0;   // along y
    double height = 0.0;

    Box box() const;
};

struct GroundUser {
    Vec3 position;
    double demanded_bits = 0.0;
    double remaining_bits = 0.0;
};

struct Scene {
    Bounds bounds;
    std::vector<Building> buildings;
    std::vector<GroundUser> users;
    std::uint64_t rng_seed = 0;

    double max_building_height() const;
    double median_building_height() const;
};

/// Placement knobs for generate_scene. Defaults describe the reference scenario.
struct SceneParams {
    std::size_t n_buildings = 12;
    std::size_t n_users = 10;
    double demanded_bits = 10e6;
    double min_height = 20.0;
    double max_height = 100.0;
    double min_side = 40.0;
    double max_side = 120.0;
    double building_gap = 10.0;     // min clearance between footprints
    double user_clearance = 10.0;   // min clearance between a user and any footprint
    double edge_margin = 20.0;      // keep everything this far inside the bounds
    std::size_t max_attempts = 20000;
};

/// Deterministic scene from (seed, params, bounds). Throws Error if the
/// non-overlap constraints cannot be met within the retry budget.
Scene generate_scene(std::uint64_t seed, const SceneParams& params, const Bounds& bounds);
Scene generate_scene(std::uint64_t seed, std::size_t n_buildings, const Bounds& bounds);

/// True iff the closed segment a-b touches no building box. Symmetric in (a, b).
bool is_los(const Vec3& a, const Vec3& b, const Scene& scene);

/// Segment/box test shared by is_los and the planners.
bool segment_hits_box(const Vec3& a, const Vec3& b, const Box& box);

/// True iff p is within `margin` of a building box (boundary included),
/// outside the horizontal bounds, or below ground.
bool collides(const Vec3& p, const Scene& scene, double margin);

struct Scatterer {
    Vec3 position;
    double reflectivity = 1.0;
    Vec3 normal;  // outward surface normal, used for self-occlusion
};

using ScattererSet = std::vector<Scatterer>;

/// Samples facades and rooftops on a cell-centred grid no coarser than `spacing`.
/// A nonzero `jitter` (fraction of a cell, 0..1) moves each point uniformly
/// inside its cell, which turns the mirror-like grid into a diffuse surface.
ScattererSet scatterers(const Scene& scene, double spacing, double jitter = 0.0, std::uint64_t seed = 0);

/// Boolean map over the horizontal plane; cell (ix, iy) covers
/// [origin.x + ix*cell, origin.x + (ix+1)*cell) x [...].
struct OccupancyGrid {
    Vec2 origin = Vec2::Zero();
    double cell = 1.0;
    std::size_t nx = 0;
    std::size_t ny = 0;
    std::vector<std::uint8_t> cells;

    OccupancyGrid() = default;
    OccupancyGrid(Vec2 origin, double cell, std::size_t nx, std::size_t ny);

    bool at(std::size_t ix, std::size_t iy) const { return cells[iy * nx + ix] != 0; }
    void set(std::size_t ix, std::size_t iy, bool v) { cells[iy * nx + ix] = v ? 1 : 0; }
    /// Occupancy at a world point; points outside the grid read as free.
    bool occupied(const Vec2& p) const;
    Vec2 cell_center(std::size_t ix, std::size_t iy) const;
    std::size_t count() const;
};

/// Marks every cell whose centre lies inside (or within `margin` of) a footprint.
OccupancyGrid rasterize_footprints(const Scene& scene, Vec2 origin, double cell, std::size_t nx,
                                   std::size_t ny, double margin = 0.0);

/// Intersection-over-union of two grids with identical geometry.
double iou(const OccupancyGrid& a, const OccupancyGrid& b);

nlohmann::json to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& doc);
std::string serialize(const Scene& scene);
Scene parse_scene(const std::string& text);

}  // namespace sc3::scene

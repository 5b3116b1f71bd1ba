// Triangle-mesh loading and measurement: Wavefront OBJ parsing, watertight
// testing, signed-tetrahedron mass properties, bounding boxes, and the ray
// queries (nearest hit, containment) that the rest of the pipeline builds on.
#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "graspgen/geom.hpp"
#include "graspgen/transform.hpp"

namespace graspgen {

struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::string name;

    bool empty() const { return triangles.empty(); }
};

struct Aabb {
    Vec3 min{};
    Vec3 max{};

    Vec3 center() const { return (min + max) * 0.5; }
    Vec3 half_extent() const { return (max - min) * 0.5; }
    bool contains(const Vec3& p) const {
        return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y &&
               p.z >= min.z && p.z <= max.z;
    }
};

// Volume, center of mass and inertia (about the COM, object-frame axes).
struct MassProperties {
    double volume{};
    Vec3 center_of_mass{};
    Mat3 inertia{};
    double mass{1.0};
};

struct ObjParseStats {
    int dropped_degenerate = 0;  // faces below the area floor, silently removed
    int triangulated_polygons = 0;
};

// Parses OBJ text (`v` and `f` records; normals/texcoords/materials ignored).
// Polygon faces are fan-triangulated; degenerate triangles (area < 1e-12 m^2)
// are dropped and counted. Throws on malformed records (message carries the
// line number) and on meshes with zero surviving faces.
TriMesh parse_obj(std::string_view text, const std::string& name,
                  ObjParseStats* stats = nullptr);

TriMesh load_obj_file(const std::string& path, ObjParseStats* stats = nullptr);

// Plain `v`/`f` writer; used for round-trip tests and corpus export.
std::string write_obj(const TriMesh& mesh);

// True iff every directed edge appears exactly once and its reverse exactly
// once (closed 2-manifold with consistent winding). Non-manifold input is a
// `false`, not an error.
bool is_watertight(const TriMesh& mesh);

// Divergence-theorem volume/COM/inertia via signed tetrahedra against the
// origin, then shifted to the COM and scaled so the total mass equals `mass`.
// Requires a watertight mesh; a negative total volume flips the winding and
// retries once.
MassProperties mass_properties(const TriMesh& mesh, double mass = 1.0);

Aabb bounding_box(const TriMesh& mesh);

TriMesh translated(const TriMesh& mesh, const Vec3& t);
TriMesh transformed(const TriMesh& mesh, const Transform& t);
TriMesh scaled(const TriMesh& mesh, double s);

struct RayHit {
    double t{};       // distance along the (unit) ray direction
    Vec3 point{};     // hit position
    Vec3 normal{};    // geometric triangle normal, unit, winding side
    int triangle{};   // index into mesh.triangles
};

// Nearest ray-triangle intersection within [0, t_max], Moller-Trumbore over
// all triangles with an AABB early-out.
std::optional<RayHit> raycast(const TriMesh& mesh, const Vec3& origin, const Vec3& dir,
                              double t_max);

// Nearest intersection of segment [a, b] with the mesh, measured from `a`.
std::optional<RayHit> segment_hit(const TriMesh& mesh, const Vec3& a, const Vec3& b);

// Parity test with a fixed incommensurate ray direction.
bool point_inside(const TriMesh& mesh, const Vec3& p);

}  // namespace graspgen

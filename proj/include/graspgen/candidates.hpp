// Grasp-candidate enumeration: the six-axis rotation grid, pre/post-multiplied
// pose construction, the table and palm-ray prefilters, and the candidate
// database with its on-disk format.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "graspgen/mesh.hpp"
#include "graspgen/scene.hpp"
#include "graspgen/transform.hpp"

namespace graspgen {

struct AxisRange {
    double min_deg{};
    double max_deg{};
    double inc_deg{};

    // Half-open [min, max): 360/45 yields 8 values, not 9.
    int count() const;
    double value(int k) const { return min_deg + k * inc_deg; }
};

struct RotationGrid {
    std::array<AxisRange, 3> global{};  // X, Y, Z
    std::array<AxisRange, 3> local{};   // X, Y, Z

    // Defaults: global 30/30/45 deg over [0,180)/[0,360)/[0,360),
    // local 20/20/45 deg over the same spans.
    static RotationGrid defaults();

    void validate() const;  // throws on inc <= 0 or min >= max
    std::uint64_t total_triples() const;
};

struct AngleTriple {
    std::array<double, 3> global_deg{};
    std::array<double, 3> local_deg{};
};

// Lexicographic decoding of a flat grid index, global axes outermost.
AngleTriple grid_triple(const RotationGrid& grid, std::uint64_t index);

// Materialized enumeration (tests and small grids; the builder streams by
// index instead).
std::vector<AngleTriple> enumerate_grid(const RotationGrid& grid);

// Q = R_xyz(global) * base * R_xyz(local); the global rotation also carries
// the base translation around the object center.
Transform candidate_pose(const Transform& base, const std::array<double, 3>& global_deg,
                         const std::array<double, 3>& local_deg);

struct RayBoxResult {
    bool hit = false;
    double t_entry = 0.0;  // 0 when the origin starts inside
};

// Slab test for the forward ray (t >= 0); grazing contact counts as a hit.
RayBoxResult ray_box_intersect(const Vec3& origin, const Vec3& dir, const Aabb& box);

struct GraspCandidate {
    Transform object_to_gripper;
    std::array<double, 3> global_deg{};
    std::array<double, 3> local_deg{};
    std::uint64_t candidate_id{};  // flat grid index; unique per database
};

struct CandidateDb {
    std::string object_name;
    Transform base;  // initial gripper pose in {O}
    RotationGrid grid;
    std::uint64_t seed{};
    std::uint64_t cap{};
    std::uint64_t raw_triples{};  // grid size before filtering
    std::uint64_t survivors{};    // candidates passing both prefilters
    std::vector<GraspCandidate> candidates;
};

// Enumerates the full grid, rejects poses whose gripper origin falls below
// the table plane or whose palm ray misses the object AABB, and caps the
// survivor list with a seeded uniform subsample. Ordering is ascending grid
// index regardless of internal evaluation order.
CandidateDb build_candidate_db(const ObjectPose& pose, const Transform& base,
                               const RotationGrid& grid, const SceneConfig& scene,
                               std::uint64_t cap, std::uint64_t seed);

// Binary single-file container: magic, JSON header, packed candidate rows.
// Byte output is a pure function of the database contents.
void save_candidate_db(const CandidateDb& db, const std::string& path);
CandidateDb load_candidate_db(const std::string& path);

}  // namespace graspgen

// Scene setup: table frame, quasi-static resting pose, and the initial
// gripper placement above the object.
#pragma once

#include "graspgen/mesh.hpp"
#include "graspgen/transform.hpp"

namespace graspgen {

struct SceneConfig {
    // Table-top frame {T} in the world: plane z = table z.
    Transform world_to_table{Rotation::identity(), Vec3{0.0, 0.0, 0.65}};
    // Table half-size in x/y. Must exceed every object footprint.
    double table_extent_x = 0.6;
    double table_extent_y = 0.6;
    // Target lift position relative to {T}; kept as metadata (stability is
    // decided by the force-closure proxy, not a dynamic lift).
    Vec3 lift_target{0.0, 0.0, 0.60};
    // Drop height used by the original dynamic settling; metadata only.
    double drop_height = 0.3;
    // Uniform pre-scale applied to corpus meshes at load.
    double uniform_scale = 1.0;

    double table_z() const { return world_to_table.translation.z; }
};

// Object frame {O}: axes aligned with {W}, origin at the AABB geometric
// center (the COM is reported separately).
struct ObjectPose {
    Transform world_to_object;
    Aabb aabb_in_object;  // centered on the origin by construction
};

// Axis-aligned placement: AABB center moved to (x, y) = (0, 0) in {T}, lowest
// vertex on the table plane. Throws if the object footprint exceeds the table.
ObjectPose resting_pose(const TriMesh& mesh, const SceneConfig& scene);

// The same mesh expressed in {O} coordinates (vertices shifted by -AABB
// center). Pair of resting_pose.
TriMesh mesh_in_object_frame(const TriMesh& mesh);

// Gripper base pose {G} in {O}: along +Z at d = |AABB half extents|, palm
// normal (gripper +Z) pointing at the object center.
Transform initial_gripper_pose(const ObjectPose& pose);

}  // namespace graspgen

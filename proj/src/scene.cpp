#include "graspgen/scene.hpp"

#include <cmath>
#include <stdexcept>

namespace graspgen {

ObjectPose resting_pose(const TriMesh& mesh, const SceneConfig& scene) {
    const Aabb box = bounding_box(mesh);
    const Vec3 center = box.center();
    const Vec3 half = box.half_extent();
    if (half.x > scene.table_extent_x || half.y > scene.table_extent_y) {
        throw std::runtime_error("resting_pose: object '" + mesh.name +
                                 "' exceeds the table extent");
    }

    ObjectPose pose;
    pose.aabb_in_object = Aabb{box.min - center, box.max - center};
    // Lowest vertex (in {O}: min z = box.min.z - center.z) sits on the plane.
    const double tz = scene.table_z() - (box.min.z - center.z);
    pose.world_to_object =
        Transform{Rotation::identity(),
                  Vec3{scene.world_to_table.translation.x, scene.world_to_table.translation.y, tz}};
    return pose;
}

TriMesh mesh_in_object_frame(const TriMesh& mesh) {
    const Vec3 center = bounding_box(mesh).center();
    return translated(mesh, -center);
}

Transform initial_gripper_pose(const ObjectPose& pose) {
    const Vec3 half = pose.aabb_in_object.half_extent();
    const double d = norm(half);
    if (d <= 0.0) throw std::runtime_error("initial_gripper_pose: degenerate bounding box");
    // R_X(pi) turns the gripper +Z (palm normal) back toward the object center.
    return Transform{rot_x(kPi), Vec3{0.0, 0.0, d}};
}

}  // namespace graspgen

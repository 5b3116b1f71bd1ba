#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "graspgen/candidates.hpp"
#include "graspgen/scene.hpp"
#include "test_meshes.hpp"

using namespace graspgen;

TEST_CASE("unit cube rests half its height above the table") {
    const SceneConfig scene;
    const ObjectPose pose = resting_pose(testmesh::cube(1.0), scene);
    CHECK(norm(pose.world_to_object.translation - Vec3{0, 0, 1.15}) < 1e-12);
    CHECK(pose.world_to_object.rotation.m.max_abs_diff(Mat3::identity()) == 0.0);
}

TEST_CASE("sphere of radius 0.1 rests at z = 0.75") {
    const SceneConfig scene;
    const ObjectPose pose = resting_pose(testmesh::uv_sphere(0.1), scene);
    CHECK(std::fabs(pose.world_to_object.translation.z - 0.75) < 1e-9);
}

TEST_CASE("lowest vertex of any resting mesh touches the table plane") {
    const SceneConfig scene;
    for (const TriMesh& mesh : {testmesh::l_shape(0.05, 0.04), testmesh::wedge(0.04, 0.05, 0.03),
                                testmesh::icosphere(0.2, 2)}) {
        const ObjectPose pose = resting_pose(mesh, scene);
        const TriMesh in_o = mesh_in_object_frame(mesh);
        double min_z = 1e300;
        for (const Vec3& v : in_o.vertices)
            min_z = std::min(min_z, pose.world_to_object.apply(v).z);
        CHECK(std::fabs(min_z - scene.table_z()) < 1e-6);
        CHECK(min_z >= scene.table_z() - 1e-9);
        // (x, y) center sits at the table origin.
        const Vec3 c = pose.world_to_object.apply(pose.aabb_in_object.center());
        CHECK(std::fabs(c.x) < 1e-12);
        CHECK(std::fabs(c.y) < 1e-12);
    }
}

TEST_CASE("resting pose is deterministic") {
    const SceneConfig scene;
    const TriMesh mesh = testmesh::icosphere(0.15, 2);
    const ObjectPose a = resting_pose(mesh, scene);
    const ObjectPose b = resting_pose(mesh, scene);
    CHECK(std::memcmp(&a.world_to_object, &b.world_to_object, sizeof(Transform)) == 0);
}

TEST_CASE("oversized objects are rejected") {
    const SceneConfig scene;  // 0.6 m half extent
    CHECK_THROWS_AS(static_cast<void>(resting_pose(testmesh::cube(1.5), scene)),
                    std::runtime_error);
}

TEST_CASE("initial gripper distance is the norm of the half extents") {
    const SceneConfig scene;
    {
        const ObjectPose pose = resting_pose(testmesh::cube(1.0), scene);
        const Transform base = initial_gripper_pose(pose);
        CHECK(std::fabs(base.translation.z - std::sqrt(0.75)) < 1e-12);
        CHECK(base.translation.z == norm(pose.aabb_in_object.half_extent()));
    }
    {
        const ObjectPose pose = resting_pose(testmesh::box(0.1, 0.2, 0.3), scene);
        const Transform base = initial_gripper_pose(pose);
        CHECK(std::fabs(base.translation.z - std::sqrt(0.14)) < 1e-12);
    }
}

TEST_CASE("palm normal of the initial pose points at the object") {
    const SceneConfig scene;
    for (const TriMesh& mesh :
         {testmesh::cube(0.3), testmesh::box(0.05, 0.1, 0.2), testmesh::uv_sphere(0.12)}) {
        const ObjectPose pose = resting_pose(mesh, scene);
        const Transform base = initial_gripper_pose(pose);
        const Vec3 palm_dir = base.rotation.apply(Vec3{0, 0, 1});
        // The ray-box predicate from candidate generation doubles as oracle.
        CHECK(ray_box_intersect(base.translation, palm_dir, pose.aabb_in_object).hit);
    }
}

TEST_CASE("degenerate bounding boxes are rejected") {
    ObjectPose pose;
    pose.aabb_in_object = Aabb{Vec3{}, Vec3{}};
    CHECK_THROWS_AS(static_cast<void>(initial_gripper_pose(pose)), std::runtime_error);
}

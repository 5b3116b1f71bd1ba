// Software perspective ray-caster: RGB (headlight-shaded gray), encoded
// depth, and the object mask, at the dataset camera parameters.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "graspgen/mesh.hpp"
#include "graspgen/transform.hpp"

namespace graspgen {

struct CameraIntrinsics {
    double fov_deg = 50.0;  // full angle of the image, square pixels
    double near = 0.01;
    double far = 0.75;
    int width = 128;
    int height = 128;
};

struct Camera {
    Transform pose;  // camera frame in world: +Z optical axis, +X right, +Y image-down
    CameraIntrinsics intrinsics;
};

struct TablePlane {
    double z = 0.65;
    double half_extent_x = 0.6;
    double half_extent_y = 0.6;
};

struct RgbdImage {
    int width = 0;
    int height = 0;
    std::vector<float> rgb;    // 3 planes, row-major, [0,1]
    std::vector<float> depth;  // encoded to [0,1]; misses hold 1.0
    std::vector<std::uint8_t> mask;  // 1 where the nearest hit is the object

    size_t pixel_count() const { return size_t(width) * size_t(height); }
};

// Unit ray direction in camera coordinates through pixel center (row, col).
Vec3 pixel_ray_dir(const CameraIntrinsics& cam, int row, int col);

// Nearest hit among the object mesh (held in {O} with pose world_to_object)
// and the table rectangle, clipped to [near, far] along the optical axis.
// Either scene element may be absent. Deterministic per pixel.
RgbdImage render(const TriMesh* mesh_in_object, const Transform& world_to_object,
                 const TablePlane* table, const Camera& camera);

// Affine depth encode/decode between the clipping planes.
double encode_depth(double metric, double near, double far);
double decode_depth_value(double encoded, double near, double far);

// Elementwise decode of an encoded image; out-of-range inputs are clamped and
// counted.
std::vector<double> decode_depth(const std::vector<float>& encoded, double near, double far,
                                 int* clamped_count = nullptr);

}  // namespace graspgen

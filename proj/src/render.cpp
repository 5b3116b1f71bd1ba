#include "graspgen/render.hpp"

#include <algorithm>
#include <cmath>

namespace graspgen {

namespace {

constexpr float kObjectAlbedo = 0.7f;
constexpr float kTableAlbedo = 0.4f;

struct PixelHit {
    double axis_depth;  // along the optical axis, world scale
    Vec3 normal_world;
    bool is_object;
};

}  // namespace

Vec3 pixel_ray_dir(const CameraIntrinsics& cam, int row, int col) {
    // The fov is the full angle across the image; square sensor, so both axes
    // share it. +X right, +Y down the rows, +Z forward.
    const double tan_half = std::tan(deg_to_rad(cam.fov_deg) * 0.5);
    const double u = ((col + 0.5) / cam.width * 2.0 - 1.0) * tan_half;
    const double v = ((row + 0.5) / cam.height * 2.0 - 1.0) * tan_half;
    return normalized(Vec3{u, v, 1.0});
}

RgbdImage render(const TriMesh* mesh_in_object, const Transform& world_to_object,
                 const TablePlane* table, const Camera& camera) {
    const CameraIntrinsics& ci = camera.intrinsics;
    RgbdImage img;
    img.width = ci.width;
    img.height = ci.height;
    img.rgb.assign(3 * img.pixel_count(), 0.0f);
    img.depth.assign(img.pixel_count(), 1.0f);
    img.mask.assign(img.pixel_count(), 0);

    const Vec3 cam_origin_w = camera.pose.translation;
    const Transform object_from_world = invert(world_to_object);
    // Ray cast in object coordinates to avoid transforming the mesh.
    const Vec3 cam_origin_o = object_from_world.apply(cam_origin_w);

    for (int row = 0; row < ci.height; ++row) {
        for (int col = 0; col < ci.width; ++col) {
            const Vec3 dir_cam = pixel_ray_dir(ci, row, col);
            const Vec3 dir_w = camera.pose.apply_dir(dir_cam);
            // Distance along the ray at which the axis depth reaches far.
            const double t_far = ci.far / dir_cam.z;

            std::optional<PixelHit> nearest;

            if (mesh_in_object && !mesh_in_object->triangles.empty()) {
                const Vec3 dir_o = object_from_world.apply_dir(dir_w);
                if (const auto hit = raycast(*mesh_in_object, cam_origin_o, dir_o, t_far)) {
                    const double axis_depth = hit->t * dir_cam.z;
                    if (axis_depth >= ci.near) {
                        nearest = PixelHit{axis_depth, world_to_object.apply_dir(hit->normal),
                                           true};
                    }
                }
            }
            if (table && std::fabs(dir_w.z) > 1e-12) {
                const double t = (table->z - cam_origin_w.z) / dir_w.z;
                if (t >= 0.0 && t <= t_far) {
                    const Vec3 p = cam_origin_w + dir_w * t;
                    const bool on_table = std::fabs(p.x) <= table->half_extent_x &&
                                          std::fabs(p.y) <= table->half_extent_y;
                    const double axis_depth = t * dir_cam.z;
                    if (on_table && axis_depth >= ci.near &&
                        (!nearest || axis_depth < nearest->axis_depth)) {
                        nearest = PixelHit{axis_depth, Vec3{0.0, 0.0, 1.0}, false};
                    }
                }
            }

            const size_t px = size_t(row) * size_t(ci.width) + size_t(col);
            if (!nearest) continue;

            img.depth[px] = float(encode_depth(nearest->axis_depth, ci.near, ci.far));
            img.mask[px] = nearest->is_object ? 1 : 0;

            // Headlight Lambertian: brightness from the angle between the
            // surface and the viewing ray, flat albedo per body.
            const double lambert = std::fabs(dot(nearest->normal_world, dir_w));
            const float albedo = nearest->is_object ? kObjectAlbedo : kTableAlbedo;
            const float shade = float(albedo * lambert);
            img.rgb[px] = shade;
            img.rgb[img.pixel_count() + px] = shade;
            img.rgb[2 * img.pixel_count() + px] = shade;
        }
    }
    return img;
}

double encode_depth(double metric, double near, double far) {
    const double v = (metric - near) / (far - near);
    return std::clamp(v, 0.0, 1.0);
}

double decode_depth_value(double encoded, double near, double far) {
    return near + encoded * (far - near);
}

std::vector<double> decode_depth(const std::vector<float>& encoded, double near, double far,
                                 int* clamped_count) {
    int clamped = 0;
    std::vector<double> out(encoded.size());
    for (size_t i = 0; i < encoded.size(); ++i) {
        double v = double(encoded[i]);
        if (v < 0.0 || v > 1.0) {
            v = std::clamp(v, 0.0, 1.0);
            ++clamped;
        }
        out[i] = decode_depth_value(v, near, far);
    }
    if (clamped_count) *clamped_count = clamped;
    return out;
}

}  // namespace graspgen

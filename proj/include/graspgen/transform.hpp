// Rigid-transform algebra: rotations built in the fixed X-Y-Z multiplication
// order, transform composition/inversion, and the flat 1x12 frame encoding
// used by the dataset container.
#pragma once

#include <array>

#include "graspgen/geom.hpp"

namespace graspgen {

// Proper rotation (orthonormal, det +1 within 1e-9 for anything this library
// constructs).
struct Rotation {
    Mat3 m = Mat3::identity();

    static Rotation identity() { return Rotation{}; }

    Vec3 apply(const Vec3& v) const { return m * v; }
    Rotation compose(const Rotation& o) const { return Rotation{m * o.m}; }
    Rotation transposed() const { return Rotation{m.transposed()}; }

    // Max deviation of R^T R from the identity.
    double orthonormality_error() const;
    bool is_proper(double tol = 1e-9) const;
};

Rotation rot_x(double angle_rad);
Rotation rot_y(double angle_rad);
Rotation rot_z(double angle_rad);

// Product R_X(alpha) * R_Y(beta) * R_Z(gamma), right-handed single-axis
// matrices, angles in radians.
Rotation euler_xyz(double alpha, double beta, double gamma);

// Inverse of euler_xyz up to the usual gimbal ambiguity (gamma = 0 there).
std::array<double, 3> euler_xyz_angles(const Rotation& r);

struct Transform {
    Rotation rotation;
    Vec3 translation{};

    static Transform identity() { return Transform{}; }

    Vec3 apply(const Vec3& p) const { return rotation.apply(p) + translation; }
    // Rotate a direction without translating it.
    Vec3 apply_dir(const Vec3& d) const { return rotation.apply(d); }
};

// a then-apply semantics: compose(a, b) applies b first, then a.
Transform compose(const Transform& a, const Transform& b);
Transform invert(const Transform& a);

using Frame12 = std::array<double, 12>;

// Row-major flattening of the 3x4 matrix [R | t].
Frame12 encode_frame(const Transform& t);

// Exact inverse of encode_frame. Throws if the 3x3 block is not orthonormal
// within `tol`; the error message names the offending norm.
Transform decode_frame(const Frame12& v, double tol = 1e-6);

}  // namespace graspgen

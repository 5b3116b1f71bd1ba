#include "graspgen/transform.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace graspgen {

double Rotation::orthonormality_error() const {
    const Mat3 gram = m.transposed() * m;
    return gram.max_abs_diff(Mat3::identity());
}

bool Rotation::is_proper(double tol) const {
    return orthonormality_error() <= tol && std::fabs(m.det() - 1.0) <= tol;
}

Rotation rot_x(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Rotation r;
    r.m.m = {{{1, 0, 0}, {0, c, -s}, {0, s, c}}};
    return r;
}

Rotation rot_y(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Rotation r;
    r.m.m = {{{c, 0, s}, {0, 1, 0}, {-s, 0, c}}};
    return r;
}

Rotation rot_z(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Rotation r;
    r.m.m = {{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}};
    return r;
}

Rotation euler_xyz(double alpha, double beta, double gamma) {
    return rot_x(alpha).compose(rot_y(beta)).compose(rot_z(gamma));
}

std::array<double, 3> euler_xyz_angles(const Rotation& r) {
    // R = Rx(a) Ry(b) Rz(g): m02 = sin b, m12 = -sin a cos b, m01 = -cos b sin g.
    const double sb = std::clamp(r.m(0, 2), -1.0, 1.0);
    const double beta = std::asin(sb);
    if (std::fabs(sb) > 1.0 - 1e-12) {
        // Gimbal: fold gamma into alpha.
        return {std::atan2(r.m(1, 0), r.m(1, 1)), beta, 0.0};
    }
    return {std::atan2(-r.m(1, 2), r.m(2, 2)), beta, std::atan2(-r.m(0, 1), r.m(0, 0))};
}

Transform compose(const Transform& a, const Transform& b) {
    Transform r;
    r.rotation = a.rotation.compose(b.rotation);
    r.translation = a.rotation.apply(b.translation) + a.translation;
    return r;
}

Transform invert(const Transform& a) {
    Transform r;
    r.rotation = a.rotation.transposed();
    r.translation = -r.rotation.apply(a.translation);
    return r;
}

Frame12 encode_frame(const Transform& t) {
    Frame12 v;
    for (int i = 0; i < 3; ++i) {
        v[4 * i + 0] = t.rotation.m(i, 0);
        v[4 * i + 1] = t.rotation.m(i, 1);
        v[4 * i + 2] = t.rotation.m(i, 2);
        v[4 * i + 3] = t.translation[i];
    }
    return v;
}

Transform decode_frame(const Frame12& v, double tol) {
    Transform t;
    for (int i = 0; i < 3; ++i) {
        t.rotation.m(i, 0) = v[4 * i + 0];
        t.rotation.m(i, 1) = v[4 * i + 1];
        t.rotation.m(i, 2) = v[4 * i + 2];
        t.translation[i] = v[4 * i + 3];
    }
    for (const double x : v) {
        if (!std::isfinite(x)) throw std::runtime_error("frame decode: non-finite entry");
    }
    // Name the worst-offending Gram entry so format errors are debuggable.
    const Mat3 gram = t.rotation.m.transposed() * t.rotation.m;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            const double want = (i == j) ? 1.0 : 0.0;
            const double err = std::fabs(gram(i, j) - want);
            if (err > tol) {
                throw std::runtime_error(
                    "frame decode: rotation block not orthonormal, R^T R entry (" +
                    std::to_string(i) + "," + std::to_string(j) + ") = " +
                    std::to_string(gram(i, j)) + " deviates by " + std::to_string(err));
            }
        }
    }
    if (t.rotation.m.det() < 0.0) {
        throw std::runtime_error("frame decode: rotation block has negative determinant " +
                                 std::to_string(t.rotation.m.det()));
    }
    return t;
}

}  // namespace graspgen

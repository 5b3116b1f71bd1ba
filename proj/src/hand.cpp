#include "graspgen/hand.hpp"

#include <cmath>
#include <stdexcept>

namespace graspgen {

void HandModel::validate() const {
    if (!(palm_radius > 0.0) || !(proximal_length > 0.0) || !(distal_length > 0.0) ||
        !(knuckle_height >= 0.0)) {
        throw std::runtime_error("hand model: link lengths must be positive");
    }
    for (int i = 0; i < 3; ++i) {
        for (int j = i + 1; j < 3; ++j) {
            if (std::fabs(base_angles[size_t(i)] - base_angles[size_t(j)]) < 1e-9) {
                throw std::runtime_error("hand model: finger base angles must be distinct");
            }
        }
    }
    if (!(close_step > 0.0) || !(max_close_angle > open_angle)) {
        throw std::runtime_error("hand model: bad closing sweep parameters");
    }
}

FingerSegments finger_points_local(const HandModel& hand, int finger, double proximal,
                                   double distal, double spread) {
    // Spread swings fingers 0 and 1 symmetrically about the palm normal; 2 is
    // fixed. Zero everywhere in the cylindrical configuration.
    const double spread_offset = (finger == 0) ? spread : (finger == 1 ? -spread : 0.0);
    const double az = hand.base_angles[size_t(finger)] + spread_offset;
    const Vec3 radial{std::cos(az), std::sin(az), 0.0};
    const Vec3 up{0.0, 0.0, 1.0};

    // Curl direction: positive joint angles rotate the chain from +Z toward
    // the palm axis (inward).
    const auto link_dir = [&](double q) { return up * std::cos(q) - radial * std::sin(q); };

    FingerSegments seg;
    seg.knuckle = radial * hand.palm_radius + up * hand.knuckle_height;
    seg.elbow = seg.knuckle + link_dir(proximal) * hand.proximal_length;
    seg.tip = seg.elbow + link_dir(proximal + distal) * hand.distal_length;
    return seg;
}

std::array<Vec3, 3> fingertip_fk(const Transform& wrist, const FingerState& state,
                                 const HandModel& hand) {
    std::array<Vec3, 3> tips;
    for (int f = 0; f < 3; ++f) {
        const double q1 = state.proximal[size_t(f)];
        const double q2 = state.distal[size_t(f)];
        if (q1 < hand.open_angle - 2.5 || q1 > hand.max_close_angle + 1e-9 ||
            q2 < -2.5 || q2 > kPi) {
            throw std::runtime_error("fingertip_fk: joint angle outside limits");
        }
        tips[size_t(f)] = wrist.apply(finger_points_local(hand, f, q1, q2, state.spread).tip);
    }
    return tips;
}

Transform pose_from_params(const PoseParams& p) {
    return Transform{euler_xyz(p[0], p[1], p[2]), Vec3{p[3], p[4], p[5]}};
}

namespace {

// Residual vector: 9 components, fingertip minus target, fingers stacked.
std::array<double, 9> ik_residual(const std::array<Vec3, 3>& targets, const HandModel& hand,
                                  const FingerState& state, const PoseParams& p) {
    const Transform pose = pose_from_params(p);
    std::array<double, 9> r;
    for (int f = 0; f < 3; ++f) {
        const Vec3 tip = pose.apply(finger_points_local(hand, f, state.proximal[size_t(f)],
                                                        state.distal[size_t(f)], state.spread)
                                        .tip);
        const Vec3 d = tip - targets[size_t(f)];
        r[size_t(3 * f + 0)] = d.x;
        r[size_t(3 * f + 1)] = d.y;
        r[size_t(3 * f + 2)] = d.z;
    }
    return r;
}

constexpr double kJacobianStep = 1e-6;

// Central-difference Jacobian of the residual, 9 x 6.
std::array<std::array<double, 6>, 9> ik_jacobian(const std::array<Vec3, 3>& targets,
                                                 const HandModel& hand, const FingerState& state,
                                                 const PoseParams& p) {
    std::array<std::array<double, 6>, 9> jac{};
    for (int c = 0; c < 6; ++c) {
        PoseParams hi = p, lo = p;
        hi[size_t(c)] += kJacobianStep;
        lo[size_t(c)] -= kJacobianStep;
        const auto rh = ik_residual(targets, hand, state, hi);
        const auto rl = ik_residual(targets, hand, state, lo);
        for (int r = 0; r < 9; ++r) {
            jac[size_t(r)][size_t(c)] = (rh[size_t(r)] - rl[size_t(r)]) / (2.0 * kJacobianStep);
        }
    }
    return jac;
}

// Solves the 6x6 system (J^T J + lambda I) dx = -J^T r in place.
bool solve_normal_equations(const std::array<std::array<double, 6>, 9>& jac,
                            const std::array<double, 9>& r, double lambda,
                            std::array<double, 6>& dx) {
    double a[6][7];
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) {
            double s = 0.0;
            for (int k = 0; k < 9; ++k) s += jac[size_t(k)][size_t(i)] * jac[size_t(k)][size_t(j)];
            a[i][j] = s + (i == j ? lambda : 0.0);
        }
        double s = 0.0;
        for (int k = 0; k < 9; ++k) s += jac[size_t(k)][size_t(i)] * r[size_t(k)];
        a[i][6] = -s;
    }
    // Gaussian elimination with partial pivoting.
    for (int col = 0; col < 6; ++col) {
        int piv = col;
        for (int row = col + 1; row < 6; ++row) {
            if (std::fabs(a[row][col]) > std::fabs(a[piv][col])) piv = row;
        }
        if (std::fabs(a[piv][col]) < 1e-300) return false;
        if (piv != col) {
            for (int j = 0; j <= 6; ++j) std::swap(a[piv][j], a[col][j]);
        }
        for (int row = col + 1; row < 6; ++row) {
            const double f = a[row][col] / a[col][col];
            for (int j = col; j <= 6; ++j) a[row][j] -= f * a[col][j];
        }
    }
    for (int row = 5; row >= 0; --row) {
        double s = a[row][6];
        for (int j = row + 1; j < 6; ++j) s -= a[row][j] * dx[size_t(j)];
        dx[size_t(row)] = s / a[row][row];
    }
    return true;
}

double objective_from_residual(const std::array<double, 9>& r) {
    double s = 0.0;
    for (const double v : r) s += v * v;
    return s;
}

}  // namespace

double ik_objective(const std::array<Vec3, 3>& targets, const HandModel& hand,
                    const FingerState& state, const PoseParams& p) {
    return objective_from_residual(ik_residual(targets, hand, state, p));
}

std::array<double, 6> ik_gradient(const std::array<Vec3, 3>& targets, const HandModel& hand,
                                  const FingerState& state, const PoseParams& p) {
    const auto r = ik_residual(targets, hand, state, p);
    const auto jac = ik_jacobian(targets, hand, state, p);
    std::array<double, 6> g{};
    for (int c = 0; c < 6; ++c) {
        double s = 0.0;
        for (int k = 0; k < 9; ++k) s += jac[size_t(k)][size_t(c)] * r[size_t(k)];
        g[size_t(c)] = 2.0 * s;
    }
    return g;
}

IkResult solve_wrist_ik(const std::array<Vec3, 3>& targets, const HandModel& hand,
                        const FingerState& state, const PoseParams& init) {
    for (const Vec3& t : targets) {
        if (!finite(t)) throw std::runtime_error("solve_wrist_ik: non-finite target");
    }

    PoseParams p = init;
    auto residual = ik_residual(targets, hand, state, p);
    double value = objective_from_residual(residual);
    if (!std::isfinite(value)) throw std::runtime_error("solve_wrist_ik: non-finite objective");

    double lambda = 1e-3;
    IkResult out;
    out.converged = false;

    constexpr int kMaxIterations = 200;
    int it = 0;
    for (; it < kMaxIterations; ++it) {
        const auto jac = ik_jacobian(targets, hand, state, p);
        bool accepted = false;
        // Inner damping search: only ever accept a decrease.
        for (int attempt = 0; attempt < 25; ++attempt) {
            std::array<double, 6> dx{};
            if (!solve_normal_equations(jac, residual, lambda, dx)) {
                lambda *= 10.0;
                continue;
            }
            PoseParams trial = p;
            for (int i = 0; i < 6; ++i) trial[size_t(i)] += dx[size_t(i)];
            const auto trial_res = ik_residual(targets, hand, state, trial);
            const double trial_value = objective_from_residual(trial_res);
            if (std::isfinite(trial_value) && trial_value <= value) {
                double step_norm = 0.0;
                for (const double d : dx) step_norm += d * d;
                step_norm = std::sqrt(step_norm);
                p = trial;
                residual = trial_res;
                value = trial_value;
                lambda = std::fmax(lambda / 3.0, 1e-12);
                accepted = true;
                if (step_norm < 1e-10) {
                    out.converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if (!accepted || out.converged) {
            if (!accepted) out.converged = true;  // damping exhausted: local minimizer
            break;
        }
    }

    out.params = p;
    out.pose = pose_from_params(p);
    out.residual = value;
    out.iterations = it + 1;
    return out;
}

CloseResult close_fingers(const Transform& wrist, const HandModel& hand, const TriMesh& mesh,
                          ContactFrame frame_tag) {
    CloseResult out;
    out.contacts.frame = frame_tag;

    if (mesh.triangles.empty()) {
        out.status = CloseStatus::missed_contact;
        return out;
    }

    // Palm collision: center inside the mesh, or any palm-disc spoke crossing
    // the surface.
    const Vec3 palm_center = wrist.translation;
    if (point_inside(mesh, palm_center)) {
        out.status = CloseStatus::palm_collision;
        return out;
    }
    for (int s = 0; s < 8; ++s) {
        const double az = 2.0 * kPi * s / 8.0;
        const Vec3 rim = wrist.apply(Vec3{hand.palm_radius * std::cos(az),
                                          hand.palm_radius * std::sin(az), 0.0});
        if (segment_hit(mesh, palm_center, rim)) {
            out.status = CloseStatus::palm_collision;
            return out;
        }
    }

    for (int f = 0; f < 3; ++f) {
        bool contacted = false;
        const Vec3 knuckle_w =
            wrist.apply(finger_points_local(hand, f, 0.0, 0.0).knuckle);
        // Angular velocity axis of the inward curl (+Z toward -radial is a
        // rotation about radial x up = (sin az, -cos az, 0)).
        const double az = hand.base_angles[size_t(f)];
        const Vec3 sweep_axis = wrist.apply_dir(Vec3{std::sin(az), -std::cos(az), 0.0});

        for (double q = hand.open_angle; q <= hand.max_close_angle + 1e-12;
             q += hand.close_step) {
            const FingerSegments seg = finger_points_local(hand, f, q, hand.distal_angle);
            const Vec3 elbow_w = wrist.apply(seg.elbow);
            const Vec3 tip_w = wrist.apply(seg.tip);
            const auto hit = segment_hit(mesh, elbow_w, tip_w);
            if (!hit) continue;

            // Orient the triangle normal outward (against the closing
            // motion). Containment decides; the contact-point velocity under
            // the sweep breaks edge ties.
            Vec3 n = hit->normal;
            const bool plus_inside = point_inside(mesh, hit->point + n * 1e-6);
            const bool minus_inside = point_inside(mesh, hit->point - n * 1e-6);
            if (plus_inside && !minus_inside) {
                n = -n;
            } else if (plus_inside == minus_inside) {
                const Vec3 velocity = cross(sweep_axis, hit->point - knuckle_w);
                if (dot(n, velocity) > 0.0) n = -n;
            }
            out.contacts.position[size_t(f)] = hit->point;
            out.contacts.normal[size_t(f)] = n;
            out.contact_angles[size_t(f)] = q;
            ++out.contacts.count;
            contacted = true;
            break;
        }
        if (!contacted) {
            out.status = CloseStatus::missed_contact;
            return out;
        }
    }
    out.status = CloseStatus::ok;
    return out;
}

}  // namespace graspgen

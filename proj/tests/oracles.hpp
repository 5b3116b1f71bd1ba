// Independent oracles for the test and acceptance suites. Everything here is
// deliberately implemented with different algorithms than the library paths
// it checks: determinant-sign segment/triangle crossing instead of
// Moller-Trumbore, dense 4x4 matrices instead of (R, t) composition,
// hyperplane enumeration instead of the simplex, and Nelder-Mead instead of
// damped least squares.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "graspgen/geom.hpp"
#include "graspgen/mesh.hpp"
#include "graspgen/rng.hpp"

namespace oracle {

using graspgen::Vec3;

// ---------------------------------------------------------------- mat4

using Mat4 = std::array<std::array<double, 4>, 4>;

inline Mat4 mat4_identity() {
    Mat4 m{};
    for (int i = 0; i < 4; ++i) m[size_t(i)][size_t(i)] = 1.0;
    return m;
}

inline Mat4 mat4_mul(const Mat4& a, const Mat4& b) {
    Mat4 r{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            for (int k = 0; k < 4; ++k) r[size_t(i)][size_t(j)] += a[size_t(i)][size_t(k)] * b[size_t(k)][size_t(j)];
    return r;
}

inline Mat4 mat4_from_rt(const std::array<std::array<double, 3>, 3>& rot, const Vec3& t) {
    Mat4 m = mat4_identity();
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) m[size_t(i)][size_t(j)] = rot[size_t(i)][size_t(j)];
        m[size_t(i)][3] = t[i];
    }
    return m;
}

// Independent single-axis rotation matrices (row-major, right-handed).
inline std::array<std::array<double, 3>, 3> rx3(double a) {
    return {{{1, 0, 0}, {0, std::cos(a), -std::sin(a)}, {0, std::sin(a), std::cos(a)}}};
}
inline std::array<std::array<double, 3>, 3> ry3(double a) {
    return {{{std::cos(a), 0, std::sin(a)}, {0, 1, 0}, {-std::sin(a), 0, std::cos(a)}}};
}
inline std::array<std::array<double, 3>, 3> rz3(double a) {
    return {{{std::cos(a), -std::sin(a), 0}, {std::sin(a), std::cos(a), 0}, {0, 0, 1}}};
}

inline std::array<std::array<double, 3>, 3> mul3(const std::array<std::array<double, 3>, 3>& a,
                                                 const std::array<std::array<double, 3>, 3>& b) {
    std::array<std::array<double, 3>, 3> r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) r[size_t(i)][size_t(j)] += a[size_t(i)][size_t(k)] * b[size_t(k)][size_t(j)];
    return r;
}

// Rodrigues rotation of v about unit axis by angle; used by the FK oracle.
inline Vec3 rotate_axis_angle(const Vec3& axis, double angle, const Vec3& v) {
    const double c = std::cos(angle), s = std::sin(angle);
    return v * c + graspgen::cross(axis, v) * s + axis * (graspgen::dot(axis, v) * (1.0 - c));
}

// ------------------------------------------------- point-in-mesh (parity)

// Orientation predicate: sign of det[b-a, c-a, d-a].
inline double orient3d(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    return graspgen::dot(b - a, graspgen::cross(c - a, d - a));
}

// Segment pq vs triangle abc via orientation signs (no barycentrics shared
// with the library's intersector).
inline bool segment_crosses_triangle(const Vec3& p, const Vec3& q, const Vec3& a, const Vec3& b,
                                     const Vec3& c) {
    const double sp = orient3d(a, b, c, p);
    const double sq = orient3d(a, b, c, q);
    if ((sp > 0 && sq > 0) || (sp < 0 && sq < 0)) return false;  // same side
    // The segment must pass through the triangle's interior wedge.
    const double s1 = orient3d(p, q, a, b);
    const double s2 = orient3d(p, q, b, c);
    const double s3 = orient3d(p, q, c, a);
    return (s1 >= 0 && s2 >= 0 && s3 >= 0) || (s1 <= 0 && s2 <= 0 && s3 <= 0);
}

inline bool point_in_mesh(const graspgen::TriMesh& mesh, const Vec3& p) {
    // Far endpoint well outside the bounds, direction with irrational ratios
    // distinct from the library's parity direction.
    const graspgen::Aabb box = graspgen::bounding_box(mesh);
    const double diag = graspgen::norm(box.max - box.min) + 1.0;
    const Vec3 dir = graspgen::normalized(Vec3{0.3198713286755464, 0.7123889803846894,
                                               0.6247804067273582});
    const Vec3 q = p + dir * (2.0 * diag);
    int crossings = 0;
    for (const auto& tri : mesh.triangles) {
        if (segment_crosses_triangle(p, q, mesh.vertices[size_t(tri[0])],
                                     mesh.vertices[size_t(tri[1])],
                                     mesh.vertices[size_t(tri[2])]))
            ++crossings;
    }
    return (crossings % 2) == 1;
}

// -------------------------------------------------------- marching rays

struct MarchResult {
    bool hit = false;
    double t_entry = 0.0;
    bool flagged = false;  // grazing / near-tangent: excluded from comparisons
};

// Dense point-marching against an axis-aligned box, bisection-refined entry.
inline MarchResult march_ray_box(const Vec3& origin, const Vec3& dir, const graspgen::Aabb& box,
                                 double t_max, double step = 1e-4) {
    const auto inside = [&](const Vec3& p) {
        return p.x >= box.min.x && p.x <= box.max.x && p.y >= box.min.y && p.y <= box.max.y &&
               p.z >= box.min.z && p.z <= box.max.z;
    };
    // Componentwise distance to the box; tracks near misses.
    const auto margin = [&](const Vec3& p) {
        double worst = -1e300;
        for (int i = 0; i < 3; ++i) {
            worst = std::max(worst, box.min[i] - p[i]);
            worst = std::max(worst, p[i] - box.max[i]);
        }
        return worst;  // <= 0 inside
    };

    MarchResult out;
    double closest = 1e300;
    if (inside(origin)) {
        out.hit = true;
        out.t_entry = 0.0;
        if (margin(origin) > -1e-4) out.flagged = true;  // starts on the skin
        return out;
    }
    for (double t = step; t <= t_max; t += step) {
        const Vec3 p = origin + dir * t;
        const double m = margin(p);
        closest = std::min(closest, std::fabs(m));
        if (m <= 0.0) {
            double lo = t - step, hi = t;
            for (int i = 0; i < 60; ++i) {
                const double mid = (lo + hi) / 2.0;
                (margin(origin + dir * mid) <= 0.0 ? hi : lo) = mid;
            }
            out.hit = true;
            out.t_entry = hi;
            // Flag entries that stay within a step of the surface (tangent
            // sliding) or land on an edge/corner neighborhood.
            const Vec3 e = origin + dir * hi;
            int near_faces = 0;
            for (int i = 0; i < 3; ++i) {
                if (std::fabs(e[i] - box.min[i]) < 1e-3 || std::fabs(e[i] - box.max[i]) < 1e-3)
                    ++near_faces;
            }
            if (near_faces >= 2) out.flagged = true;
            return out;
        }
    }
    if (closest < 1e-3) out.flagged = true;  // near miss
    return out;
}

// Exact point-to-triangle distance (project to the plane, clamp to edges).
inline double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b,
                                      const Vec3& c) {
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = graspgen::dot(ab, ap), d2 = graspgen::dot(ac, ap);
    if (d1 <= 0.0 && d2 <= 0.0) return graspgen::norm(ap);
    const Vec3 bp = p - b;
    const double d3 = graspgen::dot(ab, bp), d4 = graspgen::dot(ac, bp);
    if (d3 >= 0.0 && d4 <= d3) return graspgen::norm(bp);
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return graspgen::norm(ap - ab * v);
    }
    const Vec3 cp = p - c;
    const double d5 = graspgen::dot(ab, cp), d6 = graspgen::dot(ac, cp);
    if (d6 >= 0.0 && d5 <= d6) return graspgen::norm(cp);
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return graspgen::norm(ap - ac * w);
    }
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return graspgen::norm(bp + (c - b) * w);
    }
    const Vec3 n = graspgen::cross(ab, ac);
    return std::fabs(graspgen::dot(ap, n)) / graspgen::norm(n);
}

inline double point_mesh_distance(const graspgen::TriMesh& mesh, const Vec3& p) {
    double best = 1e300;
    for (const auto& tri : mesh.triangles) {
        best = std::min(best, point_triangle_distance(p, mesh.vertices[size_t(tri[0])],
                                                      mesh.vertices[size_t(tri[1])],
                                                      mesh.vertices[size_t(tri[2])]));
    }
    return best;
}

// Dense point-marching against a closed mesh using the oracle's own parity
// test. Slow by design; call with modest meshes.
inline MarchResult march_ray_mesh(const graspgen::TriMesh& mesh, const Vec3& origin,
                                  const Vec3& dir, double t_max, double step = 1e-4) {
    MarchResult out;
    if (point_in_mesh(mesh, origin)) {
        out.hit = true;
        out.t_entry = 0.0;
        out.flagged = true;  // interior starts are outside the contract
        return out;
    }
    for (double t = step; t <= t_max; t += step) {
        if (point_in_mesh(mesh, origin + dir * t)) {
            double lo = t - step, hi = t;
            for (int i = 0; i < 60; ++i) {
                const double mid = (lo + hi) / 2.0;
                (point_in_mesh(mesh, origin + dir * mid) ? hi : lo) = mid;
            }
            out.hit = true;
            out.t_entry = hi;
            return out;
        }
    }
    // A sub-step grazing crossing can be stepped over entirely. The ray-to-
    // surface distance is 1-Lipschitz in t, so sampling every 10 steps and
    // flagging anything below 7 steps covers every true pass within 2 steps.
    double closest = 1e300;
    for (double t = 0.0; t <= t_max; t += step * 10.0) {
        closest = std::min(closest, point_mesh_distance(mesh, origin + dir * t));
        if (closest < 7.0 * step) break;
    }
    if (closest < 7.0 * step) out.flagged = true;
    return out;
}

// ------------------------------------------- 6-D hull interior (brute force)

// True iff the origin lies strictly inside the convex hull of the points,
// decided by enumerating candidate facet hyperplanes through every 6-point
// subset. Exponential and proud of it; fine for a few dozen points.
inline bool origin_strictly_inside_hull6(const std::vector<std::array<double, 6>>& pts,
                                         double tol = 1e-9) {
    const int m = int(pts.size());
    if (m < 7) return false;

    // Full-dimensionality first: the hull has an interior only when the
    // points affinely span R^6, i.e. the homogenized rows [w | 1] have rank 7.
    {
        std::vector<std::array<double, 7>> rows;
        rows.reserve(size_t(m));
        for (const auto& p : pts) {
            std::array<double, 7> r{};
            for (int c = 0; c < 6; ++c) r[size_t(c)] = p[size_t(c)];
            r[6] = 1.0;
            rows.push_back(r);
        }
        int rank = 0;
        for (int col = 0; col < 7 && rank < m; ++col) {
            int piv = -1;
            double best = 1e-12;
            for (int r = rank; r < m; ++r) {
                if (std::fabs(rows[size_t(r)][size_t(col)]) > best) {
                    best = std::fabs(rows[size_t(r)][size_t(col)]);
                    piv = r;
                }
            }
            if (piv < 0) continue;
            std::swap(rows[size_t(rank)], rows[size_t(piv)]);
            for (int r = 0; r < m; ++r) {
                if (r == rank) continue;
                const double f = rows[size_t(r)][size_t(col)] / rows[size_t(rank)][size_t(col)];
                for (int c = 0; c < 7; ++c) rows[size_t(r)][size_t(c)] -= f * rows[size_t(rank)][size_t(c)];
            }
            ++rank;
        }
        if (rank < 7) return false;
    }

    // Every supporting hyperplane (all points weakly on one side) must keep
    // the origin strictly on the inner side.
    std::array<int, 6> pick{};
    std::function<bool(int, int)> recurse = [&](int start, int chosen) -> bool {
        if (chosen == 6) {
            // Hyperplane n . x = c through the 6 picked points: nullspace of
            // the 6 x 7 system [x_j | -1] (n, c)^T = 0.
            double a[6][7];
            for (int r = 0; r < 6; ++r) {
                for (int c = 0; c < 6; ++c) a[r][c] = pts[size_t(pick[size_t(r)])][size_t(c)];
                a[r][6] = -1.0;
            }
            // Gauss with partial pivoting to row echelon.
            int rank = 0;
            std::array<int, 7> pivot_col{};
            for (int col = 0; col < 7 && rank < 6; ++col) {
                int piv = -1;
                double best = 1e-10;
                for (int r = rank; r < 6; ++r) {
                    if (std::fabs(a[r][col]) > best) {
                        best = std::fabs(a[r][col]);
                        piv = r;
                    }
                }
                if (piv < 0) continue;
                for (int c = 0; c < 7; ++c) std::swap(a[piv][c], a[rank][c]);
                for (int r = 0; r < 6; ++r) {
                    if (r == rank) continue;
                    const double f = a[r][col] / a[rank][col];
                    for (int c = 0; c < 7; ++c) a[r][c] -= f * a[rank][c];
                }
                pivot_col[size_t(rank)] = col;
                ++rank;
            }
            if (rank < 6) return true;  // degenerate subset: no unique plane, skip

            // Back-substitute with the single free column set to 1.
            std::array<double, 7> sol{};
            std::array<bool, 7> is_pivot{};
            for (int r = 0; r < rank; ++r) is_pivot[size_t(pivot_col[size_t(r)])] = true;
            int free_col = -1;
            for (int c = 0; c < 7; ++c)
                if (!is_pivot[size_t(c)]) free_col = c;
            sol[size_t(free_col)] = 1.0;
            for (int r = rank - 1; r >= 0; --r) {
                const int pc = pivot_col[size_t(r)];
                double s = 0.0;
                for (int c = pc + 1; c < 7; ++c) s += a[r][c] * sol[size_t(c)];
                sol[size_t(pc)] = -s / a[r][pc];
            }
            double norm_n = 0.0;
            for (int c = 0; c < 6; ++c) norm_n += sol[size_t(c)] * sol[size_t(c)];
            norm_n = std::sqrt(norm_n);
            if (norm_n < 1e-12) return true;  // plane through origin with n = 0: skip
            for (double& v : sol) v /= norm_n;
            const double c_off = sol[6];

            // Side of every point; the subset members sit at ~0.
            double lo = 1e300, hi = -1e300;
            for (const auto& p : pts) {
                double side = -c_off;
                for (int c = 0; c < 6; ++c) side += sol[size_t(c)] * p[size_t(c)];
                lo = std::min(lo, side);
                hi = std::max(hi, side);
            }
            const double origin_side = -c_off;
            if (hi <= tol) {
                // Supporting plane with inward side negative.
                if (origin_side > -tol) return false;
            } else if (lo >= -tol) {
                if (origin_side < tol) return false;
            }
            return true;
        }
        for (int i = start; i < m; ++i) {
            pick[size_t(chosen)] = i;
            if (!recurse(i + 1, chosen + 1)) return false;
        }
        return true;
    };
    return recurse(0, 0);
}

// Friction-cone edge wrenches built independently of the library (different
// tangent construction).
inline std::vector<std::array<double, 6>> wrench_points(
    const std::vector<Vec3>& positions, const std::vector<Vec3>& outward_normals, double mu,
    int facets, const Vec3& com) {
    double rho = 0.0;
    for (const Vec3& p : positions) rho = std::max(rho, graspgen::norm(p - com));
    std::vector<std::array<double, 6>> pts;
    for (size_t i = 0; i < positions.size(); ++i) {
        const Vec3 n = graspgen::normalized(-outward_normals[i]);  // force into the surface
        // Tangents via Gram-Schmidt against a rotated helper axis.
        Vec3 helper{n.y, n.z, n.x};
        Vec3 t1 = helper - n * graspgen::dot(helper, n);
        if (graspgen::norm(t1) < 1e-9) {
            helper = Vec3{-n.z, n.x, n.y};
            t1 = helper - n * graspgen::dot(helper, n);
        }
        t1 = graspgen::normalized(t1);
        const Vec3 t2 = graspgen::cross(n, t1);
        const Vec3 r = positions[i] - com;
        for (int k = 0; k < facets; ++k) {
            const double phi = 2.0 * graspgen::kPi * k / facets;
            const Vec3 f =
                graspgen::normalized(n + (t1 * std::cos(phi) + t2 * std::sin(phi)) * mu);
            const Vec3 tau = graspgen::cross(r, f) / rho;
            pts.push_back({f.x, f.y, f.z, tau.x, tau.y, tau.z});
        }
    }
    return pts;
}

// ------------------------------------------------------------ Nelder-Mead

// Plain downhill simplex over n parameters; the IK multi-start oracle.
inline std::pair<std::vector<double>, double> nelder_mead(
    const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
    double scale, int max_iter) {
    const int n = int(x0.size());
    std::vector<std::vector<double>> simplex(size_t(n + 1), x0);
    for (int i = 0; i < n; ++i) simplex[size_t(i + 1)][size_t(i)] += scale;
    std::vector<double> value(size_t(n + 1));
    for (int i = 0; i <= n; ++i) value[size_t(i)] = f(simplex[size_t(i)]);

    for (int iter = 0; iter < max_iter; ++iter) {
        // Order best..worst.
        std::vector<int> idx(size_t(n + 1));
        for (int i = 0; i <= n; ++i) idx[size_t(i)] = i;
        std::sort(idx.begin(), idx.end(),
                  [&](int a, int b) { return value[size_t(a)] < value[size_t(b)]; });
        std::vector<std::vector<double>> s2;
        std::vector<double> v2;
        for (const int i : idx) {
            s2.push_back(simplex[size_t(i)]);
            v2.push_back(value[size_t(i)]);
        }
        simplex = std::move(s2);
        value = std::move(v2);
        if (std::fabs(value[size_t(n)] - value[0]) < 1e-15 * (1.0 + std::fabs(value[0]))) break;

        std::vector<double> centroid(size_t(n), 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) centroid[size_t(j)] += simplex[size_t(i)][size_t(j)] / n;

        const auto blend = [&](double alpha) {
            std::vector<double> p(static_cast<size_t>(n), 0.0);
            for (int j = 0; j < n; ++j)
                p[size_t(j)] = centroid[size_t(j)] + alpha * (simplex[size_t(n)][size_t(j)] - centroid[size_t(j)]);
            return p;
        };

        const auto reflected = blend(-1.0);
        const double fr = f(reflected);
        if (fr < value[0]) {
            const auto expanded = blend(-2.0);
            const double fe = f(expanded);
            if (fe < fr) {
                simplex[size_t(n)] = expanded;
                value[size_t(n)] = fe;
            } else {
                simplex[size_t(n)] = reflected;
                value[size_t(n)] = fr;
            }
        } else if (fr < value[size_t(n - 1)]) {
            simplex[size_t(n)] = reflected;
            value[size_t(n)] = fr;
        } else {
            const auto contracted = blend(0.5);
            const double fc = f(contracted);
            if (fc < value[size_t(n)]) {
                simplex[size_t(n)] = contracted;
                value[size_t(n)] = fc;
            } else {
                for (int i = 1; i <= n; ++i) {
                    for (int j = 0; j < n; ++j)
                        simplex[size_t(i)][size_t(j)] =
                            simplex[0][size_t(j)] + 0.5 * (simplex[size_t(i)][size_t(j)] - simplex[0][size_t(j)]);
                    value[size_t(i)] = f(simplex[size_t(i)]);
                }
            }
        }
    }
    int best = 0;
    for (int i = 1; i <= n; ++i)
        if (value[size_t(i)] < value[size_t(best)]) best = i;
    return {simplex[size_t(best)], value[size_t(best)]};
}

}  // namespace oracle

#include "graspgen/mesh.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace graspgen {

namespace {

constexpr double kDegenerateArea = 1e-12;

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    return 0.5 * norm(cross(b - a, c - a));
}

// First whitespace-separated token of an `f` element: "7//2" -> 7.
int parse_face_index(std::string_view tok, int vertex_count, int line_no) {
    const size_t slash = tok.find('/');
    const std::string_view head = (slash == std::string_view::npos) ? tok : tok.substr(0, slash);
    int idx = 0;
    const auto res = std::from_chars(head.data(), head.data() + head.size(), idx);
    if (res.ec != std::errc() || res.ptr != head.data() + head.size() || idx == 0) {
        throw std::runtime_error("obj parse error at line " + std::to_string(line_no) +
                                 ": bad face index '" + std::string(tok) + "'");
    }
    // OBJ indices are 1-based; negative indices count back from the end.
    const int zero_based = idx > 0 ? idx - 1 : vertex_count + idx;
    if (zero_based < 0 || zero_based >= vertex_count) {
        throw std::runtime_error("obj parse error at line " + std::to_string(line_no) +
                                 ": face index " + std::to_string(idx) + " out of range");
    }
    return zero_based;
}

}  // namespace

TriMesh parse_obj(std::string_view text, const std::string& name, ObjParseStats* stats) {
    TriMesh mesh;
    mesh.name = name;
    ObjParseStats local;

    int line_no = 0;
    size_t pos = 0;
    std::vector<int> face;  // scratch
    while (pos <= text.size()) {
        const size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.size() - pos
                                                                               : eol - pos);
        pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
            line.remove_suffix(1);
        while (!line.empty() && (line.front() == ' ' || line.front() == '\t'))
            line.remove_prefix(1);
        if (line.empty() || line[0] == '#') continue;

        std::istringstream iss{std::string(line)};
        std::string tag;
        iss >> tag;
        if (tag == "v") {
            Vec3 v;
            if (!(iss >> v.x >> v.y >> v.z) || !finite(v)) {
                throw std::runtime_error("obj parse error at line " + std::to_string(line_no) +
                                         ": bad vertex record");
            }
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            face.clear();
            std::string tok;
            while (iss >> tok) {
                face.push_back(parse_face_index(tok, int(mesh.vertices.size()), line_no));
            }
            if (face.size() < 3) {
                throw std::runtime_error("obj parse error at line " + std::to_string(line_no) +
                                         ": face with fewer than 3 vertices");
            }
            if (face.size() > 3) ++local.triangulated_polygons;
            for (size_t k = 1; k + 1 < face.size(); ++k) {  // fan split
                const std::array<int, 3> tri{face[0], face[k], face[k + 1]};
                const double area = triangle_area(mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                                                  mesh.vertices[tri[2]]);
                if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] ||
                    area < kDegenerateArea) {
                    ++local.dropped_degenerate;
                    continue;
                }
                mesh.triangles.push_back(tri);
            }
        }
        // vn/vt/usemtl/o/g/s/mtllib are ignored.
    }

    if (mesh.triangles.empty()) {
        throw std::runtime_error("obj parse error: mesh '" + name + "' has no usable faces");
    }
    if (stats) *stats = local;
    return mesh;
}

TriMesh load_obj_file(const std::string& path, ObjParseStats* stats) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open mesh file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    // Object name = file stem.
    std::string name = path;
    if (const size_t slash = name.find_last_of("/\\"); slash != std::string::npos)
        name = name.substr(slash + 1);
    if (const size_t dot = name.find_last_of('.'); dot != std::string::npos)
        name = name.substr(0, dot);
    return parse_obj(buf.str(), name, stats);
}

std::string write_obj(const TriMesh& mesh) {
    std::string out;
    out.reserve(mesh.vertices.size() * 48 + mesh.triangles.size() * 24);
    char buf[128];
    for (const Vec3& v : mesh.vertices) {
        std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x, v.y, v.z);
        out += buf;
    }
    for (const auto& t : mesh.triangles) {
        std::snprintf(buf, sizeof buf, "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
        out += buf;
    }
    return out;
}

bool is_watertight(const TriMesh& mesh) {
    if (mesh.triangles.empty()) return false;
    std::unordered_map<std::uint64_t, int> directed;
    directed.reserve(mesh.triangles.size() * 3);
    const auto key = [](int a, int b) {
        return (std::uint64_t(std::uint32_t(a)) << 32) | std::uint32_t(b);
    };
    for (const auto& t : mesh.triangles) {
        for (int e = 0; e < 3; ++e) {
            const int a = t[e], b = t[(e + 1) % 3];
            if (a == b) return false;
            if (++directed[key(a, b)] > 1) return false;  // repeated directed edge
        }
    }
    // Every directed edge must be matched by its reverse.
    for (const auto& [k, n] : directed) {
        const int a = int(k >> 32), b = int(k & 0xffffffffu);
        const auto rev = directed.find(key(b, a));
        if (rev == directed.end() || rev->second != 1) return false;
    }
    return true;
}

namespace {

struct VolumeIntegrals {
    double volume = 0.0;
    Vec3 first{};   // integral of (x, y, z)
    Mat3 second{};  // integral of x_i * x_j
};

// Signed tetrahedron (origin, a, b, c) contributions. Quadratic moments use
// the exact tetrahedron formula
//   int x_a x_b dV = V/20 * (sum_i p_i,a p_i,b + (sum_i p_i,a)(sum_i p_i,b))
// over the four vertices (the origin contributes zeros).
void accumulate(VolumeIntegrals& acc, const Vec3& a, const Vec3& b, const Vec3& c) {
    const double det = dot(a, cross(b, c));
    const double vol = det / 6.0;
    acc.volume += vol;
    acc.first += vol * 0.25 * (a + b + c);
    const Vec3 s = a + b + c;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            const double sum_sq = a[i] * a[j] + b[i] * b[j] + c[i] * c[j];
            acc.second(i, j) += vol / 20.0 * (sum_sq + s[i] * s[j]);
        }
    }
}

}  // namespace

MassProperties mass_properties(const TriMesh& mesh, double mass) {
    if (!is_watertight(mesh)) {
        throw std::runtime_error("mass_properties: mesh '" + mesh.name + "' is not watertight");
    }

    bool flipped = false;
    for (;;) {
        VolumeIntegrals acc;
        for (const auto& t : mesh.triangles) {
            const Vec3& a = mesh.vertices[t[0]];
            const Vec3& b = mesh.vertices[flipped ? t[2] : t[1]];
            const Vec3& c = mesh.vertices[flipped ? t[1] : t[2]];
            accumulate(acc, a, b, c);
        }
        if (acc.volume < 0.0) {
            if (flipped) throw std::runtime_error("mass_properties: degenerate signed volume");
            flipped = true;
            continue;
        }
        if (acc.volume <= 0.0) {
            throw std::runtime_error("mass_properties: zero volume for mesh '" + mesh.name + "'");
        }

        MassProperties out;
        out.volume = acc.volume;
        out.mass = mass;
        out.center_of_mass = acc.first / acc.volume;

        const double density = mass / acc.volume;
        // Inertia about the origin from second moments, then parallel-axis
        // shift to the COM.
        Mat3 second = acc.second * density;
        const Vec3 com = out.center_of_mass;
        Mat3 com_second = outer(com, com) * mass;
        Mat3 centered;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) centered(i, j) = second(i, j) - com_second(i, j);
        const double trace = centered(0, 0) + centered(1, 1) + centered(2, 2);
        Mat3 inertia;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                inertia(i, j) = (i == j ? trace : 0.0) - centered(i, j);
        out.inertia = inertia;
        return out;
    }
}

Aabb bounding_box(const TriMesh& mesh) {
    if (mesh.vertices.empty()) throw std::runtime_error("bounding_box: empty mesh");
    Aabb box{mesh.vertices[0], mesh.vertices[0]};
    for (const Vec3& v : mesh.vertices) {
        box.min = cwise_min(box.min, v);
        box.max = cwise_max(box.max, v);
    }
    return box;
}

TriMesh translated(const TriMesh& mesh, const Vec3& t) {
    TriMesh out = mesh;
    for (Vec3& v : out.vertices) v += t;
    return out;
}

TriMesh transformed(const TriMesh& mesh, const Transform& t) {
    TriMesh out = mesh;
    for (Vec3& v : out.vertices) v = t.apply(v);
    return out;
}

TriMesh scaled(const TriMesh& mesh, double s) {
    TriMesh out = mesh;
    for (Vec3& v : out.vertices) v *= s;
    return out;
}

namespace {

// Moller-Trumbore, both-sided.
bool ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                  const Vec3& c, double& t_out) {
    constexpr double kEps = 1e-13;
    const Vec3 e1 = b - a;
    const Vec3 e2 = c - a;
    const Vec3 pvec = cross(dir, e2);
    const double det = dot(e1, pvec);
    if (std::fabs(det) < kEps) return false;
    const double inv_det = 1.0 / det;
    const Vec3 tvec = origin - a;
    const double u = dot(tvec, pvec) * inv_det;
    if (u < -1e-12 || u > 1.0 + 1e-12) return false;
    const Vec3 qvec = cross(tvec, e1);
    const double v = dot(dir, qvec) * inv_det;
    if (v < -1e-12 || u + v > 1.0 + 1e-12) return false;
    const double t = dot(e2, qvec) * inv_det;
    if (t < 0.0) return false;
    t_out = t;
    return true;
}

bool ray_aabb_possible(const Aabb& box, const Vec3& origin, const Vec3& dir, double t_max) {
    double t0 = 0.0, t1 = t_max;
    for (int i = 0; i < 3; ++i) {
        const double o = origin[i], d = dir[i];
        if (std::fabs(d) < 1e-300) {
            if (o < box.min[i] || o > box.max[i]) return false;
            continue;
        }
        double lo = (box.min[i] - o) / d;
        double hi = (box.max[i] - o) / d;
        if (lo > hi) std::swap(lo, hi);
        t0 = std::fmax(t0, lo);
        t1 = std::fmin(t1, hi);
        if (t0 > t1) return false;
    }
    return true;
}

}  // namespace

std::optional<RayHit> raycast(const TriMesh& mesh, const Vec3& origin, const Vec3& dir,
                              double t_max) {
    if (mesh.triangles.empty()) return std::nullopt;
    // Inflate the box test slightly so boundary rays are not culled.
    Aabb box = bounding_box(mesh);
    box.min -= Vec3{1e-9, 1e-9, 1e-9};
    box.max += Vec3{1e-9, 1e-9, 1e-9};
    if (!ray_aabb_possible(box, origin, dir, t_max)) return std::nullopt;

    std::optional<RayHit> best;
    for (size_t i = 0; i < mesh.triangles.size(); ++i) {
        const auto& tri = mesh.triangles[i];
        double t;
        if (!ray_triangle(origin, dir, mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                          mesh.vertices[tri[2]], t))
            continue;
        if (t > t_max) continue;
        if (!best || t < best->t) {
            RayHit hit;
            hit.t = t;
            hit.point = origin + dir * t;
            hit.normal = normalized(cross(mesh.vertices[tri[1]] - mesh.vertices[tri[0]],
                                          mesh.vertices[tri[2]] - mesh.vertices[tri[0]]));
            hit.triangle = int(i);
            best = hit;
        }
    }
    return best;
}

std::optional<RayHit> segment_hit(const TriMesh& mesh, const Vec3& a, const Vec3& b) {
    const Vec3 d = b - a;
    const double len = norm(d);
    if (len < 1e-12) return std::nullopt;
    return raycast(mesh, a, d / len, len);
}

bool point_inside(const TriMesh& mesh, const Vec3& p) {
    // Fixed direction with irrational component ratios; grazing a vertex or
    // edge exactly is measure-zero for the meshes this library handles.
    static const Vec3 dir = normalized(Vec3{0.57735026918962573, 0.25751416197912252,
                                            0.77151674981045959});
    int crossings = 0;
    double t;
    for (const auto& tri : mesh.triangles) {
        if (ray_triangle(p, dir, mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                         mesh.vertices[tri[2]], t)) {
            ++crossings;
        }
    }
    return (crossings % 2) == 1;
}

}  // namespace graspgen

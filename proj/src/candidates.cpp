#include "graspgen/candidates.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "graspgen/rng.hpp"

namespace graspgen {

int AxisRange::count() const {
    // Guard against 360/45 landing on 7.9999... or 8.0000...1.
    return int(std::floor((max_deg - min_deg - 1e-9) / inc_deg)) + 1;
}

RotationGrid RotationGrid::defaults() {
    RotationGrid g;
    g.global = {AxisRange{0, 180, 30}, AxisRange{0, 360, 30}, AxisRange{0, 360, 45}};
    g.local = {AxisRange{0, 180, 20}, AxisRange{0, 360, 20}, AxisRange{0, 360, 45}};
    return g;
}

void RotationGrid::validate() const {
    for (const auto* axes : {&global, &local}) {
        for (const AxisRange& a : *axes) {
            if (!(a.inc_deg > 0.0)) throw std::runtime_error("rotation grid: increment must be > 0");
            if (!(a.min_deg < a.max_deg))
                throw std::runtime_error("rotation grid: min must be < max");
        }
    }
}

std::uint64_t RotationGrid::total_triples() const {
    std::uint64_t n = 1;
    for (const AxisRange& a : global) n *= std::uint64_t(a.count());
    for (const AxisRange& a : local) n *= std::uint64_t(a.count());
    return n;
}

AngleTriple grid_triple(const RotationGrid& grid, std::uint64_t index) {
    // Axis order (outer to inner): gX gY gZ lX lY lZ.
    const std::array<const AxisRange*, 6> axes = {&grid.global[0], &grid.global[1],
                                                  &grid.global[2], &grid.local[0],
                                                  &grid.local[1],  &grid.local[2]};
    std::array<int, 6> idx{};
    for (int a = 5; a >= 0; --a) {
        const int n = axes[a]->count();
        idx[a] = int(index % std::uint64_t(n));
        index /= std::uint64_t(n);
    }
    AngleTriple t;
    for (int a = 0; a < 3; ++a) t.global_deg[a] = axes[a]->value(idx[a]);
    for (int a = 0; a < 3; ++a) t.local_deg[a] = axes[3 + a]->value(idx[3 + a]);
    return t;
}

std::vector<AngleTriple> enumerate_grid(const RotationGrid& grid) {
    grid.validate();
    const std::uint64_t total = grid.total_triples();
    std::vector<AngleTriple> out;
    out.reserve(size_t(total));
    for (std::uint64_t i = 0; i < total; ++i) out.push_back(grid_triple(grid, i));
    return out;
}

Transform candidate_pose(const Transform& base, const std::array<double, 3>& global_deg,
                         const std::array<double, 3>& local_deg) {
    const Rotation rg = euler_xyz(deg_to_rad(global_deg[0]), deg_to_rad(global_deg[1]),
                                  deg_to_rad(global_deg[2]));
    const Rotation rl = euler_xyz(deg_to_rad(local_deg[0]), deg_to_rad(local_deg[1]),
                                  deg_to_rad(local_deg[2]));
    return compose(Transform{rg, Vec3{}}, compose(base, Transform{rl, Vec3{}}));
}

RayBoxResult ray_box_intersect(const Vec3& origin, const Vec3& dir, const Aabb& box) {
    const double len = norm(dir);
    if (len < 1e-12) throw std::runtime_error("ray_box_intersect: zero direction");
    if (std::fabs(len - 1.0) > 1e-9)
        throw std::runtime_error("ray_box_intersect: direction must be unit length");

    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
        if (std::fabs(dir[i]) < 1e-300) {
            if (origin[i] < box.min[i] || origin[i] > box.max[i]) return {};
            continue;
        }
        double lo = (box.min[i] - origin[i]) / dir[i];
        double hi = (box.max[i] - origin[i]) / dir[i];
        if (lo > hi) std::swap(lo, hi);
        t0 = std::max(t0, lo);
        t1 = std::min(t1, hi);
        if (t0 > t1) return {};  // grazing keeps t0 == t1 and stays a hit
    }
    if (t1 < 0.0) return {};  // box entirely behind the origin
    return {true, std::max(t0, 0.0)};
}

CandidateDb build_candidate_db(const ObjectPose& pose, const Transform& base,
                               const RotationGrid& grid, const SceneConfig& scene,
                               std::uint64_t cap, std::uint64_t seed) {
    grid.validate();
    if (cap == 0) throw std::runtime_error("build_candidate_db: cap must be positive");

    CandidateDb db;
    db.base = base;
    db.grid = grid;
    db.seed = seed;
    db.cap = cap;
    db.raw_triples = grid.total_triples();

    const double table_z = scene.table_z();
    static const Vec3 palm_axis{0.0, 0.0, 1.0};

    std::vector<std::uint64_t> kept;
    for (std::uint64_t i = 0; i < db.raw_triples; ++i) {
        const AngleTriple t = grid_triple(grid, i);
        const Transform q = candidate_pose(base, t.global_deg, t.local_deg);
        // Reject below the table plane (gripper frame origin, world z).
        const Vec3 origin_w = pose.world_to_object.apply(q.translation);
        if (origin_w.z < table_z) continue;
        // Reject palm rays that miss the object bounding box.
        const Vec3 palm_dir = q.rotation.apply(palm_axis);
        if (!ray_box_intersect(q.translation, palm_dir, pose.aabb_in_object).hit) continue;
        kept.push_back(i);
    }
    db.survivors = kept.size();

    if (kept.size() > cap) {
        Rng rng(derive_seed(seed, "candidate-cap"));
        const auto picks = sample_without_replacement(kept.size(), cap, rng);
        std::vector<std::uint64_t> capped;
        capped.reserve(size_t(cap));
        for (const std::uint64_t p : picks) capped.push_back(kept[size_t(p)]);
        kept = std::move(capped);  // picks are ascending, so order is preserved
    }

    db.candidates.reserve(kept.size());
    for (const std::uint64_t i : kept) {
        const AngleTriple t = grid_triple(grid, i);
        GraspCandidate c;
        c.object_to_gripper = candidate_pose(base, t.global_deg, t.local_deg);
        c.global_deg = t.global_deg;
        c.local_deg = t.local_deg;
        c.candidate_id = i;
        db.candidates.push_back(c);
    }
    return db;
}

namespace {

constexpr char kMagic[8] = {'G', 'C', 'D', 'B', '0', '0', '0', '1'};

nlohmann::json axis_json(const AxisRange& a) {
    return nlohmann::json{{"min", a.min_deg}, {"max", a.max_deg}, {"inc", a.inc_deg}};
}

AxisRange axis_from_json(const nlohmann::json& j) {
    return AxisRange{j.at("min").get<double>(), j.at("max").get<double>(),
                     j.at("inc").get<double>()};
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

std::uint64_t get_u64(const char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

double get_f64(const char* p) {
    const std::uint64_t bits = get_u64(p);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace

void save_candidate_db(const CandidateDb& db, const std::string& path) {
    nlohmann::json header;
    header["object"] = db.object_name;
    header["seed"] = db.seed;
    header["cap"] = db.cap;
    header["raw_triples"] = db.raw_triples;
    header["survivors"] = db.survivors;
    header["count"] = db.candidates.size();
    header["base"] = encode_frame(db.base);
    header["grid"] = {{"global_x", axis_json(db.grid.global[0])},
                      {"global_y", axis_json(db.grid.global[1])},
                      {"global_z", axis_json(db.grid.global[2])},
                      {"local_x", axis_json(db.grid.local[0])},
                      {"local_y", axis_json(db.grid.local[1])},
                      {"local_z", axis_json(db.grid.local[2])}};
    const std::string header_text = header.dump();

    std::string blob;
    blob.reserve(16 + header_text.size() + db.candidates.size() * (8 + 18 * 8));
    blob.append(kMagic, 8);
    put_u64(blob, header_text.size());
    blob += header_text;
    for (const GraspCandidate& c : db.candidates) {
        put_u64(blob, c.candidate_id);
        for (const double a : c.global_deg) put_f64(blob, a);
        for (const double a : c.local_deg) put_f64(blob, a);
        for (const double x : encode_frame(c.object_to_gripper)) put_f64(blob, x);
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write candidate db: " + path);
    out.write(blob.data(), std::streamsize(blob.size()));
    if (!out) throw std::runtime_error("short write on candidate db: " + path);
}

CandidateDb load_candidate_db(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open candidate db: " + path);
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (blob.size() < 16 || std::memcmp(blob.data(), kMagic, 8) != 0)
        throw std::runtime_error("candidate db: bad magic in " + path);
    const std::uint64_t header_len = get_u64(blob.data() + 8);
    if (blob.size() < 16 + header_len)
        throw std::runtime_error("candidate db: truncated header in " + path);
    const nlohmann::json header = nlohmann::json::parse(blob.substr(16, size_t(header_len)));

    CandidateDb db;
    db.object_name = header.at("object").get<std::string>();
    db.seed = header.at("seed").get<std::uint64_t>();
    db.cap = header.at("cap").get<std::uint64_t>();
    db.raw_triples = header.at("raw_triples").get<std::uint64_t>();
    db.survivors = header.at("survivors").get<std::uint64_t>();
    Frame12 base_frame{};
    for (int i = 0; i < 12; ++i) base_frame[size_t(i)] = header.at("base").at(size_t(i)).get<double>();
    db.base = decode_frame(base_frame);
    const auto& g = header.at("grid");
    db.grid.global = {axis_from_json(g.at("global_x")), axis_from_json(g.at("global_y")),
                      axis_from_json(g.at("global_z"))};
    db.grid.local = {axis_from_json(g.at("local_x")), axis_from_json(g.at("local_y")),
                     axis_from_json(g.at("local_z"))};

    const std::uint64_t count = header.at("count").get<std::uint64_t>();
    constexpr size_t kRow = 8 + 18 * 8;
    if (blob.size() != 16 + header_len + count * kRow)
        throw std::runtime_error("candidate db: payload size mismatch in " + path);

    const char* p = blob.data() + 16 + header_len;
    db.candidates.reserve(size_t(count));
    for (std::uint64_t i = 0; i < count; ++i, p += kRow) {
        GraspCandidate c;
        c.candidate_id = get_u64(p);
        for (int k = 0; k < 3; ++k) c.global_deg[size_t(k)] = get_f64(p + 8 + 8 * k);
        for (int k = 0; k < 3; ++k) c.local_deg[size_t(k)] = get_f64(p + 32 + 8 * k);
        Frame12 f{};
        for (int k = 0; k < 12; ++k) f[size_t(k)] = get_f64(p + 56 + 8 * k);
        c.object_to_gripper = decode_frame(f);
        db.candidates.push_back(c);
    }
    return db;
}

}  // namespace graspgen

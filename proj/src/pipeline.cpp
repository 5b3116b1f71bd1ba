#include "graspgen/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <thread>

#include "graspgen/datastore.hpp"
#include "graspgen/rng.hpp"

namespace fs = std::filesystem;

namespace graspgen {

namespace {

// ---------------------------------------------------------------- config io

void check_known_fields(const nlohmann::json& j, const std::set<std::string>& allowed,
                        const std::string& path) {
    if (!j.is_object()) return;
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) {
            throw std::runtime_error("config: unknown field '" +
                                     (path.empty() ? key : path + "." + key) + "'");
        }
    }
}

AxisRange axis_from_json(const nlohmann::json& j, const std::string& path) {
    check_known_fields(j, {"min", "max", "inc"}, path);
    AxisRange a;
    a.min_deg = j.value("min", 0.0);
    a.max_deg = j.value("max", 360.0);
    a.inc_deg = j.value("inc", 45.0);
    return a;
}

nlohmann::json axis_to_json(const AxisRange& a) {
    return {{"min", a.min_deg}, {"max", a.max_deg}, {"inc", a.inc_deg}};
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const char c : s) {
        h ^= std::uint64_t(static_cast<unsigned char>(c));
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

nlohmann::json PipelineConfig::to_json() const {
    nlohmann::json j;
    j["corpus"] = corpus;
    j["out"] = out;
    j["seed"] = seed;
    j["workers"] = workers;
    j["scene"] = {{"table_z", scene.table_z()},
                  {"table_extent", {scene.table_extent_x, scene.table_extent_y}},
                  {"lift_target", {scene.lift_target.x, scene.lift_target.y, scene.lift_target.z}},
                  {"drop_height", scene.drop_height},
                  {"uniform_scale", scene.uniform_scale}};
    j["hand"] = {{"palm_radius", hand.palm_radius},
                 {"proximal_length", hand.proximal_length},
                 {"distal_length", hand.distal_length},
                 {"knuckle_height", hand.knuckle_height},
                 {"base_angles_deg",
                  {rad_to_deg(hand.base_angles[0]), rad_to_deg(hand.base_angles[1]),
                   rad_to_deg(hand.base_angles[2])}},
                 {"open_angle_deg", rad_to_deg(hand.open_angle)},
                 {"max_close_angle_deg", rad_to_deg(hand.max_close_angle)},
                 {"distal_angle_deg", rad_to_deg(hand.distal_angle)},
                 {"close_step_deg", rad_to_deg(hand.close_step)},
                 {"finger_thickness", hand.finger_thickness}};
    j["grid"] = {{"global_x", axis_to_json(grid.global[0])},
                 {"global_y", axis_to_json(grid.global[1])},
                 {"global_z", axis_to_json(grid.global[2])},
                 {"local_x", axis_to_json(grid.local[0])},
                 {"local_y", axis_to_json(grid.local[1])},
                 {"local_z", axis_to_json(grid.local[2])}};
    j["candidates"] = {{"cap", candidate_cap}, {"batch", batch_size}};
    j["camera"] = {{"fov_deg", camera.fov_deg},
                   {"near", camera.near},
                   {"far", camera.far},
                   {"width", camera.width},
                   {"height", camera.height}};
    nlohmann::json mappings = nlohmann::json::array();
    for (const CameraMapping m : sim.mappings) mappings.push_back(mapping_name(m));
    j["sim"] = {{"friction", sim.friction},
                {"cone_facets", sim.cone_facets},
                {"standoffs",
                 {sim.standoff_distances[0], sim.standoff_distances[1], sim.standoff_distances[2]}},
                {"proximity_range", sim.proximity_range},
                {"camera_offset", sim.camera_offset},
                {"mappings", mappings}};
    j["filters"] = {{"variance_threshold", variance_threshold},
                    {"bisect_epsilon", bisect_epsilon},
                    {"sigma_k", sigma_k}};
    j["split"] = {{"validation_fraction", split.validation_fraction}};
    return j;
}

PipelineConfig config_from_json(const nlohmann::json& j) {
    check_known_fields(j, {"corpus", "out", "seed", "workers", "scene", "hand", "grid",
                           "candidates", "camera", "sim", "filters", "split"},
                       "");
    PipelineConfig c;
    c.corpus = j.value("corpus", "");
    c.out = j.value("out", "out");
    c.seed = j.value("seed", std::uint64_t{0});
    c.workers = j.value("workers", 0);

    if (j.contains("scene")) {
        const auto& s = j.at("scene");
        check_known_fields(
            s, {"table_z", "table_extent", "lift_target", "drop_height", "uniform_scale"},
            "scene");
        c.scene.world_to_table.translation.z = s.value("table_z", 0.65);
        if (s.contains("table_extent")) {
            c.scene.table_extent_x = s.at("table_extent").at(0).get<double>();
            c.scene.table_extent_y = s.at("table_extent").at(1).get<double>();
        }
        if (s.contains("lift_target")) {
            c.scene.lift_target = Vec3{s.at("lift_target").at(0).get<double>(),
                                       s.at("lift_target").at(1).get<double>(),
                                       s.at("lift_target").at(2).get<double>()};
        }
        c.scene.drop_height = s.value("drop_height", 0.3);
        c.scene.uniform_scale = s.value("uniform_scale", 1.0);
        if (!(c.scene.uniform_scale > 0.0))
            throw std::runtime_error("config: scene.uniform_scale must be > 0");
    }
    if (j.contains("hand")) {
        const auto& h = j.at("hand");
        check_known_fields(h,
                           {"palm_radius", "proximal_length", "distal_length", "knuckle_height",
                            "base_angles_deg", "open_angle_deg", "max_close_angle_deg",
                            "distal_angle_deg", "close_step_deg", "finger_thickness"},
                           "hand");
        c.hand.palm_radius = h.value("palm_radius", c.hand.palm_radius);
        c.hand.proximal_length = h.value("proximal_length", c.hand.proximal_length);
        c.hand.distal_length = h.value("distal_length", c.hand.distal_length);
        c.hand.knuckle_height = h.value("knuckle_height", c.hand.knuckle_height);
        if (h.contains("base_angles_deg")) {
            for (int i = 0; i < 3; ++i)
                c.hand.base_angles[size_t(i)] =
                    deg_to_rad(h.at("base_angles_deg").at(size_t(i)).get<double>());
        }
        if (h.contains("open_angle_deg"))
            c.hand.open_angle = deg_to_rad(h.at("open_angle_deg").get<double>());
        if (h.contains("max_close_angle_deg"))
            c.hand.max_close_angle = deg_to_rad(h.at("max_close_angle_deg").get<double>());
        if (h.contains("distal_angle_deg"))
            c.hand.distal_angle = deg_to_rad(h.at("distal_angle_deg").get<double>());
        if (h.contains("close_step_deg"))
            c.hand.close_step = deg_to_rad(h.at("close_step_deg").get<double>());
        c.hand.finger_thickness = h.value("finger_thickness", c.hand.finger_thickness);
        c.hand.validate();
    }
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        check_known_fields(
            g, {"global_x", "global_y", "global_z", "local_x", "local_y", "local_z"}, "grid");
        const RotationGrid d = RotationGrid::defaults();
        c.grid.global[0] = g.contains("global_x") ? axis_from_json(g.at("global_x"), "grid.global_x")
                                                  : d.global[0];
        c.grid.global[1] = g.contains("global_y") ? axis_from_json(g.at("global_y"), "grid.global_y")
                                                  : d.global[1];
        c.grid.global[2] = g.contains("global_z") ? axis_from_json(g.at("global_z"), "grid.global_z")
                                                  : d.global[2];
        c.grid.local[0] =
            g.contains("local_x") ? axis_from_json(g.at("local_x"), "grid.local_x") : d.local[0];
        c.grid.local[1] =
            g.contains("local_y") ? axis_from_json(g.at("local_y"), "grid.local_y") : d.local[1];
        c.grid.local[2] =
            g.contains("local_z") ? axis_from_json(g.at("local_z"), "grid.local_z") : d.local[2];
        c.grid.validate();
    }
    if (j.contains("candidates")) {
        const auto& cc = j.at("candidates");
        check_known_fields(cc, {"cap", "batch"}, "candidates");
        c.candidate_cap = cc.value("cap", std::uint64_t{10000});
        c.batch_size = cc.value("batch", std::uint64_t{1500});
        if (c.candidate_cap == 0 || c.batch_size == 0)
            throw std::runtime_error("config: candidates.cap and candidates.batch must be > 0");
    }
    if (j.contains("camera")) {
        const auto& cam = j.at("camera");
        check_known_fields(cam, {"fov_deg", "near", "far", "width", "height"}, "camera");
        c.camera.fov_deg = cam.value("fov_deg", 50.0);
        c.camera.near = cam.value("near", 0.01);
        c.camera.far = cam.value("far", 0.75);
        c.camera.width = cam.value("width", 128);
        c.camera.height = cam.value("height", 128);
        if (!(c.camera.near > 0.0 && c.camera.near < c.camera.far))
            throw std::runtime_error("config: camera clipping planes must satisfy 0 < near < far");
        if (!(c.camera.fov_deg > 0.0 && c.camera.fov_deg < 180.0))
            throw std::runtime_error("config: camera.fov_deg must lie in (0, 180)");
        if (c.camera.width <= 0 || c.camera.height <= 0)
            throw std::runtime_error("config: camera resolution must be positive");
    }
    if (j.contains("sim")) {
        const auto& s = j.at("sim");
        check_known_fields(s,
                           {"friction", "cone_facets", "standoffs", "proximity_range",
                            "camera_offset", "mappings"},
                           "sim");
        c.sim.friction = s.value("friction", 0.71);
        c.sim.cone_facets = s.value("cone_facets", 8);
        if (s.contains("standoffs")) {
            for (int i = 0; i < 3; ++i)
                c.sim.standoff_distances[size_t(i)] = s.at("standoffs").at(size_t(i)).get<double>();
        }
        c.sim.proximity_range = s.value("proximity_range", 0.5);
        c.sim.camera_offset = s.value("camera_offset", 0.25);
        if (s.contains("mappings")) {
            c.sim.mappings.clear();
            for (const auto& m : s.at("mappings"))
                c.sim.mappings.push_back(mapping_from_name(m.get<std::string>()));
            if (c.sim.mappings.empty())
                throw std::runtime_error("config: sim.mappings must not be empty");
        }
        if (!(c.sim.friction > 0.0)) throw std::runtime_error("config: sim.friction must be > 0");
        if (c.sim.cone_facets < 4)
            throw std::runtime_error("config: sim.cone_facets must be >= 4");
    }
    if (j.contains("filters")) {
        const auto& f = j.at("filters");
        check_known_fields(f, {"variance_threshold", "bisect_epsilon", "sigma_k"}, "filters");
        c.variance_threshold = f.value("variance_threshold", 1e-3);
        c.bisect_epsilon = f.value("bisect_epsilon", 0.01);
        c.sigma_k = f.value("sigma_k", 4.0);
        if (!(c.sigma_k > 0.0)) throw std::runtime_error("config: filters.sigma_k must be > 0");
    }
    if (j.contains("split")) {
        const auto& s = j.at("split");
        check_known_fields(s, {"validation_fraction"}, "split");
        c.split.validation_fraction = s.value("validation_fraction", 0.10);
        if (!(c.split.validation_fraction > 0.0 && c.split.validation_fraction < 1.0))
            throw std::runtime_error("config: split.validation_fraction must lie in (0, 1)");
    }
    c.sim.camera_fov_deg = c.camera.fov_deg;
    c.split.seed = c.seed;
    return c;
}

PipelineConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    nlohmann::json j;
    in >> j;
    PipelineConfig config = config_from_json(j);
    // A relative corpus is resolved against the config file, so configs stay
    // portable across working directories.
    if (!config.corpus.empty() && fs::path(config.corpus).is_relative()) {
        config.corpus = (fs::path(path).parent_path() / config.corpus).lexically_normal().string();
    }
    return config;
}

// ------------------------------------------------------------ job planning

std::vector<JobShard> plan_jobs(const std::vector<std::pair<std::string, std::uint64_t>>& counts,
                                int workers) {
    if (workers <= 0) throw std::runtime_error("plan_jobs: worker count must be positive");
    std::uint64_t total = 0;
    for (const auto& [name, n] : counts) total += n;

    std::vector<JobShard> jobs;
    if (total == 0) return jobs;
    const std::uint64_t w = std::uint64_t(workers);
    // Shard k gets floor(total/w) + (k < total mod w) candidates; walk the
    // concatenated candidate list and cut it at those boundaries.
    std::uint64_t obj_idx = 0, obj_off = 0;
    for (std::uint64_t k = 0; k < w; ++k) {
        std::uint64_t want = total / w + (k < total % w ? 1 : 0);
        while (want > 0 && obj_idx < counts.size()) {
            const std::uint64_t avail = counts[size_t(obj_idx)].second - obj_off;
            if (avail == 0) {
                ++obj_idx;
                obj_off = 0;
                continue;
            }
            const std::uint64_t take = std::min(want, avail);
            JobShard shard;
            shard.object = counts[size_t(obj_idx)].first;
            shard.begin = obj_off;
            shard.end = obj_off + take;
            shard.index = int(jobs.size());
            shard.worker = int(k);
            jobs.push_back(shard);
            obj_off += take;
            want -= take;
        }
    }
    return jobs;
}

const char* stage_name(Stage s) {
    switch (s) {
        case Stage::preprocess: return "preprocess";
        case Stage::candidates: return "candidates";
        case Stage::simulate: return "simulate";
        case Stage::postprocess: return "postprocess";
        case Stage::split: return "split";
        case Stage::export_stage: return "export";
    }
    return "?";
}

namespace {

// ------------------------------------------------------ stage bookkeeping

// Identity of the run for idempotence checks: everything except the output
// path and the worker count (neither affects final bytes).
std::string config_identity_hash(const PipelineConfig& config) {
    nlohmann::json j = config.to_json();
    j.erase("out");
    j.erase("workers");
    return hex64(fnv1a64(j.dump()));
}

std::string stage_dir(const PipelineConfig& config, Stage s) {
    switch (s) {
        case Stage::preprocess: return config.out + "/preprocess";
        case Stage::candidates: return config.out + "/candidates";
        case Stage::simulate: return config.out + "/simulate";
        case Stage::postprocess: return config.out + "/post";
        case Stage::split: return config.out + "/final";
        case Stage::export_stage: return config.out + "/export";
    }
    return config.out;
}

bool stage_complete(const PipelineConfig& config, Stage s, const std::string& hash) {
    std::ifstream in(stage_dir(config, s) + "/.stage.json");
    if (!in) return false;
    try {
        nlohmann::json j;
        in >> j;
        return j.value("complete", false) && j.value("config_hash", "") == hash;
    } catch (...) {
        return false;
    }
}

void mark_stage_complete(const PipelineConfig& config, Stage s, const std::string& hash) {
    nlohmann::json j;
    j["stage"] = stage_name(s);
    j["config_hash"] = hash;
    j["complete"] = true;
    std::ofstream out(stage_dir(config, s) + "/.stage.json", std::ios::trunc);
    out << j.dump(2) << "\n";
}

void require_stage(const PipelineConfig& config, Stage s, const std::string& hash) {
    if (!stage_complete(config, s, hash)) {
        throw std::runtime_error(std::string("stage '") + stage_name(s) +
                                 "' has not completed for this config; run it first");
    }
}

void update_summary(const PipelineConfig& config, const std::string& section,
                    const nlohmann::json& content) {
    const std::string path = config.out + "/summary.json";
    nlohmann::json summary = nlohmann::json::object();
    if (std::ifstream in(path); in) {
        try {
            in >> summary;
        } catch (...) {
            summary = nlohmann::json::object();
        }
    }
    summary[section] = content;
    summary["config_hash"] = config_identity_hash(config);
    std::ofstream out(path, std::ios::trunc);
    out << summary.dump(2) << "\n";
}

// ------------------------------------------------------------- preprocess

struct PreparedObject {
    std::string name;
    std::string file;
    MassProperties mass;
    ObjectPose pose;
    Transform base;
    ObjParseStats parse_stats;
};

nlohmann::json prepared_to_json(const PreparedObject& o) {
    nlohmann::json j;
    j["name"] = o.name;
    j["file"] = o.file;
    j["mass"] = {{"volume", o.mass.volume},
                 {"com", {o.mass.center_of_mass.x, o.mass.center_of_mass.y, o.mass.center_of_mass.z}},
                 {"mass", o.mass.mass}};
    nlohmann::json inertia = nlohmann::json::array();
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) inertia.push_back(o.mass.inertia(i, k));
    j["mass"]["inertia"] = inertia;
    j["pose"] = {{"world_to_object", encode_frame(o.pose.world_to_object)},
                 {"aabb_min",
                  {o.pose.aabb_in_object.min.x, o.pose.aabb_in_object.min.y,
                   o.pose.aabb_in_object.min.z}},
                 {"aabb_max",
                  {o.pose.aabb_in_object.max.x, o.pose.aabb_in_object.max.y,
                   o.pose.aabb_in_object.max.z}}};
    j["base"] = encode_frame(o.base);
    j["parse"] = {{"dropped_degenerate", o.parse_stats.dropped_degenerate},
                  {"triangulated_polygons", o.parse_stats.triangulated_polygons}};
    return j;
}

PreparedObject prepared_from_json(const nlohmann::json& j) {
    PreparedObject o;
    o.name = j.at("name").get<std::string>();
    o.file = j.at("file").get<std::string>();
    o.mass.volume = j.at("mass").at("volume").get<double>();
    o.mass.mass = j.at("mass").at("mass").get<double>();
    o.mass.center_of_mass = Vec3{j.at("mass").at("com").at(0).get<double>(),
                                 j.at("mass").at("com").at(1).get<double>(),
                                 j.at("mass").at("com").at(2).get<double>()};
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k)
            o.mass.inertia(i, k) = j.at("mass").at("inertia").at(size_t(3 * i + k)).get<double>();
    Frame12 f{};
    for (int i = 0; i < 12; ++i)
        f[size_t(i)] = j.at("pose").at("world_to_object").at(size_t(i)).get<double>();
    o.pose.world_to_object = decode_frame(f);
    o.pose.aabb_in_object.min = Vec3{j.at("pose").at("aabb_min").at(0).get<double>(),
                                     j.at("pose").at("aabb_min").at(1).get<double>(),
                                     j.at("pose").at("aabb_min").at(2).get<double>()};
    o.pose.aabb_in_object.max = Vec3{j.at("pose").at("aabb_max").at(0).get<double>(),
                                     j.at("pose").at("aabb_max").at(1).get<double>(),
                                     j.at("pose").at("aabb_max").at(2).get<double>()};
    for (int i = 0; i < 12; ++i) f[size_t(i)] = j.at("base").at(size_t(i)).get<double>();
    o.base = decode_frame(f);
    return o;
}

// Object mesh in {O} coordinates, exactly as preprocess derived it.
TriMesh load_object_mesh(const PipelineConfig& config, const PreparedObject& obj) {
    TriMesh mesh = load_obj_file(config.corpus + "/" + obj.file);
    if (config.scene.uniform_scale != 1.0) mesh = scaled(mesh, config.scene.uniform_scale);
    return mesh_in_object_frame(mesh);
}

std::vector<PreparedObject> load_prepared(const PipelineConfig& config) {
    const std::string path = stage_dir(config, Stage::preprocess) + "/objects.json";
    std::ifstream in(path);
    if (!in) throw std::runtime_error("missing " + path + "; run the preprocess stage first");
    nlohmann::json j;
    in >> j;
    std::vector<PreparedObject> out;
    for (const auto& item : j.at("objects")) out.push_back(prepared_from_json(item));
    return out;
}

nlohmann::json run_preprocess(const PipelineConfig& config) {
    const std::string dir = stage_dir(config, Stage::preprocess);
    fs::create_directories(dir);

    std::vector<std::string> files;
    if (!fs::is_directory(config.corpus))
        throw std::runtime_error("corpus directory not found: " + config.corpus);
    for (const auto& entry : fs::directory_iterator(config.corpus)) {
        if (entry.is_regular_file() && entry.path().extension() == ".obj")
            files.push_back(entry.path().filename().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("corpus has no .obj files: " + config.corpus);

    nlohmann::json objects = nlohmann::json::array();
    nlohmann::json quarantined = nlohmann::json::array();
    for (const std::string& file : files) {
        try {
            ObjParseStats stats;
            TriMesh mesh = load_obj_file(config.corpus + "/" + file, &stats);
            if (config.scene.uniform_scale != 1.0)
                mesh = scaled(mesh, config.scene.uniform_scale);
            if (!is_watertight(mesh))
                throw std::runtime_error("mesh is not watertight");

            PreparedObject obj;
            obj.name = mesh.name;
            obj.file = file;
            obj.parse_stats = stats;
            const TriMesh mesh_o = mesh_in_object_frame(mesh);
            obj.mass = mass_properties(mesh_o, 1.0);
            obj.pose = resting_pose(mesh, config.scene);
            obj.base = initial_gripper_pose(obj.pose);
            objects.push_back(prepared_to_json(obj));
        } catch (const std::exception& e) {
            quarantined.push_back({{"file", file}, {"error", e.what()}});
        }
    }
    if (objects.empty())
        throw std::runtime_error("preprocess: every corpus object failed validation");

    nlohmann::json doc;
    doc["objects"] = objects;
    doc["quarantined"] = quarantined;
    std::ofstream out(dir + "/objects.json", std::ios::trunc);
    out << doc.dump(2) << "\n";

    return {{"objects", objects.size()}, {"quarantined", quarantined.size()}};
}

// ------------------------------------------------------------- candidates

nlohmann::json run_candidates(const PipelineConfig& config) {
    const std::string dir = stage_dir(config, Stage::candidates);
    fs::create_directories(dir);
    const auto prepared = load_prepared(config);

    nlohmann::json per_object = nlohmann::json::object();
    std::uint64_t total = 0;
    for (const PreparedObject& obj : prepared) {
        CandidateDb db = build_candidate_db(obj.pose, obj.base, config.grid, config.scene,
                                            config.candidate_cap,
                                            derive_seed(config.seed, "candidates-" + obj.name));
        db.object_name = obj.name;
        save_candidate_db(db, dir + "/" + obj.name + ".gcdb");
        per_object[obj.name] = {{"raw_triples", db.raw_triples},
                                {"survivors", db.survivors},
                                {"kept", db.candidates.size()}};
        total += db.candidates.size();
    }
    return {{"per_object", per_object}, {"total_candidates", total}};
}

// --------------------------------------------------------------- simulate

struct SimJobResult {
    std::map<std::string, std::uint64_t> outcome_counts;
    std::uint64_t evaluated = 0;
    std::map<std::string, std::uint64_t> records_per_mapping;
};

nlohmann::json load_or_create_plan(const PipelineConfig& config, const std::string& hash,
                                   const std::vector<std::pair<std::string, std::uint64_t>>& counts,
                                   int workers) {
    const std::string plan_path = stage_dir(config, Stage::simulate) + "/plan.json";
    if (std::ifstream in(plan_path); in) {
        try {
            nlohmann::json plan;
            in >> plan;
            if (plan.value("config_hash", "") == hash) return plan;
        } catch (...) {
        }
    }
    // Fresh plan: any previous partial outputs used a different config.
    fs::remove_all(stage_dir(config, Stage::simulate));
    fs::create_directories(stage_dir(config, Stage::simulate));

    const auto jobs = plan_jobs(counts, workers);
    nlohmann::json plan;
    plan["config_hash"] = hash;
    plan["jobs"] = nlohmann::json::array();
    for (const JobShard& j : jobs) {
        plan["jobs"].push_back({{"object", j.object},
                                {"begin", j.begin},
                                {"end", j.end},
                                {"index", j.index},
                                {"worker", j.worker}});
    }
    std::ofstream out(plan_path, std::ios::trunc);
    out << plan.dump(2) << "\n";
    return plan;
}

nlohmann::json run_simulate(const PipelineConfig& config, const RunOptions& options,
                            const std::string& hash, int workers) {
    const std::string dir = stage_dir(config, Stage::simulate);
    fs::create_directories(dir);

    const auto prepared = load_prepared(config);
    std::map<std::string, const PreparedObject*> by_name;
    for (const PreparedObject& o : prepared) by_name[o.name] = &o;

    // Candidate batch per object: the leading `batch` entries of each DB.
    std::vector<std::pair<std::string, std::uint64_t>> counts;
    std::uint64_t db_total = 0;
    for (const PreparedObject& o : prepared) {
        const CandidateDb db =
            load_candidate_db(stage_dir(config, Stage::candidates) + "/" + o.name + ".gcdb");
        db_total += db.candidates.size();
        counts.push_back({o.name, std::min<std::uint64_t>(config.batch_size,
                                                          db.candidates.size())});
    }

    const nlohmann::json plan = load_or_create_plan(config, hash, counts, workers);
    std::vector<JobShard> jobs;
    for (const auto& j : plan.at("jobs")) {
        JobShard shard;
        shard.object = j.at("object").get<std::string>();
        shard.begin = j.at("begin").get<std::uint64_t>();
        shard.end = j.at("end").get<std::uint64_t>();
        shard.index = j.at("index").get<int>();
        shard.worker = j.value("worker", 0);
        jobs.push_back(shard);
    }

    fs::create_directories(dir + "/attempts");
    for (const CameraMapping m : config.sim.mappings)
        fs::create_directories(dir + "/shards/" + mapping_name(m));

    const auto job_tag = [](int index) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "job_%04d", index);
        return std::string(buf);
    };

    // Resume: a job is complete once its attempts file exists (written last).
    std::vector<const JobShard*> todo;
    for (const JobShard& j : jobs) {
        if (!fs::exists(dir + "/attempts/" + job_tag(j.index) + ".json")) todo.push_back(&j);
    }

    // Per-object immutable inputs, loaded once and shared read-only.
    struct ObjectData {
        const PreparedObject* prep;
        TriMesh mesh_o;
        std::vector<GraspCandidate> batch;
    };
    std::map<std::string, ObjectData> object_data;
    for (const PreparedObject& o : prepared) {
        bool needed = false;
        for (const JobShard* j : todo) needed |= (j->object == o.name);
        if (!needed) continue;
        ObjectData data;
        data.prep = &o;
        data.mesh_o = load_object_mesh(config, o);
        CandidateDb db =
            load_candidate_db(stage_dir(config, Stage::candidates) + "/" + o.name + ".gcdb");
        const std::uint64_t n = std::min<std::uint64_t>(config.batch_size, db.candidates.size());
        data.batch.assign(db.candidates.begin(), db.candidates.begin() + std::ptrdiff_t(n));
        object_data[o.name] = std::move(data);
    }

    const TablePlane table{config.scene.table_z(), config.scene.table_extent_x,
                           config.scene.table_extent_y};
    const nlohmann::json provenance = {
        {"config", config.to_json()},
        {"attempt_composition", "proximity pose + standoffs 0/1/2"},
        {"torque_normalization", "max contact radius about the COM"},
        {"frame_order", "row-major 3x4 [R|t]"}};

    std::atomic<size_t> next{0};
    std::atomic<int> completed{0};
    std::atomic<bool> stop{false};
    std::mutex error_mutex;
    std::vector<std::string> errors;

    const auto run_job = [&](const JobShard& job) {
        const ObjectData& data = object_data.at(job.object);
        const std::string tag = job_tag(job.index);

        // Each mapping gets its own shard; .tmp until fully written.
        std::map<CameraMapping, std::unique_ptr<ShardWriter>> writers;
        for (const CameraMapping m : config.sim.mappings) {
            const std::string tmp = dir + "/shards/" + mapping_name(m) + "/" + tag + ".tmp";
            fs::remove_all(tmp);
            writers[m] = std::make_unique<ShardWriter>(tmp, mapping_name(m), config.camera.width,
                                                       config.camera.height, provenance);
        }

        SimJobResult result;
        nlohmann::json attempt_log = nlohmann::json::array();
        for (std::uint64_t i = job.begin; i < job.end; ++i) {
            const GraspCandidate& cand = data.batch[size_t(i)];
            const CandidateEvaluation eval =
                evaluate_candidate(cand, data.mesh_o, data.prep->pose, config.scene, config.hand,
                                   data.prep->mass, config.sim);
            ++result.evaluated;
            for (const GraspAttempt& att : eval.attempts) {
                ++result.outcome_counts[outcome_name(att.outcome)];
                nlohmann::json entry = {{"candidate", att.candidate_id},
                                        {"attempt", att.attempt_index},
                                        {"outcome", outcome_name(att.outcome)}};
                if (att.otm_roll_fallback) entry["otm_roll_fallback"] = true;
                attempt_log.push_back(std::move(entry));
            }
            for (const GraspRecord& rec : eval.records) {
                if (options.record_observer) options.record_observer(rec);
                const Camera camera{rec.camera_in_world, config.camera};
                const RgbdImage image =
                    render(&data.mesh_o, data.prep->pose.world_to_object, &table, camera);
                writers.at(rec.mapping)->add(rec, image);
                ++result.records_per_mapping[mapping_name(rec.mapping)];
            }
        }

        for (const CameraMapping m : config.sim.mappings) {
            writers.at(m)->finalize();
            const std::string base = dir + "/shards/" + mapping_name(m) + "/" + tag;
            fs::rename(base + ".tmp", base);
        }

        nlohmann::json attempts_doc;
        attempts_doc["job"] = job.index;
        attempts_doc["object"] = job.object;
        attempts_doc["range"] = {job.begin, job.end};
        attempts_doc["evaluated"] = result.evaluated;
        attempts_doc["outcomes"] = result.outcome_counts;
        attempts_doc["records"] = result.records_per_mapping;
        attempts_doc["attempts"] = attempt_log;
        const std::string attempts_path = dir + "/attempts/" + tag + ".json";
        {
            std::ofstream out(attempts_path + ".tmp", std::ios::trunc);
            out << attempts_doc.dump(2) << "\n";
        }
        fs::rename(attempts_path + ".tmp", attempts_path);
    };

    const auto worker_loop = [&]() {
        for (;;) {
            if (stop.load()) return;
            const size_t i = next.fetch_add(1);
            if (i >= todo.size()) return;
            try {
                run_job(*todo[i]);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                errors.push_back(e.what());
                stop.store(true);
                return;
            }
            const int done = completed.fetch_add(1) + 1;
            if (options.interrupt_after_jobs >= 0 && done >= options.interrupt_after_jobs) {
                stop.store(true);
                return;
            }
        }
    };

    int pool = std::max(1, workers);
    if (options.interrupt_after_jobs >= 0) pool = 1;  // deterministic test hook
    std::vector<std::thread> threads;
    threads.reserve(size_t(pool));
    for (int i = 0; i < pool; ++i) threads.emplace_back(worker_loop);
    for (std::thread& t : threads) t.join();

    if (!errors.empty()) throw std::runtime_error("simulate: " + errors.front());
    if (options.interrupt_after_jobs >= 0 && completed.load() < int(todo.size())) {
        throw StageInterrupted("simulate interrupted after " + std::to_string(completed.load()) +
                               " jobs (test hook)");
    }

    // Aggregate the attempt logs for the summary.
    nlohmann::json outcome_totals = nlohmann::json::object();
    std::uint64_t evaluated = 0, attempts_total = 0, batch_total = 0;
    nlohmann::json records_totals = nlohmann::json::object();
    for (const JobShard& j : jobs) {
        std::ifstream in(dir + "/attempts/" + job_tag(j.index) + ".json");
        nlohmann::json doc;
        in >> doc;
        evaluated += doc.at("evaluated").get<std::uint64_t>();
        for (const auto& [k, v] : doc.at("outcomes").items()) {
            outcome_totals[k] = outcome_totals.value(k, std::uint64_t{0}) + v.get<std::uint64_t>();
            attempts_total += v.get<std::uint64_t>();
        }
        for (const auto& [k, v] : doc.at("records").items())
            records_totals[k] = records_totals.value(k, std::uint64_t{0}) + v.get<std::uint64_t>();
    }
    for (const auto& [name, n] : counts) batch_total += n;

    return {{"jobs", jobs.size()},
            {"candidates_in_dbs", db_total},
            {"selected", batch_total},
            {"evaluated", evaluated},
            {"skipped", db_total - batch_total},
            {"attempts_total", attempts_total},
            {"outcomes", outcome_totals},
            {"records", records_totals}};
}

// ---------------------------------------------------- postprocess + split

std::vector<std::string> mapping_shard_dirs(const PipelineConfig& config, CameraMapping m) {
    const std::string base = stage_dir(config, Stage::simulate) + "/shards/" + mapping_name(m);
    std::vector<std::string> dirs;
    if (fs::is_directory(base)) {
        for (const auto& entry : fs::directory_iterator(base)) {
            if (entry.is_directory() && entry.path().extension() != ".tmp")
                dirs.push_back(entry.path().string());
        }
    }
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

nlohmann::json run_postprocess(const PipelineConfig& config) {
    nlohmann::json out = nlohmann::json::object();
    for (const CameraMapping m : config.sim.mappings) {
        const Dataset ds = read_merge(mapping_shard_dirs(config, m));
        FilterReport report;
        const auto kept = run_filters(ds, config.variance_threshold, config.bisect_epsilon,
                                      config.sigma_k, report, config.camera.near,
                                      config.camera.far);

        const std::string dir =
            stage_dir(config, Stage::postprocess) + "/" + mapping_name(m) + "/data";
        fs::remove_all(dir);
        write_filtered_shard(ds, kept, dir,
                             {{"stage", "postprocess"}, {"filters", report.to_json()}});

        std::ofstream rep(stage_dir(config, Stage::postprocess) + "/" + mapping_name(m) +
                              "/filter_report.json",
                          std::ios::trunc);
        rep << report.to_json().dump(2) << "\n";
        out[mapping_name(m)] = {{"input", ds.samples.size()},
                                {"retained", kept.size()},
                                {"filters", report.to_json()["stages"]}};
    }
    return out;
}

nlohmann::json run_split(const PipelineConfig& config) {
    nlohmann::json out = nlohmann::json::object();
    for (const CameraMapping m : config.sim.mappings) {
        const std::string post_dir =
            stage_dir(config, Stage::postprocess) + "/" + mapping_name(m) + "/data";
        const Dataset ds = read_merge({post_dir});

        std::vector<size_t> successes;
        for (size_t i = 0; i < ds.samples.size(); ++i) {
            if (ds.samples[i].success) successes.push_back(i);
        }
        const SplitResult split = split_dataset(ds, successes, config.split);

        const std::string base = stage_dir(config, Stage::split) + "/" + mapping_name(m);
        fs::remove_all(base);
        const nlohmann::json prov = {{"stage", "split"}, {"report", split.report}};
        write_filtered_shard(ds, split.train, base + "/train", prov);
        write_filtered_shard(ds, split.validation, base + "/validation", prov);
        write_filtered_shard(ds, split.test, base + "/test", prov);
        std::ofstream rep(base + "/split_report.json", std::ios::trunc);
        rep << split.report.dump(2) << "\n";

        out[mapping_name(m)] = {{"train", split.train.size()},
                                {"validation", split.validation.size()},
                                {"test", split.test.size()}};
    }
    return out;
}

nlohmann::json run_export(const PipelineConfig& config) {
    // Re-layout of the final shards under the dataset-release names:
    // export/<mapping>/<split>/{images.f32, grasps.f32, object_props/...}.
    nlohmann::json out = nlohmann::json::object();
    for (const CameraMapping m : config.sim.mappings) {
        for (const char* split : {"train", "validation", "test"}) {
            const std::string src =
                stage_dir(config, Stage::split) + "/" + mapping_name(m) + "/" + split;
            const std::string dst =
                stage_dir(config, Stage::export_stage) + "/" + mapping_name(m) + "/" + split;
            fs::remove_all(dst);
            fs::create_directories(dst + "/object_props");
            fs::copy_file(src + "/images.f32", dst + "/images.f32");
            fs::copy_file(src + "/grasps.f32", dst + "/grasps.f32");
            fs::copy_file(src + "/props.f32", dst + "/object_props/props.f32");
            fs::copy_file(src + "/frames.f64", dst + "/object_props/frames.f64");

            std::ifstream mf(src + "/manifest.json");
            nlohmann::json manifest;
            mf >> manifest;
            nlohmann::json names = nlohmann::json::array();
            for (const auto& s : manifest.at("samples")) names.push_back(s.at("object"));
            nlohmann::json meta;
            meta["object_name"] = names;
            meta["frame_names"] = manifest.at("frame_names");
            meta["props_layout"] = manifest.at("props_layout");
            meta["tensors"] = manifest.at("tensors");
            std::ofstream props(dst + "/object_props/meta.json", std::ios::trunc);
            props << meta.dump(2) << "\n";

            out[std::string(mapping_name(m)) + "/" + split] =
                manifest.at("counts").at("samples");
        }
    }
    return out;
}

}  // namespace

RunResult run_pipeline(const PipelineConfig& config, const RunOptions& options) {
    std::vector<Stage> stages = options.stages;
    if (stages.empty()) {
        stages = {Stage::preprocess, Stage::candidates, Stage::simulate,
                  Stage::postprocess, Stage::split, Stage::export_stage};
    }
    const std::string hash = config_identity_hash(config);
    int workers = config.workers;
    if (workers <= 0) workers = int(std::thread::hardware_concurrency());
    if (workers <= 0) workers = 1;

    fs::create_directories(config.out);

    RunResult result;
    for (const Stage stage : stages) {
        try {
            if (stage_complete(config, stage, hash)) {
                result.summary[stage_name(stage)] = {{"skipped", "already complete"}};
                continue;
            }
            // Prerequisites for stages launched individually.
            switch (stage) {
                case Stage::preprocess: break;
                case Stage::candidates: require_stage(config, Stage::preprocess, hash); break;
                case Stage::simulate: require_stage(config, Stage::candidates, hash); break;
                case Stage::postprocess: require_stage(config, Stage::simulate, hash); break;
                case Stage::split: require_stage(config, Stage::postprocess, hash); break;
                case Stage::export_stage: require_stage(config, Stage::split, hash); break;
            }
            fs::create_directories(stage_dir(config, stage));

            nlohmann::json section;
            switch (stage) {
                case Stage::preprocess: section = run_preprocess(config); break;
                case Stage::candidates: section = run_candidates(config); break;
                case Stage::simulate:
                    section = run_simulate(config, options, hash, workers);
                    break;
                case Stage::postprocess: section = run_postprocess(config); break;
                case Stage::split: section = run_split(config); break;
                case Stage::export_stage: section = run_export(config); break;
            }
            mark_stage_complete(config, stage, hash);
            update_summary(config, stage_name(stage), section);
            result.summary[stage_name(stage)] = section;
        } catch (const StageInterrupted&) {
            throw;  // test hook: behave like a crash
        } catch (const std::exception& e) {
            result.exit_code = 1;
            result.summary[stage_name(stage)] = {{"error", e.what()}};
            update_summary(config, stage_name(stage), result.summary[stage_name(stage)]);
            return result;
        }
    }
    return result;
}

}  // namespace graspgen

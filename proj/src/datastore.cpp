#include "graspgen/datastore.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

namespace fs = std::filesystem;

namespace graspgen {

namespace {

// All tensors are little-endian float32 on disk.
void append_f32(std::vector<float>& dst, double v) { dst.push_back(float(v)); }

void write_f32_file(const std::string& path, const std::vector<float>& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("datastore: cannot write " + path);
    if (!data.empty())
        out.write(reinterpret_cast<const char*>(data.data()),
                  std::streamsize(data.size() * sizeof(float)));
    if (!out) throw std::runtime_error("datastore: short write on " + path);
}

void write_f64_file(const std::string& path, const std::vector<double>& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("datastore: cannot write " + path);
    if (!data.empty())
        out.write(reinterpret_cast<const char*>(data.data()),
                  std::streamsize(data.size() * sizeof(double)));
    if (!out) throw std::runtime_error("datastore: short write on " + path);
}

std::vector<double> read_f64_file(const std::string& path, std::uint64_t expected_count) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw std::runtime_error("datastore: cannot open " + path);
    const std::uint64_t bytes = std::uint64_t(in.tellg());
    if (bytes != expected_count * sizeof(double)) {
        throw std::runtime_error("datastore: tensor file " + path + " holds " +
                                 std::to_string(bytes) + " bytes, manifest declares " +
                                 std::to_string(expected_count * sizeof(double)));
    }
    std::vector<double> data(static_cast<size_t>(expected_count), 0.0);
    in.seekg(0);
    if (expected_count)
        in.read(reinterpret_cast<char*>(data.data()), std::streamsize(bytes));
    if (!in) throw std::runtime_error("datastore: short read on " + path);
    return data;
}

std::vector<float> read_f32_file(const std::string& path, std::uint64_t expected_count) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw std::runtime_error("datastore: cannot open " + path);
    const std::uint64_t bytes = std::uint64_t(in.tellg());
    if (bytes != expected_count * sizeof(float)) {
        throw std::runtime_error("datastore: tensor file " + path + " holds " +
                                 std::to_string(bytes) + " bytes, manifest declares " +
                                 std::to_string(expected_count * sizeof(float)));
    }
    std::vector<float> data(static_cast<size_t>(expected_count), 0.0f);
    in.seekg(0);
    if (expected_count)
        in.read(reinterpret_cast<char*>(data.data()), std::streamsize(bytes));
    if (!in) throw std::runtime_error("datastore: short read on " + path);
    return data;
}

std::array<double, 12> frame_row(const Transform& t) {
    const Frame12 f = encode_frame(t);
    std::array<double, 12> out;
    std::copy(f.begin(), f.end(), out.begin());
    return out;
}

const Transform& frame_by_name(const FrameSet& fr, int i) {
    switch (i) {
        case 0: return fr.cam2img_otm;
        case 1: return fr.cam2work_otm;
        case 2: return fr.cam2work_oto;
        case 3: return fr.work2cam_otm;
        case 4: return fr.work2cam_oto;
        case 5: return fr.world2obj;
        default: return fr.world2work;
    }
}

}  // namespace

ShardWriter::ShardWriter(std::string dir, std::string mapping, int image_width,
                         int image_height, nlohmann::json provenance)
    : dir_(std::move(dir)),
      mapping_(std::move(mapping)),
      provenance_(std::move(provenance)),
      image_w_(image_width),
      image_h_(image_height) {
    fs::create_directories(dir_);
    const std::string images_path = dir_ + "/images.f32";
    images_file_ = std::fopen(images_path.c_str(), "wb");
    if (!images_file_) throw std::runtime_error("datastore: cannot open " + images_path);
}

ShardWriter::~ShardWriter() {
    if (!finalized_) abort_cleanup();
}

void ShardWriter::abort_cleanup() {
    if (images_file_) {
        std::fclose(static_cast<std::FILE*>(images_file_));
        images_file_ = nullptr;
    }
    std::error_code ec;
    for (const char* f : {"images.f32", "grasps.f32", "props.f32", "frames.f64",
                          "manifest.json"}) {
        fs::remove(dir_ + "/" + f, ec);
    }
}

void ShardWriter::add(const GraspRecord& rec, const RgbdImage& image) {
    if (finalized_) throw std::runtime_error("datastore: add after finalize");
    if (image.width != image_w_ || image.height != image_h_) {
        throw std::runtime_error("datastore: image dimensions do not match the shard (" +
                                 std::to_string(image.width) + "x" + std::to_string(image.height) +
                                 " vs " + std::to_string(image_w_) + "x" +
                                 std::to_string(image_h_) + ")");
    }
    if (mapping_name(rec.mapping) != mapping_)
        throw std::runtime_error("datastore: record mapping does not match shard mapping");

    const size_t px = image.pixel_count();
    if (image.rgb.size() != 3 * px || image.depth.size() != px)
        throw std::runtime_error("datastore: malformed image buffers");

    // Channel-planar RGBD row: R, G, B, then encoded depth.
    std::vector<float> row;
    row.reserve(4 * px);
    row.insert(row.end(), image.rgb.begin(), image.rgb.end());
    row.insert(row.end(), image.depth.begin(), image.depth.end());
    auto* f = static_cast<std::FILE*>(images_file_);
    if (std::fwrite(row.data(), sizeof(float), row.size(), f) != row.size()) {
        abort_cleanup();
        throw std::runtime_error("datastore: image write failed in " + dir_);
    }

    for (const double g : rec.grasp) append_f32(grasps_, g);
    for (int d = 0; d < 3; ++d) append_f32(props_, rec.props.work2com[d]);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) append_f32(props_, rec.props.work2inertia(i, j));
    append_f32(props_, rec.props.work2mass);
    for (int i = 0; i < 7; ++i) {
        for (const double v : frame_row(frame_by_name(rec.frames, i))) frames_.push_back(v);
    }

    nlohmann::json s;
    s["object"] = rec.object_name;
    s["candidate"] = rec.candidate_id;
    s["attempt"] = rec.attempt_index;
    s["success"] = rec.success;
    s["gripper_pose"] = encode_frame(rec.gripper_in_world);
    samples_.push_back(std::move(s));
    ++count_;
}

nlohmann::json ShardWriter::finalize() {
    if (finalized_) throw std::runtime_error("datastore: double finalize");
    auto* f = static_cast<std::FILE*>(images_file_);
    if (std::fclose(f) != 0) {
        images_file_ = nullptr;
        abort_cleanup();
        throw std::runtime_error("datastore: closing images.f32 failed in " + dir_);
    }
    images_file_ = nullptr;

    try {
        write_f32_file(dir_ + "/grasps.f32", grasps_);
        write_f32_file(dir_ + "/props.f32", props_);
        write_f64_file(dir_ + "/frames.f64", frames_);

        nlohmann::json manifest;
        manifest["schema_version"] = kSchemaVersion;
        manifest["kind"] = "grasp_dataset_shard";
        manifest["mapping"] = mapping_;
        manifest["counts"] = {{"samples", count_}};
        manifest["image_width"] = image_w_;
        manifest["image_height"] = image_h_;
        manifest["tensors"] = {
            {"images",
             {{"file", "images.f32"},
              {"dtype", "float32le"},
              {"shape", {count_, 4, image_h_, image_w_}}}},
            {"grasps",
             {{"file", "grasps.f32"}, {"dtype", "float32le"}, {"shape", {count_, 18}}}},
            {"props", {{"file", "props.f32"}, {"dtype", "float32le"}, {"shape", {count_, 13}}}},
            {"frames",
             {{"file", "frames.f64"}, {"dtype", "float64le"}, {"shape", {count_, 7, 12}}}}};
        manifest["frame_names"] = kFrameNames;
        manifest["props_layout"] = {"work2com:3", "work2inertia:9", "work2mass:1"};
        manifest["frame_encoding"] =
            "row-major 3x4 [R|t]; append [0,0,0,1] to recover the homogeneous matrix";
        manifest["samples"] = samples_;
        manifest["provenance"] = provenance_;

        std::ofstream out(dir_ + "/manifest.json", std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("datastore: cannot write manifest in " + dir_);
        out << manifest.dump(2) << "\n";
        if (!out) throw std::runtime_error("datastore: short manifest write in " + dir_);
        finalized_ = true;
        return manifest;
    } catch (...) {
        abort_cleanup();
        throw;
    }
}

nlohmann::json write_shard(const std::string& dir, const std::string& mapping,
                           const std::vector<GraspRecord>& records,
                           const std::vector<RgbdImage>& images, const nlohmann::json& provenance) {
    if (records.size() != images.size())
        throw std::runtime_error("datastore: record/image count mismatch (" +
                                 std::to_string(records.size()) + " vs " +
                                 std::to_string(images.size()) + ")");
    const int w = images.empty() ? 0 : images.front().width;
    const int h = images.empty() ? 0 : images.front().height;
    ShardWriter writer(dir, mapping, w, h, provenance);
    for (size_t i = 0; i < records.size(); ++i) writer.add(records[i], images[i]);
    return writer.finalize();
}

std::vector<float> Dataset::load_image(size_t i) const {
    const DatasetSample& s = samples.at(i);
    const std::string path = shard_dirs.at(size_t(s.shard_index)) + "/images.f32";
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("datastore: cannot open " + path);
    const size_t row_floats = size_t(4) * size_t(image_height) * size_t(image_width);
    std::vector<float> img(row_floats);
    in.seekg(std::streamoff(s.row_in_shard * row_floats * sizeof(float)));
    in.read(reinterpret_cast<char*>(img.data()), std::streamsize(row_floats * sizeof(float)));
    if (!in) throw std::runtime_error("datastore: image row read failed in " + path);
    return img;
}

Transform Dataset::frame(size_t sample, const std::string& frame_name) const {
    for (size_t i = 0; i < kFrameNames.size(); ++i) {
        if (frame_name == kFrameNames[i]) {
            Frame12 f{};
            std::copy(samples.at(sample).frames[i].begin(), samples.at(sample).frames[i].end(),
                      f.begin());
            return decode_frame(f);
        }
    }
    throw std::runtime_error("datastore: unknown frame name " + frame_name);
}

Dataset read_merge(const std::vector<std::string>& shard_dirs) {
    Dataset ds;
    std::map<SampleKey, int> seen;

    for (size_t sh = 0; sh < shard_dirs.size(); ++sh) {
        const std::string& dir = shard_dirs[sh];
        std::ifstream mf(dir + "/manifest.json");
        if (!mf) throw std::runtime_error("datastore: missing manifest in " + dir);
        nlohmann::json manifest;
        mf >> manifest;

        if (manifest.at("schema_version").get<int>() != kSchemaVersion)
            throw std::runtime_error("datastore: schema version mismatch in " + dir);
        const std::string mapping = manifest.at("mapping").get<std::string>();
        if (sh == 0) {
            ds.mapping = mapping;
        } else if (mapping != ds.mapping) {
            throw std::runtime_error("datastore: mapping mismatch: shard " + dir + " holds '" +
                                     mapping + "', expected '" + ds.mapping + "'");
        }

        const std::uint64_t n = manifest.at("counts").at("samples").get<std::uint64_t>();
        if (n > 0) {
            const int w = manifest.at("image_width").get<int>();
            const int h = manifest.at("image_height").get<int>();
            if (ds.image_width == 0 && ds.image_height == 0) {
                ds.image_width = w;
                ds.image_height = h;
            } else if (w != ds.image_width || h != ds.image_height) {
                throw std::runtime_error("datastore: image shape mismatch in " + dir);
            }
        }
        const std::uint64_t px = std::uint64_t(ds.image_width) * std::uint64_t(ds.image_height);

        // Validate the big tensor by size only; rows are loaded lazily.
        {
            std::ifstream img(dir + "/images.f32", std::ios::binary | std::ios::ate);
            if (!img) throw std::runtime_error("datastore: missing images.f32 in " + dir);
            const std::uint64_t bytes = std::uint64_t(img.tellg());
            if (bytes != n * 4 * px * sizeof(float))
                throw std::runtime_error("datastore: images.f32 truncated in " + dir + " (" +
                                         std::to_string(bytes) + " bytes for " +
                                         std::to_string(n) + " samples)");
        }
        const auto grasps = read_f32_file(dir + "/grasps.f32", n * 18);
        const auto props = read_f32_file(dir + "/props.f32", n * 13);
        const auto frames = read_f64_file(dir + "/frames.f64", n * 7 * 12);

        const auto& sample_meta = manifest.at("samples");
        if (sample_meta.size() != n)
            throw std::runtime_error("datastore: manifest sample list mismatch in " + dir);

        for (std::uint64_t i = 0; i < n; ++i) {
            DatasetSample s;
            const auto& meta = sample_meta.at(size_t(i));
            s.key.object = meta.at("object").get<std::string>();
            s.key.candidate_id = meta.at("candidate").get<std::uint64_t>();
            s.key.attempt_index = meta.at("attempt").get<int>();
            s.success = meta.at("success").get<bool>();
            for (int k = 0; k < 12; ++k)
                s.gripper_pose[size_t(k)] = meta.at("gripper_pose").at(size_t(k)).get<double>();
            std::copy_n(grasps.begin() + std::ptrdiff_t(i * 18), 18, s.grasp.begin());
            std::copy_n(props.begin() + std::ptrdiff_t(i * 13), 13, s.props.begin());
            for (int fr = 0; fr < 7; ++fr) {
                for (int k = 0; k < 12; ++k)
                    s.frames[size_t(fr)][size_t(k)] =
                        frames[size_t(i * 84 + std::uint64_t(fr) * 12 + std::uint64_t(k))];
                // Orthonormality check on every stored frame.
                Frame12 f{};
                std::copy(s.frames[size_t(fr)].begin(), s.frames[size_t(fr)].end(), f.begin());
                (void)decode_frame(f);
            }
            s.shard_index = int(sh);
            s.row_in_shard = i;
            if (!seen.emplace(s.key, 1).second) {
                throw std::runtime_error("datastore: duplicate sample key (" + s.key.object +
                                         ", " + std::to_string(s.key.candidate_id) + ", " +
                                         std::to_string(s.key.attempt_index) + ")");
            }
            ds.samples.push_back(std::move(s));
        }
        ds.shard_dirs.push_back(dir);
    }

    std::sort(ds.samples.begin(), ds.samples.end(),
              [](const DatasetSample& a, const DatasetSample& b) { return a.key < b.key; });
    return ds;
}

void write_filtered_shard(const Dataset& src, const std::vector<size_t>& keep,
                          const std::string& dir, const nlohmann::json& provenance) {
    fs::create_directories(dir);
    const size_t row_floats = size_t(4) * size_t(src.image_height) * size_t(src.image_width);

    std::vector<float> grasps, props;
    std::vector<double> frames;
    std::vector<nlohmann::json> samples;
    {
        std::ofstream images(dir + "/images.f32", std::ios::binary | std::ios::trunc);
        if (!images) throw std::runtime_error("datastore: cannot write images in " + dir);
        for (const size_t idx : keep) {
            const DatasetSample& s = src.samples.at(idx);
            const auto img = src.load_image(idx);
            images.write(reinterpret_cast<const char*>(img.data()),
                         std::streamsize(row_floats * sizeof(float)));
            for (const float g : s.grasp) grasps.push_back(g);
            for (const float p : s.props) props.push_back(p);
            for (const auto& fr : s.frames)
                for (const double v : fr) frames.push_back(v);
            nlohmann::json meta;
            meta["object"] = s.key.object;
            meta["candidate"] = s.key.candidate_id;
            meta["attempt"] = s.key.attempt_index;
            meta["success"] = s.success;
            meta["gripper_pose"] = s.gripper_pose;
            samples.push_back(std::move(meta));
        }
        if (!images) throw std::runtime_error("datastore: image copy failed in " + dir);
    }

    write_f32_file(dir + "/grasps.f32", grasps);
    write_f32_file(dir + "/props.f32", props);
    write_f64_file(dir + "/frames.f64", frames);

    nlohmann::json manifest;
    manifest["schema_version"] = kSchemaVersion;
    manifest["kind"] = "grasp_dataset_shard";
    manifest["mapping"] = src.mapping;
    manifest["counts"] = {{"samples", keep.size()}};
    manifest["image_width"] = src.image_width;
    manifest["image_height"] = src.image_height;
    manifest["tensors"] = {
        {"images",
         {{"file", "images.f32"},
          {"dtype", "float32le"},
          {"shape", {keep.size(), 4, src.image_height, src.image_width}}}},
        {"grasps", {{"file", "grasps.f32"}, {"dtype", "float32le"}, {"shape", {keep.size(), 18}}}},
        {"props", {{"file", "props.f32"}, {"dtype", "float32le"}, {"shape", {keep.size(), 13}}}},
        {"frames",
         {{"file", "frames.f64"}, {"dtype", "float64le"}, {"shape", {keep.size(), 7, 12}}}}};
    manifest["frame_names"] = kFrameNames;
    manifest["props_layout"] = {"work2com:3", "work2inertia:9", "work2mass:1"};
    manifest["frame_encoding"] =
        "row-major 3x4 [R|t]; append [0,0,0,1] to recover the homogeneous matrix";
    manifest["samples"] = samples;
    manifest["provenance"] = provenance;

    std::ofstream out(dir + "/manifest.json", std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("datastore: cannot write manifest in " + dir);
    out << manifest.dump(2) << "\n";
    if (!out) throw std::runtime_error("datastore: short manifest write in " + dir);
}

}  // namespace graspgen

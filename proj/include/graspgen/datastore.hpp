// Dataset shard container: raw little-endian tensors plus a JSON manifest.
// One shard = one directory {manifest.json, images.f32, grasps.f32, props.f32,
// frames.f64}. Byte output is a pure function of the content.
//
// Tensor layouts (N = sample count):
//   images: (N, 4, H, W)  float32, channels R, G, B, encoded depth
//   grasps: (N, 18)       float32, [p1 p2 p3 n1 n2 n3] in the camera frame
//   props:  (N, 13)       float32, work2com (3) + inertia row-major (9) + mass
//   frames: (N, 7, 12)    float64, row-major [R | t]; frames stay at full
//                         precision so inverse-pair frames compose to the
//                         identity at the 1e-9 contract
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "graspgen/graspsim.hpp"
#include "graspgen/render.hpp"

namespace graspgen {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::array<const char*, 7> kFrameNames = {
    "frame_cam2img_otm", "frame_cam2work_otm", "frame_cam2work_oto", "frame_work2cam_otm",
    "frame_work2cam_oto", "frame_world2obj",   "frame_world2work"};

struct SampleKey {
    std::string object;
    std::uint64_t candidate_id = 0;
    int attempt_index = 0;

    friend auto operator<=>(const SampleKey&, const SampleKey&) = default;
};

// Streams one shard to disk; images are written incrementally so a worker
// never holds its whole output in memory. On failure every partial file is
// removed.
class ShardWriter {
public:
    // `provenance` is echoed into the manifest (config decisions, seeds).
    // Image dimensions are fixed up front so empty shards stay mergeable.
    ShardWriter(std::string dir, std::string mapping, int image_width, int image_height,
                nlohmann::json provenance);
    ~ShardWriter();

    ShardWriter(const ShardWriter&) = delete;
    ShardWriter& operator=(const ShardWriter&) = delete;

    void add(const GraspRecord& record, const RgbdImage& image);
    // Writes manifest + small tensors; returns the manifest.
    nlohmann::json finalize();

private:
    void abort_cleanup();

    std::string dir_;
    std::string mapping_;
    nlohmann::json provenance_;
    std::vector<nlohmann::json> samples_;
    std::vector<float> grasps_;
    std::vector<float> props_;
    std::vector<double> frames_;
    int image_w_ = 0, image_h_ = 0;
    std::uint64_t count_ = 0;
    bool finalized_ = false;
    void* images_file_ = nullptr;  // FILE*
};

// Convenience for tests: whole shard in one call.
nlohmann::json write_shard(const std::string& dir, const std::string& mapping,
                           const std::vector<GraspRecord>& records,
                           const std::vector<RgbdImage>& images,
                           const nlohmann::json& provenance = nlohmann::json::object());

struct DatasetSample {
    SampleKey key;
    bool success = true;
    std::array<float, 18> grasp{};
    std::array<float, 13> props{};
    std::array<std::array<double, 12>, 7> frames{};  // decoded-ready 1x12 rows
    Frame12 gripper_pose{};                          // metadata, full precision
    // Source location for lazy image loading.
    int shard_index = 0;
    std::uint64_t row_in_shard = 0;
};

// Merged view over one or more shards. Sample metadata lives in memory;
// images are fetched on demand.
class Dataset {
public:
    std::string mapping;
    int image_width = 0;
    int image_height = 0;
    std::vector<DatasetSample> samples;
    std::vector<std::string> shard_dirs;

    // (4, H, W) float pixels for sample i.
    std::vector<float> load_image(size_t i) const;

    Transform frame(size_t sample, const std::string& frame_name) const;
};

// Reads and concatenates shards in (object, candidate, attempt) key order.
// Throws on schema/mapping mismatch, duplicate keys, or tensor files whose
// size disagrees with the manifest.
Dataset read_merge(const std::vector<std::string>& shard_dirs);

// Copies selected samples (by index, in the given order) into a new shard.
void write_filtered_shard(const Dataset& src, const std::vector<size_t>& keep,
                          const std::string& dir, const nlohmann::json& provenance);

}  // namespace graspgen

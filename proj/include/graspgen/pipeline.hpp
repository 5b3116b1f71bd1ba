// Pipeline driver: configuration, deterministic job partitioning, staged
// execution (preprocess -> candidates -> simulate -> postprocess -> split ->
// export) with file-level resume, and the summary report.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "graspgen/candidates.hpp"
#include "graspgen/graspsim.hpp"
#include "graspgen/hand.hpp"
#include "graspgen/postprocess.hpp"
#include "graspgen/render.hpp"
#include "graspgen/scene.hpp"

namespace graspgen {

struct PipelineConfig {
    std::string corpus;  // directory of .obj files
    std::string out = "out";
    std::uint64_t seed = 0;
    int workers = 0;  // 0 = hardware concurrency

    SceneConfig scene;
    HandModel hand;
    RotationGrid grid = RotationGrid::defaults();
    std::uint64_t candidate_cap = 10000;
    std::uint64_t batch_size = 1500;  // candidates simulated per object per run
    CameraIntrinsics camera;
    SimParams sim;

    double variance_threshold = 1e-3;
    double bisect_epsilon = 0.01;
    double sigma_k = 4.0;
    SplitSpec split;

    nlohmann::json to_json() const;  // full echo, used for provenance + hashing
};

// Strict parse: any unknown field anywhere in the document is an error that
// names the offending path. Values outside documented ranges throw.
PipelineConfig config_from_json(const nlohmann::json& j);
PipelineConfig load_config_file(const std::string& path);

struct JobShard {
    std::string object;
    std::uint64_t begin = 0;  // candidate range within the object's batch
    std::uint64_t end = 0;
    int index = 0;   // dense job id (output file naming / resume granularity)
    int worker = 0;  // quota this piece belongs to

    std::uint64_t size() const { return end - begin; }
};

// Partitions per-object candidate counts into `workers` quotas balanced
// within +-1 candidate; a quota that crosses an object boundary is emitted as
// multiple single-object JobShard pieces sharing the same `worker`.
std::vector<JobShard> plan_jobs(const std::vector<std::pair<std::string, std::uint64_t>>& counts,
                                int workers);

enum class Stage { preprocess, candidates, simulate, postprocess, split, export_stage };

const char* stage_name(Stage s);

// Thrown by the simulate stage when the interrupt test hook fires; stands in
// for a mid-stage crash in resume tests.
struct StageInterrupted : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunOptions {
    std::vector<Stage> stages;  // empty = all, in order
    // Test hook: throw after this many simulate jobs complete (simulates a
    // crash; a rerun must resume cleanly). -1 disables.
    int interrupt_after_jobs = -1;
    // Test hook: observes every in-memory grasp record before serialization.
    std::function<void(const GraspRecord&)> record_observer;
};

struct RunResult {
    int exit_code = 0;
    nlohmann::json summary;
};

// Executes the requested stages. Completed stages are detected via config
// hashes and skipped; per-object failures are quarantined and reported.
// Output bytes depend only on (corpus, config, seed), never on worker count.
RunResult run_pipeline(const PipelineConfig& config, const RunOptions& options = {});

}  // namespace graspgen

// graspgen command-line driver: stage execution, dataset preview, grasp
// verification via wrist IK, and run reporting.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "graspgen/datastore.hpp"
#include "graspgen/pipeline.hpp"
#include "graspgen/png.hpp"

namespace gg = graspgen;

namespace {

struct CommonOpts {
    std::string config_path;
    std::int64_t seed = -1;
    int workers = 0;
    std::string out;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("-c,--config", opts.config_path, "pipeline config JSON")->required();
    cmd->add_option("--seed", opts.seed, "override the config seed");
    cmd->add_option("--workers", opts.workers,
                    "worker count (overrides GRASPGEN_WORKERS and the config)");
    cmd->add_option("--out", opts.out, "override the output directory");
}

gg::PipelineConfig resolve_config(const CommonOpts& opts) {
    gg::PipelineConfig config = gg::load_config_file(opts.config_path);
    if (opts.seed >= 0) {
        config.seed = std::uint64_t(opts.seed);
        config.split.seed = config.seed;
    }
    if (!opts.out.empty()) config.out = opts.out;
    // Precedence: flag > environment > config.
    if (opts.workers > 0) {
        config.workers = opts.workers;
    } else if (const char* env = std::getenv("GRASPGEN_WORKERS"); env && *env) {
        const int n = std::atoi(env);
        if (n > 0) config.workers = n;
    }
    return config;
}

int run_stages(const CommonOpts& opts, const std::vector<gg::Stage>& stages) {
    const gg::PipelineConfig config = resolve_config(opts);
    gg::RunOptions run_opts;
    run_opts.stages = stages;
    const gg::RunResult result = gg::run_pipeline(config, run_opts);
    std::cout << result.summary.dump(2) << "\n";
    return result.exit_code;
}

std::vector<std::uint8_t> to_gray8(const std::vector<float>& plane) {
    std::vector<std::uint8_t> out(plane.size());
    for (size_t i = 0; i < plane.size(); ++i) {
        const float v = std::min(1.0f, std::max(0.0f, plane[i]));
        out[i] = std::uint8_t(v * 255.0f + 0.5f);
    }
    return out;
}

// PNG panels (RGB / depth / re-rendered mask) for the first samples of a
// dataset directory, mirroring the usual qualitative figures.
int cmd_preview(const CommonOpts& opts, const std::string& data_dir, const std::string& out_dir,
                int count) {
    const gg::PipelineConfig config = resolve_config(opts);
    const gg::Dataset ds = gg::read_merge({data_dir});
    std::filesystem::create_directories(out_dir);

    // Meshes for the mask re-render.
    std::map<std::string, gg::TriMesh> meshes;
    const int n = std::min<int>(count, int(ds.samples.size()));
    for (int i = 0; i < n; ++i) {
        const auto& s = ds.samples[size_t(i)];
        const auto img = ds.load_image(size_t(i));
        const size_t px = size_t(ds.image_width) * size_t(ds.image_height);

        std::vector<std::uint8_t> rgb(3 * px);
        for (size_t p = 0; p < px; ++p) {
            for (int ch = 0; ch < 3; ++ch) {
                const float v =
                    std::min(1.0f, std::max(0.0f, img[size_t(ch) * px + p]));
                rgb[3 * p + size_t(ch)] = std::uint8_t(v * 255.0f + 0.5f);
            }
        }
        const std::string tag = out_dir + "/sample_" + std::to_string(i);
        gg::write_png_rgb(tag + "_rgb.png", rgb, ds.image_width, ds.image_height);
        gg::write_png_gray(tag + "_depth.png",
                           to_gray8({img.begin() + std::ptrdiff_t(3 * px), img.end()}),
                           ds.image_width, ds.image_height);

        // Mask is derived, not stored: re-render the scene from the frames.
        if (!meshes.count(s.key.object)) {
            gg::TriMesh mesh = gg::load_obj_file(config.corpus + "/" + s.key.object + ".obj");
            if (config.scene.uniform_scale != 1.0)
                mesh = gg::scaled(mesh, config.scene.uniform_scale);
            meshes[s.key.object] = gg::mesh_in_object_frame(mesh);
        }
        const gg::Transform world2work = ds.frame(size_t(i), "frame_world2work");
        const gg::Transform work2cam =
            ds.frame(size_t(i), ds.mapping == "oto" ? "frame_work2cam_oto" : "frame_work2cam_otm");
        const gg::Transform world2obj = ds.frame(size_t(i), "frame_world2obj");
        const gg::Camera camera{gg::compose(world2work, work2cam), config.camera};
        const gg::TablePlane table{config.scene.table_z(), config.scene.table_extent_x,
                                   config.scene.table_extent_y};
        const gg::RgbdImage re = gg::render(&meshes[s.key.object], world2obj, &table, camera);
        std::vector<std::uint8_t> mask(px);
        for (size_t p = 0; p < px; ++p) mask[p] = re.mask[p] ? 255 : 0;
        gg::write_png_gray(tag + "_mask.png", mask, ds.image_width, ds.image_height);
    }
    std::cout << "wrote " << n << " sample panels to " << out_dir << "\n";
    return 0;
}

// Appendix-style check: recover a wrist pose for stored grasps by IK on the
// three fingertip targets and report the residuals.
int cmd_verify(const CommonOpts& opts, const std::string& data_dir, int count) {
    const gg::PipelineConfig config = resolve_config(opts);
    const gg::Dataset ds = gg::read_merge({data_dir});
    const int n = count > 0 ? std::min<int>(count, int(ds.samples.size()))
                            : int(ds.samples.size());

    // Mid-closure finger state: fingertip targets come from wrapped grasps,
    // so a half-curled guess sits much nearer than the open hand.
    gg::FingerState finger_guess = gg::FingerState::open_state(config.hand);
    for (double& q : finger_guess.proximal) q = gg::deg_to_rad(50.0);
    nlohmann::json rows = nlohmann::json::array();
    double worst = 0.0, total = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto& s = ds.samples[size_t(i)];
        const gg::Transform work2cam =
            ds.frame(size_t(i), ds.mapping == "oto" ? "frame_work2cam_oto" : "frame_work2cam_otm");
        const gg::Transform world2work = ds.frame(size_t(i), "frame_world2work");
        const gg::Transform world2obj = ds.frame(size_t(i), "frame_world2obj");
        const gg::Transform cam_to_obj =
            gg::compose(gg::invert(world2obj), gg::compose(world2work, work2cam));

        std::array<gg::Vec3, 3> targets;
        for (int f = 0; f < 3; ++f) {
            const gg::Vec3 p_cam{double(s.grasp[size_t(3 * f)]),
                                 double(s.grasp[size_t(3 * f + 1)]),
                                 double(s.grasp[size_t(3 * f + 2)])};
            targets[size_t(f)] = cam_to_obj.apply(p_cam);
        }

        // Init: the camera pose pushed forward to the palm along the optical
        // axis (exact wrist orientation under the one-to-one mapping).
        const gg::Transform cam_o = cam_to_obj;
        gg::Transform init_pose = cam_o;
        init_pose.translation =
            cam_o.translation + cam_o.apply_dir(gg::Vec3{0, 0, config.sim.camera_offset});
        const auto angles = gg::euler_xyz_angles(init_pose.rotation);
        const gg::PoseParams init = {angles[0],
                                     angles[1],
                                     angles[2],
                                     init_pose.translation.x,
                                     init_pose.translation.y,
                                     init_pose.translation.z};

        const gg::IkResult ik = gg::solve_wrist_ik(targets, config.hand, finger_guess, init);
        rows.push_back({{"object", s.key.object},
                        {"candidate", s.key.candidate_id},
                        {"attempt", s.key.attempt_index},
                        {"residual_m2", ik.residual},
                        {"converged", ik.converged}});
        worst = std::max(worst, ik.residual);
        total += ik.residual;
    }

    nlohmann::json doc;
    doc["samples"] = n;
    doc["mean_residual_m2"] = n ? total / n : 0.0;
    doc["worst_residual_m2"] = worst;
    doc["rows"] = rows;
    std::cout << doc.dump(2) << "\n";
    return 0;
}

int cmd_report(const CommonOpts& opts) {
    const gg::PipelineConfig config = resolve_config(opts);
    std::ifstream in(config.out + "/summary.json");
    if (!in) {
        std::cerr << "no summary at " << config.out << "/summary.json (run the pipeline first)\n";
        return 1;
    }
    nlohmann::json summary;
    in >> summary;
    std::cout << summary.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"graspgen: multi-fingered precision-grasp dataset synthesis"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string data_dir, preview_out = "preview";
    int sample_count = 8;

    auto* run = app.add_subcommand("run", "run every stage in order");
    add_common(run, opts);
    auto* preprocess = app.add_subcommand("preprocess", "validate and measure corpus meshes");
    add_common(preprocess, opts);
    auto* candidates = app.add_subcommand("candidates", "build grasp-candidate databases");
    add_common(candidates, opts);
    auto* simulate = app.add_subcommand("simulate", "evaluate candidates and render images");
    add_common(simulate, opts);
    auto* postprocess = app.add_subcommand("postprocess", "apply the cleaning filters");
    add_common(postprocess, opts);
    auto* split = app.add_subcommand("split", "build train/validation/test shards");
    add_common(split, opts);
    auto* export_cmd = app.add_subcommand("export", "re-layout final shards for release");
    add_common(export_cmd, opts);

    auto* preview = app.add_subcommand("preview", "dump PNG panels from a dataset directory");
    add_common(preview, opts);
    preview->add_option("--data", data_dir, "shard directory (e.g. out/final/otm/train)")
        ->required();
    preview->add_option("--png-out", preview_out, "output directory for PNGs");
    preview->add_option("--count", sample_count, "number of samples to dump");

    auto* verify = app.add_subcommand("verify", "IK-check stored grasps against the hand model");
    add_common(verify, opts);
    verify->add_option("--data", data_dir, "shard directory")->required();
    verify->add_option("--count", sample_count, "samples to verify (0 = all)");

    auto* report = app.add_subcommand("report", "print the pipeline summary");
    add_common(report, opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return run_stages(opts, {});
        if (preprocess->parsed()) return run_stages(opts, {gg::Stage::preprocess});
        if (candidates->parsed()) return run_stages(opts, {gg::Stage::candidates});
        if (simulate->parsed()) return run_stages(opts, {gg::Stage::simulate});
        if (postprocess->parsed()) return run_stages(opts, {gg::Stage::postprocess});
        if (split->parsed()) return run_stages(opts, {gg::Stage::split});
        if (export_cmd->parsed()) return run_stages(opts, {gg::Stage::export_stage});
        if (preview->parsed()) return cmd_preview(opts, data_dir, preview_out, sample_count);
        if (verify->parsed()) return cmd_verify(opts, data_dir, sample_count);
        if (report->parsed()) return cmd_report(opts);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

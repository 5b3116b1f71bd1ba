#include "graspgen/postprocess.hpp"

#include <algorithm>
#include <cmath>

#include "graspgen/rng.hpp"

namespace graspgen {

nlohmann::json FilterReport::to_json() const {
    nlohmann::json j;
    j["stages"] = nlohmann::json::array();
    for (const FilterStage& s : stages) {
        j["stages"].push_back({{"name", s.name},
                               {"input", s.input},
                               {"removed", s.removed},
                               {"retained", s.retained}});
    }
    j["removed_per_object"] = removed_per_object;
    j["review_list"] = nlohmann::json::array();
    for (const SampleKey& k : review_list) {
        j["review_list"].push_back(
            {{"object", k.object}, {"candidate", k.candidate_id}, {"attempt", k.attempt_index}});
    }
    // The sigma filter treats each of the 18 scalar entries as one variable.
    j["sigma_variable_granularity"] = "per-scalar-dimension";
    return j;
}

namespace {

FilterStage& begin_stage(FilterReport& report, const std::string& name, std::uint64_t input) {
    report.stages.push_back(FilterStage{name, input, 0, 0});
    return report.stages.back();
}

}  // namespace

std::vector<size_t> variance_filter(const Dataset& ds, const std::vector<size_t>& input,
                                    double threshold, FilterReport& report, double near,
                                    double far) {
    FilterStage& stage = begin_stage(report, "variance", input.size());
    std::vector<size_t> kept;
    kept.reserve(input.size());

    const size_t px = size_t(ds.image_width) * size_t(ds.image_height);
    for (const size_t idx : input) {
        const auto img = ds.load_image(idx);
        // Depth is the 4th channel plane; decode before measuring.
        double mean = 0.0;
        for (size_t p = 0; p < px; ++p)
            mean += decode_depth_value(double(img[3 * px + p]), near, far);
        mean /= double(px);
        double var = 0.0;
        for (size_t p = 0; p < px; ++p) {
            const double d = decode_depth_value(double(img[3 * px + p]), near, far) - mean;
            var += d * d;
        }
        var /= double(px);

        if (var < threshold) {
            ++stage.removed;
            ++report.removed_per_object[ds.samples[idx].key.object];
        } else {
            kept.push_back(idx);
        }
    }
    stage.retained = kept.size();
    return kept;
}

std::vector<size_t> table_bisect_filter(const Dataset& ds, const std::vector<size_t>& input,
                                        double epsilon, FilterReport& report) {
    FilterStage& stage = begin_stage(report, "table_bisect", input.size());
    std::vector<size_t> kept;
    kept.reserve(input.size());

    const std::string cam_frame =
        ds.mapping == "oto" ? "frame_work2cam_oto" : "frame_work2cam_otm";
    for (const size_t idx : input) {
        const Transform work2cam = ds.frame(idx, cam_frame);
        const Transform world2work = ds.frame(idx, "frame_world2work");
        const double camera_z_world = compose(world2work, work2cam).translation.z;
        const double table_z_world = world2work.translation.z;
        if (std::fabs(camera_z_world - table_z_world) < epsilon) {
            ++stage.removed;
            ++report.removed_per_object[ds.samples[idx].key.object];
        } else {
            kept.push_back(idx);
        }
    }
    stage.retained = kept.size();
    return kept;
}

std::vector<size_t> sigma_filter(const Dataset& ds, const std::vector<size_t>& input, double k,
                                 FilterReport& report) {
    FilterStage& stage = begin_stage(report, "sigma", input.size());

    std::map<std::string, std::vector<size_t>> groups;
    for (const size_t idx : input) groups[ds.samples[idx].key.object].push_back(idx);

    std::vector<size_t> kept;
    kept.reserve(input.size());
    for (const auto& [object, members] : groups) {
        if (members.size() < 2) {
            kept.insert(kept.end(), members.begin(), members.end());
            continue;
        }
        std::array<double, 18> mean{}, var{};
        for (const size_t idx : members)
            for (int d = 0; d < 18; ++d) mean[size_t(d)] += double(ds.samples[idx].grasp[size_t(d)]);
        for (double& m : mean) m /= double(members.size());
        for (const size_t idx : members) {
            for (int d = 0; d < 18; ++d) {
                const double dv = double(ds.samples[idx].grasp[size_t(d)]) - mean[size_t(d)];
                var[size_t(d)] += dv * dv;
            }
        }
        for (double& v : var) v /= double(members.size());  // population sigma

        for (const size_t idx : members) {
            bool outlier = false;
            double worst_score = 0.0;
            for (int d = 0; d < 18; ++d) {
                const double sigma = std::sqrt(var[size_t(d)]);
                if (sigma == 0.0) continue;
                const double score =
                    std::fabs(double(ds.samples[idx].grasp[size_t(d)]) - mean[size_t(d)]) / sigma;
                worst_score = std::fmax(worst_score, score);
                if (score > k) outlier = true;
            }
            if (outlier) {
                ++stage.removed;
                ++report.removed_per_object[object];
            } else {
                kept.push_back(idx);
                // Near-threshold survivors go to the manual review export.
                if (worst_score > 0.8 * k) report.review_list.push_back(ds.samples[idx].key);
            }
        }
    }
    std::sort(kept.begin(), kept.end());
    stage.retained = kept.size();
    return kept;
}

std::vector<size_t> run_filters(const Dataset& ds, double variance_threshold,
                                double bisect_epsilon, double sigma_k, FilterReport& report,
                                double near, double far) {
    std::vector<size_t> idx(ds.samples.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    idx = variance_filter(ds, idx, variance_threshold, report, near, far);
    idx = table_bisect_filter(ds, idx, bisect_epsilon, report);
    idx = sigma_filter(ds, idx, sigma_k, report);
    return idx;
}

std::string object_class(const std::string& object_name) {
    const size_t dash = object_name.find('-');
    return dash == std::string::npos ? object_name : object_name.substr(0, dash);
}

SplitResult split_dataset(const Dataset& ds, const std::vector<size_t>& input,
                          const SplitSpec& spec) {
    if (!(spec.validation_fraction > 0.0 && spec.validation_fraction < 1.0))
        throw std::runtime_error("split: validation fraction must lie in (0, 1)");

    // class -> object -> sample indices, all ordered for determinism.
    std::map<std::string, std::map<std::string, std::vector<size_t>>> classes;
    for (const size_t idx : input) {
        const std::string& obj = ds.samples[idx].key.object;
        classes[object_class(obj)][obj].push_back(idx);
    }

    SplitResult out;
    out.report["classes"] = nlohmann::json::object();

    for (const auto& [cls, objects] : classes) {
        nlohmann::json cls_report;
        if (objects.empty()) continue;

        if (objects.size() == 1) {
            // A held-out object is all the class has: it becomes test data.
            const auto& [obj, members] = *objects.begin();
            out.test.insert(out.test.end(), members.begin(), members.end());
            cls_report["test_object"] = obj;
            cls_report["test"] = members.size();
            cls_report["train"] = 0;
            cls_report["validation"] = 0;
            out.report["classes"][cls] = cls_report;
            continue;
        }

        std::vector<std::string> names;
        for (const auto& [obj, members] : objects) names.push_back(obj);
        Rng pick_rng(derive_seed(spec.seed, "split-test-object-" + cls));
        const std::string test_object = names[size_t(pick_rng.next_below(names.size()))];

        std::vector<size_t> rest;
        for (const auto& [obj, members] : objects) {
            if (obj == test_object)
                out.test.insert(out.test.end(), members.begin(), members.end());
            else
                rest.insert(rest.end(), members.begin(), members.end());
        }
        std::sort(rest.begin(), rest.end());

        // Round-half-up share of the remaining grasps.
        const std::uint64_t val_count =
            std::uint64_t(std::floor(spec.validation_fraction * double(rest.size()) + 0.5));
        Rng val_rng(derive_seed(spec.seed, "split-validation-" + cls));
        const auto val_picks = sample_without_replacement(rest.size(), val_count, val_rng);

        std::vector<bool> is_val(rest.size(), false);
        for (const std::uint64_t p : val_picks) is_val[size_t(p)] = true;
        std::uint64_t train_count = 0;
        for (size_t i = 0; i < rest.size(); ++i) {
            if (is_val[i])
                out.validation.push_back(rest[i]);
            else {
                out.train.push_back(rest[i]);
                ++train_count;
            }
        }

        cls_report["test_object"] = test_object;
        cls_report["test"] = objects.at(test_object).size();
        cls_report["validation"] = val_count;
        cls_report["train"] = train_count;
        out.report["classes"][cls] = cls_report;
    }

    std::sort(out.train.begin(), out.train.end());
    std::sort(out.validation.begin(), out.validation.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

}  // namespace graspgen

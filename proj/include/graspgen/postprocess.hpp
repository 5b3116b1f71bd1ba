// Dataset cleaning: depth-variance filter, table-bisect filter, per-object
// 4-sigma outlier removal, and the class-level train/validation/test split.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "graspgen/datastore.hpp"

namespace graspgen {

struct FilterStage {
    std::string name;
    std::uint64_t input = 0;
    std::uint64_t removed = 0;
    std::uint64_t retained = 0;
};

struct FilterReport {
    std::vector<FilterStage> stages;
    std::map<std::string, std::uint64_t> removed_per_object;
    // Records whose worst sigma score is close to the threshold; exported for
    // manual review instead of being deleted.
    std::vector<SampleKey> review_list;

    nlohmann::json to_json() const;
};

// Removes samples whose decoded depth-image variance (population, meters^2)
// is strictly below the threshold. Indices are into ds.samples, ascending.
std::vector<size_t> variance_filter(const Dataset& ds, const std::vector<size_t>& input,
                                    double threshold, FilterReport& report, double near = 0.01,
                                    double far = 0.75);

// Removes samples whose camera sits within epsilon of the table height (the
// image bisects the table edge-on). Camera and table heights come from the
// stored frames, so the filter is self-contained.
std::vector<size_t> table_bisect_filter(const Dataset& ds, const std::vector<size_t>& input,
                                        double epsilon, FilterReport& report);

// Per object, per grasp dimension: removes samples farther than k population
// standard deviations from the object mean in any dimension (strict).
// Zero-variance dimensions never trigger; groups smaller than 2 pass through.
std::vector<size_t> sigma_filter(const Dataset& ds, const std::vector<size_t>& input, double k,
                                 FilterReport& report);

// The documented order: variance, then bisect, then sigma.
std::vector<size_t> run_filters(const Dataset& ds, double variance_threshold,
                                double bisect_epsilon, double sigma_k, FilterReport& report,
                                double near = 0.01, double far = 0.75);

struct SplitSpec {
    double validation_fraction = 0.10;
    std::uint64_t seed = 0;
};

struct SplitResult {
    std::vector<size_t> train;
    std::vector<size_t> validation;
    std::vector<size_t> test;
    nlohmann::json report;  // per-class assignment details
};

// Object class = name up to the first '-' (objects named like "mug-01").
std::string object_class(const std::string& object_name);

// Per class: one seeded object -> test; 10% of the remaining grasps (round
// half up) -> validation; rest -> train. Single-object classes go entirely to
// test. Deterministic for a fixed seed regardless of input order.
SplitResult split_dataset(const Dataset& ds, const std::vector<size_t>& input,
                          const SplitSpec& spec);

}  // namespace graspgen

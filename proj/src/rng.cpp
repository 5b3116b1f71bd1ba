#include "graspgen/rng.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace graspgen {

std::vector<std::uint64_t> sample_without_replacement(std::uint64_t n, std::uint64_t k, Rng& rng) {
    if (k > n) throw std::runtime_error("sample_without_replacement: k > n");
    // Floyd's algorithm: uniform over k-subsets, O(k) draws.
    std::unordered_set<std::uint64_t> chosen;
    chosen.reserve(size_t(k));
    for (std::uint64_t j = n - k; j < n; ++j) {
        const std::uint64_t t = rng.next_below(j + 1);
        chosen.insert(chosen.count(t) ? j : t);
    }
    std::vector<std::uint64_t> out(chosen.begin(), chosen.end());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace graspgen

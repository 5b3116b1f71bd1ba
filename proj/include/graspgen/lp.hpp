// Dense two-phase simplex for the small equality-form programs the stability
// proxy needs (tens of variables, a handful of constraints).
#pragma once

#include <vector>

namespace graspgen {

enum class LpStatus { optimal, infeasible, unbounded };

struct LpResult {
    LpStatus status = LpStatus::infeasible;
    double objective = 0.0;
    std::vector<double> x;
};

// maximize c^T x  subject to  A x = b, x >= 0.
// `a` is row-major with dimensions rows x cols. Bland's rule, so it cannot
// cycle; fine for the problem sizes this library solves.
LpResult solve_lp_max(const std::vector<double>& a, int rows, int cols,
                      const std::vector<double>& b, const std::vector<double>& c);

}  // namespace graspgen

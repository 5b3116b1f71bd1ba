#include "graspgen/lp.hpp"

#include <cmath>
#include <stdexcept>

namespace graspgen {

namespace {

constexpr double kEps = 1e-11;

// Tableau with an artificial-variable phase 1. Columns: the original `cols`
// variables followed by `rows` artificials; one extra row for the objective.
struct Tableau {
    int rows, cols;          // constraint rows, total columns (incl. artificials)
    std::vector<double> t;   // (rows + 1) x (cols + 1), last column = rhs
    std::vector<int> basis;  // basic variable per row

    double& at(int r, int c) { return t[size_t(r) * size_t(cols + 1) + size_t(c)]; }
    double at(int r, int c) const { return t[size_t(r) * size_t(cols + 1) + size_t(c)]; }

    void pivot(int pr, int pc) {
        const double pv = at(pr, pc);
        for (int c = 0; c <= cols; ++c) at(pr, c) /= pv;
        for (int r = 0; r <= rows; ++r) {
            if (r == pr) continue;
            const double f = at(r, pc);
            if (f == 0.0) continue;
            for (int c = 0; c <= cols; ++c) at(r, c) -= f * at(pr, c);
        }
        basis[size_t(pr)] = pc;
    }

    // Returns false when the current objective row is already optimal.
    bool iterate(int usable_cols) {
        // Bland: smallest-index entering column with positive reduced cost.
        int pc = -1;
        for (int c = 0; c < usable_cols; ++c) {
            if (at(rows, c) > kEps) {
                pc = c;
                break;
            }
        }
        if (pc < 0) return false;
        int pr = -1;
        double best = 0.0;
        for (int r = 0; r < rows; ++r) {
            const double a = at(r, pc);
            if (a > kEps) {
                const double ratio = at(r, cols) / a;
                if (pr < 0 || ratio < best - kEps ||
                    (ratio < best + kEps && basis[size_t(r)] < basis[size_t(pr)])) {
                    pr = r;
                    best = ratio;
                }
            }
        }
        if (pr < 0) throw std::runtime_error("lp: unbounded");
        pivot(pr, pc);
        return true;
    }
};

}  // namespace

LpResult solve_lp_max(const std::vector<double>& a, int rows, int cols,
                      const std::vector<double>& b, const std::vector<double>& c) {
    Tableau tb;
    tb.rows = rows;
    tb.cols = cols + rows;
    tb.t.assign(size_t(rows + 1) * size_t(tb.cols + 1), 0.0);
    tb.basis.resize(size_t(rows));

    for (int r = 0; r < rows; ++r) {
        const double sign = (b[size_t(r)] < 0.0) ? -1.0 : 1.0;  // keep rhs nonnegative
        for (int j = 0; j < cols; ++j) tb.at(r, j) = sign * a[size_t(r) * size_t(cols) + size_t(j)];
        tb.at(r, cols + r) = 1.0;
        tb.at(r, tb.cols) = sign * b[size_t(r)];
        tb.basis[size_t(r)] = cols + r;
    }

    // Phase 1: minimize the artificial sum (as a maximization of its negative).
    for (int j = 0; j <= tb.cols; ++j) {
        double s = 0.0;
        for (int r = 0; r < rows; ++r) s += tb.at(r, j);
        tb.at(rows, j) = (j >= cols && j < tb.cols) ? s - 1.0 : s;
    }
    try {
        while (tb.iterate(tb.cols)) {}
    } catch (const std::runtime_error&) {
        return {LpStatus::unbounded, 0.0, {}};
    }
    if (tb.at(rows, tb.cols) > 1e-8) return {LpStatus::infeasible, 0.0, {}};

    // Drive any artificial still in the basis out (or its row is redundant).
    for (int r = 0; r < rows; ++r) {
        if (tb.basis[size_t(r)] < cols) continue;
        int pc = -1;
        for (int j = 0; j < cols; ++j) {
            if (std::fabs(tb.at(r, j)) > kEps) {
                pc = j;
                break;
            }
        }
        if (pc >= 0) tb.pivot(r, pc);
    }

    // Phase 2 objective: express c over the current basis.
    for (int j = 0; j <= tb.cols; ++j) tb.at(rows, j) = 0.0;
    for (int j = 0; j < cols; ++j) tb.at(rows, j) = c[size_t(j)];
    for (int r = 0; r < rows; ++r) {
        const int bv = tb.basis[size_t(r)];
        if (bv < cols && c[size_t(bv)] != 0.0) {
            const double f = c[size_t(bv)];
            for (int j = 0; j <= tb.cols; ++j) tb.at(rows, j) -= f * tb.at(r, j);
        }
    }

    try {
        while (tb.iterate(cols)) {}  // artificials stay out in phase 2
    } catch (const std::runtime_error&) {
        return {LpStatus::unbounded, 0.0, {}};
    }

    LpResult res;
    res.status = LpStatus::optimal;
    res.x.assign(size_t(cols), 0.0);
    for (int r = 0; r < rows; ++r) {
        if (tb.basis[size_t(r)] < cols) res.x[size_t(tb.basis[size_t(r)])] = tb.at(r, tb.cols);
    }
    res.objective = 0.0;
    for (int j = 0; j < cols; ++j) res.objective += c[size_t(j)] * res.x[size_t(j)];
    return res;
}

}  // namespace graspgen

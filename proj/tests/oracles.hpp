// Test-only oracles, implemented independently of the library code paths
// they check: exhaustive recursion instead of dynamic programming, explicit
// normal equations instead of orthogonal decompositions, and full 2^n
// enumeration instead of rank-sum convolution.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "prex/alignment.hpp"
#include "prex/perturbation.hpp"

namespace oracles {

// Minimum alignment cost by brute-force recursion over every alignment.
inline double brute_force_align_cost(const std::vector<std::string>& ref,
                                     const std::vector<std::string>& hyp,
                                     const prex::AlignmentCosts& costs, std::size_t i = 0,
                                     std::size_t j = 0) {
    if (i == ref.size() && j == hyp.size()) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    if (i < ref.size() && j < hyp.size()) {
        const double step = ref[i] == hyp[j] ? 0.0 : costs.substitution;
        best = std::min(best, step + brute_force_align_cost(ref, hyp, costs, i + 1, j + 1));
    }
    if (i < ref.size()) {
        best = std::min(best,
                        costs.deletion + brute_force_align_cost(ref, hyp, costs, i + 1, j));
    }
    if (j < hyp.size()) {
        best = std::min(best,
                        costs.insertion + brute_force_align_cost(ref, hyp, costs, i, j + 1));
    }
    return best;
}

struct RidgeOracleResult {
    bool singular = false;
    double intercept = 0.0;
    std::vector<double> scores;
};

// Weighted ridge via explicitly assembled normal equations
// (X'WX + lambda*D) beta = X'Wy solved by Gauss-Jordan elimination with
// partial pivoting in long double. Reports singularity instead of guessing.
inline RidgeOracleResult normal_equations_ridge(const std::vector<prex::MaskVector>& masks,
                                                const std::vector<double>& weights,
                                                const std::vector<double>& labels, double lambda) {
    const int n = static_cast<int>(masks.size());
    const int d = static_cast<int>(masks.front().size());
    const int dim = d + 1;

    std::vector<std::vector<long double>> a(dim, std::vector<long double>(dim + 1, 0.0L));
    for (int i = 0; i < n; ++i) {
        std::vector<long double> row(dim);
        row[0] = 1.0L;
        for (int j = 0; j < d; ++j) row[j + 1] = masks[i][j];
        for (int r = 0; r < dim; ++r) {
            for (int c = 0; c < dim; ++c) a[r][c] += weights[i] * row[r] * row[c];
            a[r][dim] += weights[i] * row[r] * labels[i];
        }
    }
    for (int j = 1; j < dim; ++j) a[j][j] += lambda;  // intercept unpenalized

    RidgeOracleResult res;
    for (int col = 0; col < dim; ++col) {
        int pivot = col;
        for (int r = col + 1; r < dim; ++r) {
            if (std::fabs(static_cast<double>(a[r][col])) >
                std::fabs(static_cast<double>(a[pivot][col]))) {
                pivot = r;
            }
        }
        if (std::fabs(static_cast<double>(a[pivot][col])) < 1e-10) {
            res.singular = true;
            return res;
        }
        std::swap(a[col], a[pivot]);
        const long double p = a[col][col];
        for (int c = col; c <= dim; ++c) a[col][c] /= p;
        for (int r = 0; r < dim; ++r) {
            if (r == col) continue;
            const long double f = a[r][col];
            if (f == 0.0L) continue;
            for (int c = col; c <= dim; ++c) a[r][c] -= f * a[col][c];
        }
    }
    res.intercept = static_cast<double>(a[0][dim]);
    res.scores.resize(d);
    for (int j = 0; j < d; ++j) res.scores[j] = static_cast<double>(a[j + 1][dim]);
    return res;
}

// Exact two-sided signed-rank p-value by enumerating every sign assignment.
// `abs_diffs` must be the nonzero |differences|; `w_obs` = min(W+, W-).
inline double enumerate_wilcoxon_p(const std::vector<double>& abs_diffs, double w_obs) {
    const int n = static_cast<int>(abs_diffs.size());

    // Average ranks, same tie convention as any textbook table.
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return abs_diffs[a] < abs_diffs[b]; });
    std::vector<double> rank(n);
    for (int i = 0; i < n;) {
        int j = i;
        while (j < n && abs_diffs[order[j]] == abs_diffs[order[i]]) ++j;
        const double avg = (i + 1 + j) / 2.0;
        for (int k = i; k < j; ++k) rank[order[k]] = avg;
        i = j;
    }
    double total = 0.0;
    for (double r : rank) total += r;

    long favourable = 0;
    const long assignments = 1L << n;
    for (long bits = 0; bits < assignments; ++bits) {
        double w_plus = 0.0;
        for (int i = 0; i < n; ++i) {
            if (bits & (1L << i)) w_plus += rank[i];
        }
        if (std::min(w_plus, total - w_plus) <= w_obs + 1e-9) ++favourable;
    }
    return static_cast<double>(favourable) / static_cast<double>(assignments);
}

}  // namespace oracles

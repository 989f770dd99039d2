#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "prex/alignment.hpp"
#include "prex/audio.hpp"
#include "prex/errors.hpp"
#include "prex/parallel.hpp"
#include "prex/perturbation.hpp"
#include "prex/recognizer.hpp"

namespace prex {

/// Cosine similarity between the all-present instance and a mask vector:
/// sqrt(u/d) with u unmasked bits, and 0 for the all-masked vector.
inline double closeness_weight(const MaskVector& mask) {
    if (mask.empty()) throw InvalidArgument("closeness_weight: empty mask");
    const int u = mask_ones(mask);
    if (u == 0) return 0.0;
    return std::sqrt(static_cast<double>(u) / static_cast<double>(mask.size()));
}

struct RidgeFit {
    double intercept = 0.0;
    std::vector<double> scores;
};

namespace detail {

/// Weighted ridge as a least-squares problem on the weighted design matrix
/// augmented with sqrt(lambda) rows for the (unpenalized-intercept) penalty.
/// The complete orthogonal decomposition yields the unique solution when the
/// system has full rank and the minimum-norm solution otherwise, which covers
/// the lambda = 0 rank-deficient case without a separate code path.
class RidgeSolver {
public:
    RidgeSolver(const std::vector<MaskVector>& masks, const std::vector<double>& weights,
                double lambda) {
        const int n = static_cast<int>(masks.size());
        if (n < 2) throw InvalidArgument("weighted ridge requires at least 2 records");
        if (static_cast<int>(weights.size()) != n) {
            throw InvalidArgument("weights/masks length mismatch");
        }
        if (lambda < 0.0) throw InvalidArgument("lambda must be non-negative");
        d_ = static_cast<int>(masks.front().size());
        if (d_ < 1) throw InvalidArgument("masks must be non-empty");

        bool any_weight = false;
        sqrt_w_.resize(n);
        for (int i = 0; i < n; ++i) {
            if (static_cast<int>(masks[i].size()) != d_) {
                throw InvalidArgument("inconsistent mask lengths");
            }
            if (weights[i] < 0.0) throw InvalidArgument("weights must be non-negative");
            any_weight = any_weight || weights[i] > 0.0;
            sqrt_w_[i] = std::sqrt(weights[i]);
        }
        if (!any_weight) throw InvalidArgument("all closeness weights are zero");

        Eigen::MatrixXd design = Eigen::MatrixXd::Zero(n + d_, d_ + 1);
        for (int i = 0; i < n; ++i) {
            design(i, 0) = sqrt_w_[i];
            for (int j = 0; j < d_; ++j) design(i, j + 1) = sqrt_w_[i] * masks[i][j];
        }
        const double sqrt_lambda = std::sqrt(lambda);
        for (int j = 0; j < d_; ++j) design(n + j, j + 1) = sqrt_lambda;
        cod_.compute(design);
    }

    RidgeFit fit(const std::vector<double>& labels) const {
        const int n = static_cast<int>(sqrt_w_.size());
        if (static_cast<int>(labels.size()) != n) {
            throw InvalidArgument("labels/masks length mismatch");
        }
        Eigen::VectorXd target = Eigen::VectorXd::Zero(n + d_);
        for (int i = 0; i < n; ++i) target(i) = sqrt_w_[i] * labels[i];
        const Eigen::VectorXd beta = cod_.solve(target);
        RidgeFit out;
        out.intercept = beta(0);
        out.scores.assign(beta.data() + 1, beta.data() + 1 + d_);
        return out;
    }

    int dimension() const { return d_; }

private:
    int d_ = 0;
    std::vector<double> sqrt_w_;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod_;
};

}  // namespace detail

/// Fits g(x) = w0 + w1 x1 + ... + wd xd minimizing
/// sum_i we_i (y_i - g(m_i))^2 + lambda * |w_{1..d}|^2 with the intercept
/// unpenalized. With lambda = 0 and a rank-deficient system the minimum-norm
/// solution is returned.
inline RidgeFit fit_weighted_ridge(const std::vector<MaskVector>& masks,
                                   const std::vector<double>& weights,
                                   const std::vector<double>& labels, double lambda) {
    return detail::RidgeSolver(masks, weights, lambda).fit(labels);
}

/// Segment indices sorted by descending score; equal scores break toward the
/// lower index so rankings are reproducible.
inline std::vector<int> ranking_from_scores(const std::vector<double>& scores,
                                            bool by_absolute = false) {
    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double sa = by_absolute ? std::fabs(scores[a]) : scores[a];
        const double sb = by_absolute ? std::fabs(scores[b]) : scores[b];
        if (sa != sb) return sa > sb;
        return a < b;
    });
    return order;
}

/// Explanation for one phoneme position: the fitted importance score of each
/// segment and the induced ranking.
struct Explanation {
    std::string audio_id;
    int position = 0;
    std::string phoneme;
    Strategy strategy = Strategy::lime_ts;
    PerturbationPlan plan;
    double lambda = 1.0;
    double intercept = 0.0;
    std::vector<double> scores;
    std::vector<int> ranking;
    bool degenerate = false;  // every mutant carried the same label
};

struct ExplainOptions {
    double lambda = 1.0;
    bool rank_by_absolute = false;
    int jobs = 0;  // 0 = all logical CPUs
    AlignmentCosts costs{};
};

/// Explanations for every position of the original transcription, plus the
/// segmentation they index into. Mutants are transcribed once and reused
/// across positions, so recognizer invocations = 1 + mutant count no matter
/// how long the transcription is.
struct ExplanationSet {
    Segmentation seg;
    Transcription transcription;
    std::vector<Explanation> explanations;
    int n_mutants = 0;
};

namespace detail {

inline ExplanationSet explain_core(const AudioClip& clip,
                                   const std::optional<Segmentation>& expert_seg,
                                   const RecognizerFn& recognize, const PerturbationPlan& plan,
                                   const ExplainOptions& opts, std::optional<int> only_position) {
    validate_plan(plan);
    if (clip.samples.empty()) throw InvalidArgument("cannot explain an empty clip");
    if (!recognize) throw InvalidArgument("recognizer is not callable");

    ExplanationSet result;
    result.transcription = recognize(clip);
    if (result.transcription.empty()) {
        throw InvalidArgument("recognizer produced an empty transcription; nothing to explain");
    }
    if (only_position && (*only_position < 0 ||
                          *only_position >= static_cast<int>(result.transcription.size()))) {
        throw InvalidArgument("phoneme position " + std::to_string(*only_position) +
                              " out of range (transcription length " +
                              std::to_string(result.transcription.size()) + ")");
    }

    std::vector<MaskVector> masks;
    if (plan.strategy == Strategy::lime_ts) {
        auto [seg, ts_masks] = sample_ts(plan, clip);
        result.seg = std::move(seg);
        masks = std::move(ts_masks);
    } else {
        if (!expert_seg || expert_seg->kind != SegKind::expert) {
            throw InvalidArgument(std::string(strategy_name(plan.strategy)) +
                                  " requires an expert segmentation");
        }
        if (expert_seg->empty()) throw InvalidArgument("expert segmentation is empty");
        result.seg = *expert_seg;
        masks = plan.strategy == Strategy::lime ? sample_lime(plan, result.seg.size())
                                                : sample_ws(plan, result.seg.size());
    }
    const int d = result.seg.size();
    check_column_coverage(masks, d);
    result.n_mutants = static_cast<int>(masks.size());

    std::vector<double> weights(masks.size());
    for (std::size_t i = 0; i < masks.size(); ++i) weights[i] = closeness_weight(masks[i]);

    // Fan the mutant transcriptions out across workers; each index writes its
    // own slot so results are independent of scheduling.
    const int n_positions = static_cast<int>(result.transcription.size());
    std::vector<std::vector<int>> match(masks.size());
    parallel_for(masks.size(), opts.jobs, [&](std::size_t i) {
        try {
            const AudioClip mutant = realize(clip, result.seg, masks[i]);
            const Transcription mutant_out = recognize(mutant);
            match[i] = reference_match_labels(result.transcription, mutant_out, opts.costs);
        } catch (const RecognizerError& e) {
            throw RecognizerError(std::string(e.what()) + " (mutant mask " +
                                      mask_string(masks[i]) + ")",
                                  e.exit_code(), e.stderr_output(), e.timed_out());
        }
    });

    const detail::RidgeSolver solver(masks, weights, opts.lambda);

    std::vector<int> positions;
    if (only_position) {
        positions.push_back(*only_position);
    } else {
        positions.resize(n_positions);
        std::iota(positions.begin(), positions.end(), 0);
    }

    std::vector<double> labels(masks.size());
    for (int p : positions) {
        bool all_same = true;
        for (std::size_t i = 0; i < masks.size(); ++i) {
            labels[i] = match[i][p];
            all_same = all_same && labels[i] == labels[0];
        }
        const RidgeFit fit = solver.fit(labels);

        Explanation expl;
        expl.audio_id = clip.id;
        expl.position = p;
        expl.phoneme = result.transcription[p];
        expl.strategy = plan.strategy;
        expl.plan = plan;
        expl.lambda = opts.lambda;
        expl.intercept = fit.intercept;
        expl.scores = fit.scores;
        expl.degenerate = all_same;
        if (all_same) {
            // No label ever flipped: the fit carries no ranking signal, fall
            // back to ascending segment order and flag it.
            expl.ranking.resize(d);
            std::iota(expl.ranking.begin(), expl.ranking.end(), 0);
        } else {
            expl.ranking = ranking_from_scores(fit.scores, opts.rank_by_absolute);
        }
        result.explanations.push_back(std::move(expl));
    }
    return result;
}

}  // namespace detail

inline ExplanationSet explain_all(const AudioClip& clip,
                                  const std::optional<Segmentation>& expert_seg,
                                  const RecognizerFn& recognize, const PerturbationPlan& plan,
                                  const ExplainOptions& opts = {}) {
    return detail::explain_core(clip, expert_seg, recognize, plan, opts, std::nullopt);
}

inline ExplanationSet explain_all(const AudioClip& clip,
                                  const std::optional<Segmentation>& expert_seg,
                                  const RecognizerSpec& spec, const PerturbationPlan& plan,
                                  const ExplainOptions& opts = {}) {
    return detail::explain_core(clip, expert_seg, make_recognizer(spec), plan, opts, std::nullopt);
}

inline Explanation explain_phoneme(const AudioClip& clip,
                                   const std::optional<Segmentation>& expert_seg,
                                   const RecognizerFn& recognize, const PerturbationPlan& plan,
                                   int position, const ExplainOptions& opts = {}) {
    ExplanationSet set = detail::explain_core(clip, expert_seg, recognize, plan, opts, position);
    return std::move(set.explanations.front());
}

inline Explanation explain_phoneme(const AudioClip& clip,
                                   const std::optional<Segmentation>& expert_seg,
                                   const RecognizerSpec& spec, const PerturbationPlan& plan,
                                   int position, const ExplainOptions& opts = {}) {
    return explain_phoneme(clip, expert_seg, make_recognizer(spec), plan, position, opts);
}

}  // namespace prex

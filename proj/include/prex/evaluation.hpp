#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "prex/audio.hpp"
#include "prex/errors.hpp"
#include "prex/explainer.hpp"
#include "prex/rng.hpp"

namespace prex {

struct SpeakerInfo {
    std::string gender;
    std::string dialect;
    std::string speaker_id;
};

/// 1 iff the ground-truth segment is credited within the top k ranks.
/// Expert segmentations require the ground-truth index itself; time
/// segmentations credit any time segment that strictly overlaps the
/// ground-truth interval. k beyond d is clamped.
inline int hit_at_k(const std::vector<int>& ranking, const Segment& gt, const Segmentation& seg,
                    int k) {
    if (k < 1) throw InvalidArgument("hit_at_k: k must be >= 1");
    const int kmax = std::min<int>(k, static_cast<int>(ranking.size()));
    for (int r = 0; r < kmax; ++r) {
        const int idx = ranking[r];
        if (seg.kind == SegKind::expert) {
            if (idx == gt.index) return 1;
        } else {
            if (overlap_samples(seg.segments[idx], gt) > 0) return 1;
        }
    }
    return 0;
}

inline int hit_at_k(const Explanation& expl, const Segment& gt, const Segmentation& seg, int k) {
    return hit_at_k(expl.ranking, gt, seg, k);
}

/// One explained phoneme with its ground truth, ready for scoring.
struct EvalCase {
    std::vector<int> ranking;
    std::shared_ptr<const Segmentation> seg;
    Segment gt;
    std::int64_t stream_id = -1;  // substream index for the random baseline
};

struct ValiditySummary {
    int n = 0;
    long n1 = 0, n3 = 0, n5 = 0;
    double v1 = 0.0, v3 = 0.0, v5 = 0.0;
};

/// validity@{1,3,5} over a set of cases. The nesting invariant
/// v1 <= v3 <= v5 is enforced as a hard assertion: hit sets are nested by
/// construction, so a violation means the scorer itself is broken.
inline ValiditySummary validity(const std::vector<EvalCase>& cases) {
    if (cases.empty()) throw InvalidArgument("validity: no cases");
    ValiditySummary s;
    s.n = static_cast<int>(cases.size());
    for (const EvalCase& c : cases) {
        s.n1 += hit_at_k(c.ranking, c.gt, *c.seg, 1);
        s.n3 += hit_at_k(c.ranking, c.gt, *c.seg, 3);
        s.n5 += hit_at_k(c.ranking, c.gt, *c.seg, 5);
    }
    s.v1 = static_cast<double>(s.n1) / s.n;
    s.v3 = static_cast<double>(s.n3) / s.n;
    s.v5 = static_cast<double>(s.n5) / s.n;
    if (!(s.v1 <= s.v3 && s.v3 <= s.v5)) {
        throw std::logic_error("validity nesting violated: v1 <= v3 <= v5 must hold");
    }
    return s;
}

struct BaselineSummary {
    double v1 = 0.0, v3 = 0.0, v5 = 0.0;
    int trials = 0;
};

struct CaseHitCounts {
    long h1 = 0, h3 = 0, h5 = 0;
};

/// Monte-Carlo hit counts of a uniformly random ranking, per case. Each case
/// gets its own counter-derived substream, so results are deterministic
/// regardless of evaluation order or parallelism. The time-segment overlap
/// rule is applied exactly as in hit_at_k.
inline std::vector<CaseHitCounts> random_baseline_per_case(const std::vector<EvalCase>& cases,
                                                           int trials, std::uint64_t seed) {
    if (trials < 1) throw InvalidArgument("random_baseline: trials must be >= 1");
    if (cases.empty()) throw InvalidArgument("random_baseline: no cases");

    std::vector<CaseHitCounts> counts(cases.size());
    for (std::size_t ci = 0; ci < cases.size(); ++ci) {
        const EvalCase& c = cases[ci];
        const int d = c.seg->size();
        if (d < 1) throw InvalidArgument("random_baseline: empty segmentation");

        // Segments that count as hits for this ground truth.
        std::vector<std::uint8_t> relevant(d, 0);
        if (c.seg->kind == SegKind::expert) {
            if (c.gt.index >= 0 && c.gt.index < d) relevant[c.gt.index] = 1;
        } else {
            for (int j = 0; j < d; ++j) {
                relevant[j] = overlap_samples(c.seg->segments[j], c.gt) > 0 ? 1 : 0;
            }
        }

        const std::uint64_t sub = c.stream_id >= 0 ? static_cast<std::uint64_t>(c.stream_id) : ci;
        std::mt19937_64 gen(derive_seed(seed, sub));
        const int kmax = std::min(5, d);
        std::vector<int> order(d);
        for (int t = 0; t < trials; ++t) {
            for (int j = 0; j < d; ++j) order[j] = j;
            // Only the top five ranks matter, so a partial shuffle suffices.
            int first_hit = kmax;  // rank of the first relevant segment, if any
            for (int step = 0; step < kmax; ++step) {
                const int pick = step + static_cast<int>(uniform_below(
                                            gen, static_cast<std::uint64_t>(d - step)));
                std::swap(order[step], order[pick]);
                if (relevant[order[step]]) {
                    first_hit = step;
                    break;
                }
            }
            if (first_hit < 1) ++counts[ci].h1;
            if (first_hit < 3) ++counts[ci].h3;
            if (first_hit < 5) ++counts[ci].h5;
        }
    }
    return counts;
}

inline BaselineSummary random_baseline(const std::vector<EvalCase>& cases, int trials,
                                       std::uint64_t seed) {
    const std::vector<CaseHitCounts> counts = random_baseline_per_case(cases, trials, seed);
    long hits1 = 0, hits3 = 0, hits5 = 0;
    for (const CaseHitCounts& c : counts) {
        hits1 += c.h1;
        hits3 += c.h3;
        hits5 += c.h5;
    }
    BaselineSummary b;
    b.trials = trials;
    const double total = static_cast<double>(trials) * cases.size();
    b.v1 = hits1 / total;
    b.v3 = hits3 / total;
    b.v5 = hits5 / total;
    return b;
}

struct WilcoxonResult {
    double w = 0.0;        // min(W+, W-)
    double p_value = 1.0;  // two-sided
    bool significant_at_5pct = false;
    int n = 0;             // pairs with nonzero difference
    bool exact = false;    // exact enumeration (n <= 20) vs normal approximation
};

/// Wilcoxon signed-rank test on paired samples. Zero differences are dropped;
/// tied |differences| receive average ranks. Exact two-sided p-values are
/// computed by enumerating the null distribution for n <= 20; larger n uses
/// the tie-corrected normal approximation with continuity correction.
inline WilcoxonResult wilcoxon_signed_rank(const std::vector<std::pair<double, double>>& pairs) {
    std::vector<double> diffs;
    for (const auto& [a, b] : pairs) {
        const double diff = a - b;
        if (diff != 0.0) diffs.push_back(diff);
    }
    if (diffs.empty()) {
        throw InvalidArgument("wilcoxon_signed_rank: all differences are zero; test undefined");
    }
    const int n = static_cast<int>(diffs.size());

    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return std::fabs(diffs[a]) < std::fabs(diffs[b]); });

    // Average ranks over runs of tied |difference|; doubling keeps them integral.
    std::vector<double> rank(n, 0.0);
    double tie_correction = 0.0;
    for (int i = 0; i < n;) {
        int j = i;
        while (j < n && std::fabs(diffs[order[j]]) == std::fabs(diffs[order[i]])) ++j;
        const double avg = (i + 1 + j) / 2.0;  // mean of ranks i+1 .. j
        for (int k = i; k < j; ++k) rank[order[k]] = avg;
        const double t = j - i;
        tie_correction += t * t * t - t;
        i = j;
    }

    double w_plus = 0.0, total = 0.0;
    for (int i = 0; i < n; ++i) {
        total += rank[i];
        if (diffs[i] > 0.0) w_plus += rank[i];
    }
    const double w_minus = total - w_plus;

    WilcoxonResult res;
    res.n = n;
    res.w = std::min(w_plus, w_minus);

    if (n <= 20) {
        res.exact = true;
        // Distribution of 2*W+ over all 2^n sign assignments.
        const long total2 = std::llround(2.0 * total);
        const long w_obs2 = std::llround(2.0 * res.w);
        std::vector<double> count(total2 + 1, 0.0);
        count[0] = 1.0;
        for (int i = 0; i < n; ++i) {
            const long r2 = std::llround(2.0 * rank[i]);
            for (long s = total2; s >= r2; --s) count[s] += count[s - r2];
        }
        double favourable = 0.0;
        for (long s = 0; s <= total2; ++s) {
            if (std::min(s, total2 - s) <= w_obs2) favourable += count[s];
        }
        res.p_value = favourable / std::pow(2.0, n);
    } else {
        const double mean = n * (n + 1) / 4.0;
        const double var = n * (n + 1) * (2.0 * n + 1) / 24.0 - tie_correction / 48.0;
        const double z = (res.w - mean + 0.5) / std::sqrt(var);
        res.p_value = std::min(1.0, std::erfc(-z / std::sqrt(2.0)));
    }
    res.significant_at_5pct = res.p_value < 0.05;
    return res;
}

struct TopSegmentEntry {
    int segment_index = 0;
    std::optional<std::string> label;  // modal expert label at that index
    int count = 0;
    double frequency = 0.0;
};

/// How often each segment index appears among the top_m ranks of the given
/// explanations, reported for the top_m most frequent indices. Expert labels
/// are attached by majority vote across the matching segmentations.
inline std::vector<TopSegmentEntry> top_segment_report(
    const std::vector<const Explanation*>& explanations,
    const std::vector<const Segmentation*>& segmentations, int top_m) {
    if (explanations.empty()) throw InvalidArgument("top_segment_report: no explanations");
    if (explanations.size() != segmentations.size()) {
        throw InvalidArgument("top_segment_report: explanations/segmentations size mismatch");
    }
    if (top_m < 1) throw InvalidArgument("top_segment_report: top_m must be >= 1");

    std::map<int, int> counts;
    std::map<int, std::map<std::string, int>> labels;
    for (std::size_t i = 0; i < explanations.size(); ++i) {
        const Explanation& e = *explanations[i];
        const Segmentation& seg = *segmentations[i];
        const int kmax = std::min<int>(top_m, static_cast<int>(e.ranking.size()));
        for (int r = 0; r < kmax; ++r) {
            const int idx = e.ranking[r];
            ++counts[idx];
            if (idx < seg.size() && seg.segments[idx].label) {
                ++labels[idx][*seg.segments[idx].label];
            }
        }
    }

    std::vector<TopSegmentEntry> out;
    for (const auto& [idx, count] : counts) {
        TopSegmentEntry entry;
        entry.segment_index = idx;
        entry.count = count;
        entry.frequency = static_cast<double>(count) / explanations.size();
        const auto lit = labels.find(idx);
        if (lit != labels.end() && !lit->second.empty()) {
            // Modal label; ties resolve to the lexicographically smallest.
            const auto best = std::max_element(
                lit->second.begin(), lit->second.end(),
                [](const auto& a, const auto& b) { return a.second < b.second; });
            entry.label = best->first;
        }
        out.push_back(std::move(entry));
    }
    std::sort(out.begin(), out.end(), [](const TopSegmentEntry& a, const TopSegmentEntry& b) {
        if (a.count != b.count) return a.count > b.count;
        return a.segment_index < b.segment_index;
    });
    if (static_cast<int>(out.size()) > top_m) out.resize(top_m);
    return out;
}

}  // namespace prex

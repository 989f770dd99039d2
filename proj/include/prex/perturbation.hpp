#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "prex/audio.hpp"
#include "prex/errors.hpp"
#include "prex/rng.hpp"

namespace prex {

/// Binary mask over segments: 1 = segment present, 0 = segment masked.
using MaskVector = std::vector<std::uint8_t>;

inline int mask_ones(const MaskVector& mask) {
    int ones = 0;
    for (std::uint8_t b : mask) ones += b;
    return ones;
}

inline std::string mask_string(const MaskVector& mask) {
    std::string s;
    s.reserve(mask.size());
    for (std::uint8_t b : mask) s += b ? '1' : '0';
    return s;
}

enum class Strategy { lime, lime_ws, lime_ts };

inline const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::lime: return "lime";
        case Strategy::lime_ws: return "lime-ws";
        case Strategy::lime_ts: return "lime-ts";
    }
    return "?";
}

inline Strategy parse_strategy(const std::string& name) {
    if (name == "lime") return Strategy::lime;
    if (name == "lime-ws" || name == "lime_ws") return Strategy::lime_ws;
    if (name == "lime-ts" || name == "lime_ts") return Strategy::lime_ts;
    throw InvalidArgument("unknown strategy: " + name + " (expected lime, lime-ws or lime-ts)");
}

/// Mutant generation parameters for all three strategies. Echoed verbatim
/// into every explanation record so runs can be reproduced exactly.
struct PerturbationPlan {
    Strategy strategy = Strategy::lime_ts;
    int n_global = 500;        // lime: mutant count
    double mask_prob = 0.5;    // lime: per-segment masking probability
    int window_k = 7;          // ws/ts: window length in segments
    int n_per_window = 20;     // ws/ts: mutants per window position
    int ts_duration_ms = 70;   // ts: time segment duration
    std::uint64_t seed = 42;
};

inline void validate_plan(const PerturbationPlan& plan) {
    if (plan.n_global < 1) throw InvalidArgument("n_global must be >= 1");
    if (!(plan.mask_prob > 0.0 && plan.mask_prob < 1.0)) {
        throw InvalidArgument("mask_prob must lie strictly between 0 and 1");
    }
    if (plan.window_k < 1) throw InvalidArgument("window_k must be >= 1");
    if (plan.n_per_window < 1) throw InvalidArgument("n_per_window must be >= 1");
    if (plan.ts_duration_ms < 1) throw InvalidArgument("ts_duration_ms must be >= 1");
}

/// Global random masking: each segment is masked independently with
/// probability mask_prob. The all-ones vector is resampled away so every
/// mutant perturbs something.
inline std::vector<MaskVector> sample_lime(const PerturbationPlan& plan, int d) {
    validate_plan(plan);
    if (d < 1) throw InvalidArgument("segment count d must be >= 1");
    if (plan.n_global < d) {
        warn("n_global=" + std::to_string(plan.n_global) + " is below the segment count d=" +
             std::to_string(d) + "; the surrogate fit may be underdetermined");
    }
    std::mt19937_64 gen(plan.seed);
    std::vector<MaskVector> masks;
    masks.reserve(plan.n_global);
    for (int i = 0; i < plan.n_global; ++i) {
        MaskVector mask(d, 1);
        bool any_masked = false;
        do {
            any_masked = false;
            for (int j = 0; j < d; ++j) {
                mask[j] = bernoulli(gen, plan.mask_prob) ? 0 : 1;
                any_masked = any_masked || mask[j] == 0;
            }
        } while (!any_masked);
        masks.push_back(std::move(mask));
    }
    return masks;
}

/// Sliding-window masking: for each window start s in 0..max(d-k, 0) the
/// window covers [s, min(s+k, d)); bits outside the window stay 1, and a
/// uniformly drawn count of 1..span in-window positions is masked.
inline std::vector<MaskVector> sample_ws(const PerturbationPlan& plan, int d) {
    validate_plan(plan);
    if (d < 1) throw InvalidArgument("segment count d must be >= 1");
    std::mt19937_64 gen(plan.seed);
    const int last_start = std::max(d - plan.window_k, 0);
    std::vector<MaskVector> masks;
    masks.reserve(static_cast<std::size_t>(last_start + 1) * plan.n_per_window);
    std::vector<int> window;
    for (int s = 0; s <= last_start; ++s) {
        const int span = std::min(s + plan.window_k, d) - s;
        window.resize(span);
        for (int j = 0; j < span; ++j) window[j] = s + j;
        for (int rep = 0; rep < plan.n_per_window; ++rep) {
            MaskVector mask(d, 1);
            const int m = 1 + static_cast<int>(uniform_below(gen, span));
            // Partial Fisher-Yates: the first m entries are a uniform draw of
            // m distinct in-window positions.
            for (int j = 0; j < m; ++j) {
                const int pick = j + static_cast<int>(uniform_below(gen, span - j));
                std::swap(window[j], window[pick]);
                mask[window[j]] = 0;
            }
            masks.push_back(std::move(mask));
        }
    }
    return masks;
}

/// Time-segment variant: slice the clip into fixed-duration segments, then
/// run the sliding-window mechanics over them.
inline std::pair<Segmentation, std::vector<MaskVector>> sample_ts(const PerturbationPlan& plan,
                                                                  const AudioClip& clip) {
    Segmentation seg = time_segmentation(clip, plan.ts_duration_ms);
    std::vector<MaskVector> masks = sample_ws(plan, seg.size());
    return {std::move(seg), std::move(masks)};
}

/// Applies a mask vector to the audio: masked segments are zeroed out.
inline AudioClip realize(const AudioClip& clip, const Segmentation& seg, const MaskVector& mask) {
    if (static_cast<int>(mask.size()) != seg.size()) {
        throw InvalidArgument("mask length " + std::to_string(mask.size()) +
                              " does not match segment count " + std::to_string(seg.size()));
    }
    std::vector<int> masked;
    for (int j = 0; j < static_cast<int>(mask.size()); ++j) {
        if (mask[j] == 0) masked.push_back(j);
    }
    return mask_segments(clip, seg, masked);
}

/// Warns when some feature column is constant across all mutants, since the
/// regression cannot attribute anything to a never-perturbed segment.
inline void check_column_coverage(const std::vector<MaskVector>& masks, int d) {
    if (d < 2 || masks.empty()) return;
    for (int j = 0; j < d; ++j) {
        bool any0 = false, any1 = false;
        for (const MaskVector& m : masks) {
            any0 = any0 || m[j] == 0;
            any1 = any1 || m[j] == 1;
            if (any0 && any1) break;
        }
        if (!(any0 && any1)) {
            warn("feature column " + std::to_string(j) +
                 " is constant across all mutants; its importance score carries no signal");
        }
    }
}

}  // namespace prex

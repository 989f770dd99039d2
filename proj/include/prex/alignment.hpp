#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "prex/errors.hpp"
#include "prex/transcription.hpp"

namespace prex {

enum class OpKind { match, substitution, deletion, insertion };

inline const char* op_kind_name(OpKind kind) {
    switch (kind) {
        case OpKind::match: return "match";
        case OpKind::substitution: return "substitution";
        case OpKind::deletion: return "deletion";
        case OpKind::insertion: return "insertion";
    }
    return "?";
}

/// One aligned step. match/substitution carry both indices, deletion only the
/// reference index, insertion only the hypothesis index.
struct AlignmentOp {
    OpKind kind = OpKind::match;
    std::optional<int> ref_index;
    std::optional<int> hyp_index;
    std::optional<std::string> ref_label;
    std::optional<std::string> hyp_label;
};

/// Weighted edit costs. The default (4, 3, 3) follows the sclite word
/// alignment convention; unit costs are available for plain Levenshtein.
struct AlignmentCosts {
    double substitution = 4.0;
    double deletion = 3.0;
    double insertion = 3.0;
};

inline AlignmentCosts unit_costs() { return AlignmentCosts{1.0, 1.0, 1.0}; }

struct AlignmentResult {
    std::vector<AlignmentOp> ops;
    double cost = 0.0;
};

/// Minimum-total-cost alignment via dynamic programming. Among equal-cost
/// alignments the result is deterministic: the backtrace prefers
/// match > substitution > deletion > insertion at every cell, so repeated
/// labels always resolve the same way.
inline AlignmentResult align(const Transcription& ref, const Transcription& hyp,
                             const AlignmentCosts& costs = {}) {
    const int n = static_cast<int>(ref.size());
    const int m = static_cast<int>(hyp.size());
    std::vector<double> table(static_cast<std::size_t>(n + 1) * (m + 1));
    auto cell = [&](int i, int j) -> double& {
        return table[static_cast<std::size_t>(i) * (m + 1) + j];
    };

    for (int j = 0; j <= m; ++j) cell(0, j) = j * costs.insertion;
    for (int i = 1; i <= n; ++i) {
        cell(i, 0) = i * costs.deletion;
        for (int j = 1; j <= m; ++j) {
            const double diag =
                cell(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0.0 : costs.substitution);
            const double del = cell(i - 1, j) + costs.deletion;
            const double ins = cell(i, j - 1) + costs.insertion;
            cell(i, j) = std::min({diag, del, ins});
        }
    }

    constexpr double kEps = 1e-9;
    auto same = [&](double a, double b) { return std::fabs(a - b) <= kEps; };

    AlignmentResult result;
    result.cost = cell(n, m);
    int i = n, j = m;
    while (i > 0 || j > 0) {
        const double here = cell(i, j);
        if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] && same(here, cell(i - 1, j - 1))) {
            result.ops.push_back({OpKind::match, i - 1, j - 1, ref[i - 1], hyp[j - 1]});
            --i;
            --j;
        } else if (i > 0 && j > 0 && ref[i - 1] != hyp[j - 1] &&
                   same(here, cell(i - 1, j - 1) + costs.substitution)) {
            result.ops.push_back({OpKind::substitution, i - 1, j - 1, ref[i - 1], hyp[j - 1]});
            --i;
            --j;
        } else if (i > 0 && same(here, cell(i - 1, j) + costs.deletion)) {
            result.ops.push_back(
                {OpKind::deletion, i - 1, std::nullopt, ref[i - 1], std::nullopt});
            --i;
        } else {
            result.ops.push_back(
                {OpKind::insertion, std::nullopt, j - 1, std::nullopt, hyp[j - 1]});
            --j;
        }
    }
    std::reverse(result.ops.begin(), result.ops.end());
    return result;
}

/// 0/1 per hypothesis position: 1 iff the op covering it is a match.
inline std::vector<int> label_against_reference(const Transcription& ref, const Transcription& hyp,
                                                const AlignmentCosts& costs = {}) {
    std::vector<int> labels(hyp.size(), 0);
    for (const AlignmentOp& op : align(ref, hyp, costs).ops) {
        if (op.kind == OpKind::match) labels[*op.hyp_index] = 1;
    }
    return labels;
}

/// 0/1 per reference position: 1 iff that phoneme survives as a match in the
/// hypothesis. Substitutions count as 0 — the phoneme no longer exists there.
inline std::vector<int> reference_match_labels(const Transcription& ref, const Transcription& hyp,
                                               const AlignmentCosts& costs = {}) {
    std::vector<int> labels(ref.size(), 0);
    for (const AlignmentOp& op : align(ref, hyp, costs).ops) {
        if (op.kind == OpKind::match) labels[*op.ref_index] = 1;
    }
    return labels;
}

/// Does the phoneme at position p of `original` still exist in `mutant`?
inline int phoneme_presence(const Transcription& original, const Transcription& mutant, int p,
                            const AlignmentCosts& costs = {}) {
    if (p < 0 || p >= static_cast<int>(original.size())) {
        throw InvalidArgument("phoneme position " + std::to_string(p) +
                              " out of range (transcription length " +
                              std::to_string(original.size()) + ")");
    }
    return reference_match_labels(original, mutant, costs)[p];
}

/// A transcription mistake shape: er->uw substitution, ih deletion, ...
struct MistakeKey {
    std::optional<std::string> ref_label;
    std::optional<std::string> hyp_label;
    OpKind kind = OpKind::substitution;

    friend bool operator==(const MistakeKey&, const MistakeKey&) = default;
    friend bool operator<(const MistakeKey& a, const MistakeKey& b) {
        const auto key = [](const MistakeKey& k) {
            return std::make_tuple(k.ref_label.value_or(""), k.hyp_label.value_or(""),
                                   std::string(op_kind_name(k.kind)));
        };
        return key(a) < key(b);
    }
};

inline MistakeKey mistake_key_from_op(const AlignmentOp& op) {
    return MistakeKey{op.ref_label, op.hyp_label, op.kind};
}

struct MistakeFrequency {
    MistakeKey key;
    int count = 0;
    double frequency = 0.0;
};

/// Per-utterance mistake presence: each pair contributes at most once per
/// mistake shape, and the frequency is the fraction of pairs containing it.
/// Sorted by descending frequency, then lexicographically by key.
inline std::vector<MistakeFrequency> mistake_frequencies(
    const std::vector<std::pair<Transcription, Transcription>>& corpus,
    const AlignmentCosts& costs = {}) {
    if (corpus.empty()) throw InvalidArgument("mistake_frequencies: empty corpus");
    std::map<MistakeKey, int> counts;
    for (const auto& [ref, hyp] : corpus) {
        std::vector<MistakeKey> seen;
        for (const AlignmentOp& op : align(ref, hyp, costs).ops) {
            if (op.kind == OpKind::match) continue;
            MistakeKey key = mistake_key_from_op(op);
            if (std::find(seen.begin(), seen.end(), key) == seen.end()) seen.push_back(key);
        }
        for (const MistakeKey& key : seen) ++counts[key];
    }
    std::vector<MistakeFrequency> out;
    out.reserve(counts.size());
    for (const auto& [key, count] : counts) {
        out.push_back({key, count, static_cast<double>(count) / corpus.size()});
    }
    std::sort(out.begin(), out.end(), [](const MistakeFrequency& a, const MistakeFrequency& b) {
        if (a.count != b.count) return a.count > b.count;
        return a.key < b.key;
    });
    return out;
}

}  // namespace prex

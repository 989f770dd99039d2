#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prex/errors.hpp"

namespace prex {

/// Mono 16-bit PCM audio; the instance being explained.
struct AudioClip {
    std::vector<std::int16_t> samples;
    int sample_rate = 16000;
    std::string id;
};

enum class SegKind { expert, time };

inline const char* seg_kind_name(SegKind kind) {
    return kind == SegKind::expert ? "expert" : "time";
}

/// A contiguous sample interval [start, end). Expert segments carry the
/// annotated phoneme label; time segments are unlabeled.
struct Segment {
    int index = 0;
    std::int64_t start = 0;
    std::int64_t end = 0;
    std::optional<std::string> label;
};

/// Samples shared by two intervals; touching intervals do not overlap.
inline std::int64_t overlap_samples(const Segment& a, const Segment& b) {
    return std::max<std::int64_t>(0, std::min(a.end, b.end) - std::max(a.start, b.start));
}

struct Segmentation {
    SegKind kind = SegKind::time;
    std::vector<Segment> segments;

    int size() const { return static_cast<int>(segments.size()); }
    bool empty() const { return segments.empty(); }
};

/// Validates ordering invariants and assigns contiguous indices 0..d-1.
/// Gaps between segments are allowed; overlaps and empty intervals are not.
inline Segmentation make_segmentation(SegKind kind, std::vector<Segment> segments) {
    for (std::size_t i = 0; i < segments.size(); ++i) {
        Segment& s = segments[i];
        s.index = static_cast<int>(i);
        if (s.start < 0 || s.start >= s.end) {
            throw InvalidArgument("segment " + std::to_string(i) + ": empty or inverted interval [" +
                                  std::to_string(s.start) + ", " + std::to_string(s.end) + ")");
        }
        if (i > 0 && s.start < segments[i - 1].end) {
            throw InvalidArgument("segment " + std::to_string(i) +
                                  " overlaps or precedes its predecessor (starts at " +
                                  std::to_string(s.start) + ", previous ends at " +
                                  std::to_string(segments[i - 1].end) + ")");
        }
    }
    return Segmentation{kind, std::move(segments)};
}

/// Phoneme labels of an expert segmentation, in segment order.
inline std::vector<std::string> segment_labels(const Segmentation& seg) {
    std::vector<std::string> out;
    out.reserve(seg.segments.size());
    for (const Segment& s : seg.segments) {
        if (!s.label) throw InvalidArgument("segment " + std::to_string(s.index) + " has no label");
        out.push_back(*s.label);
    }
    return out;
}

/// Fixed-duration slicing anchored at sample 0. The final shorter remainder
/// segment is kept as its own feature so tail samples stay explainable.
inline Segmentation time_segmentation(const AudioClip& clip, int duration_ms) {
    if (duration_ms <= 0) throw InvalidArgument("time segment duration must be positive");
    const std::int64_t seg_len =
        static_cast<std::int64_t>(clip.sample_rate) * duration_ms / 1000;
    if (seg_len < 1) {
        throw InvalidArgument("time segment duration " + std::to_string(duration_ms) +
                              "ms is shorter than one sample period at " +
                              std::to_string(clip.sample_rate) + " Hz");
    }
    std::vector<Segment> segs;
    const std::int64_t n = static_cast<std::int64_t>(clip.samples.size());
    for (std::int64_t start = 0; start < n; start += seg_len) {
        segs.push_back(Segment{0, start, std::min(start + seg_len, n), std::nullopt});
    }
    return make_segmentation(SegKind::time, std::move(segs));
}

/// Returns a copy with every sample of the selected segments set to digital
/// zero; everything else, including samples in gaps, is left untouched.
inline AudioClip mask_segments(const AudioClip& clip, const Segmentation& seg,
                               const std::vector<int>& masked) {
    AudioClip out = clip;
    const std::int64_t n = static_cast<std::int64_t>(out.samples.size());
    for (int idx : masked) {
        if (idx < 0 || idx >= seg.size()) {
            throw InvalidArgument("segment index " + std::to_string(idx) + " out of range (d = " +
                                  std::to_string(seg.size()) + ")");
        }
        const Segment& s = seg.segments[idx];
        if (s.end > n) {
            throw InvalidArgument("segment [" + std::to_string(s.start) + ", " +
                                  std::to_string(s.end) + ") extends past clip length " +
                                  std::to_string(n));
        }
        std::fill(out.samples.begin() + s.start, out.samples.begin() + s.end, std::int16_t{0});
    }
    return out;
}

}  // namespace prex

#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "prex/audio.hpp"
#include "prex/perturbation.hpp"

using namespace prex;

namespace {

std::vector<std::string> g_warnings;

void capture_warning(const std::string& msg) { g_warnings.push_back(msg); }

struct WarningCapture {
    WarningHandler previous;
    WarningCapture() : previous(set_warning_handler(&capture_warning)) { g_warnings.clear(); }
    ~WarningCapture() { set_warning_handler(previous); }
};

bool all_ones(const MaskVector& m) { return mask_ones(m) == static_cast<int>(m.size()); }

}  // namespace

TEST_CASE("sample_lime basics") {
    PerturbationPlan plan;
    plan.strategy = Strategy::lime;
    plan.n_global = 50;
    plan.seed = 123;

    const auto masks = sample_lime(plan, 4);
    REQUIRE(masks.size() == 50);
    for (const MaskVector& m : masks) {
        REQUIRE(m.size() == 4);
        CHECK_FALSE(all_ones(m));
    }
    CHECK(sample_lime(plan, 4) == masks);  // deterministic given the seed

    plan.seed = 124;
    CHECK(sample_lime(plan, 4) != masks);
}

TEST_CASE("sample_lime with d=1 always masks the only segment") {
    PerturbationPlan plan;
    plan.strategy = Strategy::lime;
    plan.n_global = 20;
    for (const MaskVector& m : sample_lime(plan, 1)) {
        CHECK(m == MaskVector{0});
    }
}

TEST_CASE("plan validation rejects boundary masking probabilities") {
    PerturbationPlan plan;
    plan.mask_prob = 0.0;
    CHECK_THROWS_AS(validate_plan(plan), InvalidArgument);
    plan.mask_prob = 1.0;
    CHECK_THROWS_AS(validate_plan(plan), InvalidArgument);
    plan.mask_prob = 0.5;
    plan.window_k = 0;
    CHECK_THROWS_AS(validate_plan(plan), InvalidArgument);
    CHECK_THROWS_AS(sample_lime(PerturbationPlan{}, 0), InvalidArgument);
}

TEST_CASE("sample_lime warns when n_global is below d") {
    WarningCapture capture;
    PerturbationPlan plan;
    plan.n_global = 3;
    sample_lime(plan, 8);
    REQUIRE_FALSE(g_warnings.empty());
    CHECK(g_warnings[0].find("n_global") != std::string::npos);
}

TEST_CASE("sample_ws window arithmetic and containment") {
    PerturbationPlan plan;
    plan.strategy = Strategy::lime_ws;
    plan.window_k = 4;
    plan.n_per_window = 2;
    plan.seed = 9;

    const int d = 10;
    const auto masks = sample_ws(plan, d);
    REQUIRE(masks.size() == 7 * 2);  // starts 0..6

    for (std::size_t i = 0; i < masks.size(); ++i) {
        const int window_start = static_cast<int>(i) / plan.n_per_window;
        const int window_end = std::min(window_start + plan.window_k, d);
        int masked = 0;
        for (int j = 0; j < d; ++j) {
            if (masks[i][j] == 0) {
                ++masked;
                // Bits outside the generating window stay 1.
                CHECK(j >= window_start);
                CHECK(j < window_end);
            }
        }
        CHECK(masked >= 1);
        CHECK(masked <= plan.window_k);
    }
    CHECK(sample_ws(plan, d) == masks);
}

TEST_CASE("sample_ws clamps oversized windows to a single full window") {
    PerturbationPlan plan;
    plan.window_k = 7;
    plan.n_per_window = 5;
    const auto masks = sample_ws(plan, 3);
    REQUIRE(masks.size() == 5);  // one window covering all 3 segments
    for (const MaskVector& m : masks) {
        const int masked = 3 - mask_ones(m);
        CHECK(masked >= 1);
        CHECK(masked <= 3);
    }
}

TEST_CASE("sample_ws covers every segment for various d") {
    PerturbationPlan plan;
    plan.n_per_window = 20;
    for (int d : {1, 2, 3, 7, 8, 15}) {
        const auto masks = sample_ws(plan, d);
        for (int j = 0; j < d; ++j) {
            bool masked_somewhere = false;
            for (const MaskVector& m : masks) masked_somewhere |= m[j] == 0;
            CHECK(masked_somewhere);
        }
    }
}

TEST_CASE("sample_ts slices then samples over the time segments") {
    AudioClip clip;
    clip.sample_rate = 16000;
    clip.samples.resize(7840);
    PerturbationPlan plan;
    plan.strategy = Strategy::lime_ts;

    const auto [seg, masks] = sample_ts(plan, clip);
    CHECK(seg.kind == SegKind::time);
    REQUIRE(seg.size() == 7);  // 7840 / 1120
    for (const MaskVector& m : masks) REQUIRE(m.size() == 7);

    // Same mechanics as sample_ws over d = 7.
    CHECK(masks == sample_ws(plan, 7));
}

TEST_CASE("realize applies the mask through mask_segments") {
    AudioClip clip;
    clip.sample_rate = 16000;
    clip.samples = {1, 2, 3, 4, 5, 6};
    const Segmentation seg = make_segmentation(
        SegKind::time, {Segment{0, 0, 2, std::nullopt}, Segment{0, 2, 4, std::nullopt},
                        Segment{0, 4, 6, std::nullopt}});

    CHECK(realize(clip, seg, {1, 1, 1}).samples == clip.samples);
    CHECK(realize(clip, seg, {0, 0, 0}).samples == std::vector<std::int16_t>(6, 0));
    CHECK(realize(clip, seg, {1, 0, 1}).samples == mask_segments(clip, seg, {1}).samples);
    CHECK_THROWS_AS(realize(clip, seg, {1, 1}), InvalidArgument);
}

TEST_CASE("constant feature columns are warned about") {
    WarningCapture capture;
    // Two mutants that never touch segment 2.
    check_column_coverage({{0, 1, 1}, {1, 0, 1}}, 3);
    REQUIRE(g_warnings.size() == 1);
    CHECK(g_warnings[0].find("column 2") != std::string::npos);

    g_warnings.clear();
    check_column_coverage({{0, 1}, {1, 0}}, 2);
    CHECK(g_warnings.empty());
}

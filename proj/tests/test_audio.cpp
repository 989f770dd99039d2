#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>

#include "prex/audio.hpp"
#include "prex/phn.hpp"
#include "prex/rng.hpp"
#include "prex/wav.hpp"

using namespace prex;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const auto dir = fs::temp_directory_path() / "prex_test_audio";
    fs::create_directories(dir);
    return dir;
}

AudioClip make_clip(std::vector<std::int16_t> samples, int rate = 16000) {
    AudioClip c;
    c.samples = std::move(samples);
    c.sample_rate = rate;
    c.id = "test";
    return c;
}

}  // namespace

TEST_CASE("wav round-trip is bit-identical") {
    std::mt19937_64 gen(7);
    AudioClip clip;
    clip.sample_rate = 16000;
    clip.samples.resize(16000);
    for (auto& s : clip.samples) {
        s = static_cast<std::int16_t>(static_cast<std::uint16_t>(gen()));
    }
    const auto path = (temp_dir() / "roundtrip.wav").string();
    write_wav(clip, path);
    const AudioClip back = read_wav(path);
    CHECK(back.sample_rate == clip.sample_rate);
    CHECK(back.samples == clip.samples);
}

TEST_CASE("wav reader takes header fields verbatim") {
    AudioClip clip = make_clip({0});
    const auto path = (temp_dir() / "single.wav").string();
    write_wav(clip, path);
    CHECK(fs::file_size(path) == 44 + 2);

    AudioClip big = make_clip(std::vector<std::int16_t>(3500, 123));
    const auto path2 = (temp_dir() / "big.wav").string();
    write_wav(big, path2);
    const AudioClip back = read_wav(path2);
    CHECK(back.samples.size() == 3500);
    CHECK(back.sample_rate == 16000);
}

TEST_CASE("wav reader rejects unsupported encodings by field") {
    // Hand-build a stereo header.
    AudioClip clip = make_clip({1, 2, 3, 4});
    const auto path = (temp_dir() / "stereo.wav").string();
    write_wav(clip, path);
    {
        std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(22);
        const char two[2] = {2, 0};
        f.write(two, 2);
    }
    CHECK_THROWS_WITH(read_wav(path), Catch::Matchers::ContainsSubstring("channels=2"));

    CHECK_THROWS_AS(read_wav((temp_dir() / "missing.wav").string()), IoError);

    const auto garbage = (temp_dir() / "garbage.wav").string();
    std::ofstream(garbage) << "not a wav";
    CHECK_THROWS_AS(read_wav(garbage), FormatError);
}

TEST_CASE("write_wav reports io failures") {
    AudioClip clip = make_clip({1});
    CHECK_THROWS_AS(write_wav(clip, "/nonexistent-dir/out.wav"), IoError);
}

TEST_CASE("mask_segments zeroes exactly the requested segments") {
    AudioClip clip = make_clip({1, 2, 3, 4, 5, 6, 7, 8});
    Segmentation seg = make_segmentation(
        SegKind::time, {Segment{0, 0, 4, std::nullopt}, Segment{0, 4, 8, std::nullopt}});

    const AudioClip m0 = mask_segments(clip, seg, {0});
    CHECK(m0.samples == std::vector<std::int16_t>{0, 0, 0, 0, 5, 6, 7, 8});

    const AudioClip none = mask_segments(clip, seg, {});
    CHECK(none.samples == clip.samples);

    CHECK_THROWS_AS(mask_segments(clip, seg, {2}), InvalidArgument);
}

TEST_CASE("mask_segments leaves gap samples untouched") {
    AudioClip clip = make_clip({9, 9, 9, 9, 9, 9});
    // Expert-style segmentation with a leading gap [0, 2).
    Segmentation seg =
        make_segmentation(SegKind::expert, {Segment{0, 2, 4, "aa"}, Segment{0, 4, 6, "iy"}});
    const AudioClip all = mask_segments(clip, seg, {0, 1});
    CHECK(all.samples == std::vector<std::int16_t>{9, 9, 0, 0, 0, 0});
}

TEST_CASE("masking is idempotent and unions compose") {
    std::mt19937_64 gen(11);
    AudioClip clip = make_clip(std::vector<std::int16_t>(300));
    for (auto& s : clip.samples) s = static_cast<std::int16_t>(uniform_below(gen, 2000) + 1);
    Segmentation seg = time_segmentation(clip, 5);  // 80-sample segments at 16k

    const AudioClip once = mask_segments(clip, seg, {1, 3});
    const AudioClip twice = mask_segments(once, seg, {1, 3});
    CHECK(once.samples == twice.samples);

    const AudioClip m1 = mask_segments(clip, seg, {1});
    const AudioClip m13 = mask_segments(m1, seg, {3});
    CHECK(m13.samples == once.samples);
}

TEST_CASE("time_segmentation slices with remainder") {
    const AudioClip a = make_clip(std::vector<std::int16_t>(3360));
    const Segmentation sa = time_segmentation(a, 70);
    REQUIRE(sa.size() == 3);
    for (const Segment& s : sa.segments) CHECK(s.end - s.start == 1120);

    const AudioClip b = make_clip(std::vector<std::int16_t>(3500));
    const Segmentation sb = time_segmentation(b, 70);
    REQUIRE(sb.size() == 4);
    CHECK(sb.segments.back().start == 3360);
    CHECK(sb.segments.back().end == 3500);

    const AudioClip c = make_clip(std::vector<std::int16_t>(1120));
    CHECK(time_segmentation(c, 70).size() == 1);

    CHECK_THROWS_AS(time_segmentation(a, 0), InvalidArgument);
    const AudioClip low_rate = make_clip(std::vector<std::int16_t>(10), 500);
    CHECK_THROWS_AS(time_segmentation(low_rate, 1), InvalidArgument);
}

TEST_CASE("time_segmentation covers every sample exactly once") {
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 1 + static_cast<int>(uniform_below(gen, 5000));
        const int ms = 1 + static_cast<int>(uniform_below(gen, 120));
        const AudioClip clip = make_clip(std::vector<std::int16_t>(n));
        const Segmentation seg = time_segmentation(clip, ms);
        std::int64_t covered = 0, expected_start = 0;
        for (const Segment& s : seg.segments) {
            CHECK(s.start == expected_start);
            covered += s.end - s.start;
            expected_start = s.end;
        }
        CHECK(covered == n);
        CHECK(seg.segments.back().end == n);
    }
}

TEST_CASE("overlap_samples interval arithmetic") {
    const Segment a{0, 0, 1120, std::nullopt};
    const Segment b{1, 1000, 2000, std::nullopt};
    const Segment c{2, 1120, 2240, std::nullopt};
    CHECK(overlap_samples(a, b) == 120);
    CHECK(overlap_samples(a, c) == 0);  // touching intervals do not overlap
    CHECK(overlap_samples(a, a) == 1120);
}

TEST_CASE("parse_phn reads TIMIT-layout annotations") {
    const Segmentation seg = parse_phn_text("0 3050 h#\n3050 4559 sh\n", "inline");
    REQUIRE(seg.size() == 2);
    CHECK(seg.kind == SegKind::expert);
    CHECK(seg.segments[0].label == "h#");
    CHECK(seg.segments[1].label == "sh");
    CHECK(seg.segments[1].start == 3050);
    CHECK(seg.segments[1].end == 4559);

    // CRLF and blank lines are fine.
    const Segmentation crlf = parse_phn_text("0 10 aa\r\n\r\n10 20 iy\r\n", "inline");
    CHECK(crlf.size() == 2);
}

TEST_CASE("parse_phn rejects malformed and unordered input") {
    CHECK_THROWS_WITH(parse_phn_text("0 10 aa\n10 xx iy\n", "f"),
                      Catch::Matchers::ContainsSubstring("f:2"));
    CHECK_THROWS_WITH(parse_phn_text("0 10\n", "f"), Catch::Matchers::ContainsSubstring("f:1"));
    CHECK_THROWS_AS(parse_phn_text("3050 3050 sh\n", "f"), ParseError);      // empty interval
    CHECK_THROWS_AS(parse_phn_text("10 20 aa\n0 10 iy\n", "f"), ParseError);  // out of order
    CHECK_THROWS_AS(parse_phn_text("0 20 aa\n10 30 iy\n", "f"), ParseError);  // overlap
    CHECK_THROWS_AS(parse_phn_text("0 10 aa bb\n", "f"), ParseError);         // extra field
}

TEST_CASE("phn serialization reproduces numeric fields exactly") {
    const std::string text = "0 3050 h#\n3050 4559 sh\n4559 5723 ix\n";
    const Segmentation seg = parse_phn_text(text, "inline");
    CHECK(format_phn(seg) == text);

    const auto path = (temp_dir() / "round.phn").string();
    write_phn(seg, path);
    const Segmentation back = parse_phn(path);
    CHECK(format_phn(back) == text);
}

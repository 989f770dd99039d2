#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <vector>

#include "oracles.hpp"
#include "prex/alignment.hpp"
#include "prex/rng.hpp"

using namespace prex;

namespace {

Transcription random_seq(std::mt19937_64& gen, int max_len) {
    static const std::vector<std::string> vocab{"aa", "iy", "sh"};
    const int len = static_cast<int>(uniform_below(gen, max_len + 1));
    Transcription out;
    for (int i = 0; i < len; ++i) out.push_back(vocab[uniform_below(gen, vocab.size())]);
    return out;
}

// Sanity conditions on an alignment result: indices covered exactly once in
// order, labels consistent, cost equal to the per-op sum.
void check_well_formed(const AlignmentResult& res, const Transcription& ref,
                       const Transcription& hyp, const AlignmentCosts& costs) {
    int next_ref = 0, next_hyp = 0;
    double cost = 0.0;
    for (const AlignmentOp& op : res.ops) {
        switch (op.kind) {
            case OpKind::match:
                REQUIRE(*op.ref_index == next_ref++);
                REQUIRE(*op.hyp_index == next_hyp++);
                REQUIRE(*op.ref_label == *op.hyp_label);
                break;
            case OpKind::substitution:
                REQUIRE(*op.ref_index == next_ref++);
                REQUIRE(*op.hyp_index == next_hyp++);
                REQUIRE(*op.ref_label != *op.hyp_label);
                cost += costs.substitution;
                break;
            case OpKind::deletion:
                REQUIRE(*op.ref_index == next_ref++);
                REQUIRE(!op.hyp_index.has_value());
                cost += costs.deletion;
                break;
            case OpKind::insertion:
                REQUIRE(*op.hyp_index == next_hyp++);
                REQUIRE(!op.ref_index.has_value());
                cost += costs.insertion;
                break;
        }
    }
    REQUIRE(next_ref == static_cast<int>(ref.size()));
    REQUIRE(next_hyp == static_cast<int>(hyp.size()));
    REQUIRE(res.cost == Catch::Approx(cost));
}

}  // namespace

TEST_CASE("align basics") {
    const AlignmentResult same = align({"sh", "iy"}, {"sh", "iy"});
    CHECK(same.cost == 0.0);
    REQUIRE(same.ops.size() == 2);
    CHECK(same.ops[0].kind == OpKind::match);
    CHECK(same.ops[1].kind == OpKind::match);

    // One substitution (4) beats deletion + insertion (6).
    const AlignmentResult sub = align({"er"}, {"uw"});
    CHECK(sub.cost == 4.0);
    REQUIRE(sub.ops.size() == 1);
    CHECK(sub.ops[0].kind == OpKind::substitution);

    const AlignmentResult del = align({"d", "aa", "r", "k"}, {"d", "aa", "k"});
    CHECK(del.cost == 3.0);
    REQUIRE(del.ops.size() == 4);
    CHECK(del.ops[0].kind == OpKind::match);
    CHECK(del.ops[1].kind == OpKind::match);
    CHECK(del.ops[2].kind == OpKind::deletion);
    CHECK(del.ops[2].ref_label == "r");
    CHECK(del.ops[3].kind == OpKind::match);

    CHECK(align({}, {}).cost == 0.0);
    CHECK(align({}, {"aa"}).cost == 3.0);
    CHECK(align({"aa"}, {}).cost == 3.0);
}

TEST_CASE("align matches brute force on random pairs") {
    std::mt19937_64 gen(99);
    const AlignmentCosts sclite{};
    const AlignmentCosts unit = unit_costs();
    for (int trial = 0; trial < 300; ++trial) {
        const Transcription ref = random_seq(gen, 5);
        const Transcription hyp = random_seq(gen, 5);
        for (const AlignmentCosts& costs : {sclite, unit}) {
            const AlignmentResult res = align(ref, hyp, costs);
            check_well_formed(res, ref, hyp, costs);
            REQUIRE(res.cost ==
                    Catch::Approx(oracles::brute_force_align_cost(ref, hyp, costs)));
        }
    }
}

TEST_CASE("align(x, x) is all matches with zero cost") {
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 50; ++trial) {
        const Transcription x = random_seq(gen, 8);
        const AlignmentResult res = align(x, x);
        CHECK(res.cost == 0.0);
        for (const AlignmentOp& op : res.ops) CHECK(op.kind == OpKind::match);
    }
}

TEST_CASE("cost is symmetric when deletion and insertion cost the same") {
    std::mt19937_64 gen(17);
    for (int trial = 0; trial < 100; ++trial) {
        const Transcription a = random_seq(gen, 5);
        const Transcription b = random_seq(gen, 5);
        CHECK(align(a, b).cost == Catch::Approx(align(b, a).cost));
        CHECK(align(a, b, unit_costs()).cost == Catch::Approx(align(b, a, unit_costs()).cost));
    }
}

TEST_CASE("label_against_reference labels hypothesis positions") {
    CHECK(label_against_reference({"aa", "iy"}, {"aa", "iy"}) == std::vector<int>{1, 1});
    CHECK(label_against_reference({"sh", "iy"}, {"s", "iy"}) == std::vector<int>{0, 1});
    CHECK(label_against_reference({}, {"aa"}) == std::vector<int>{0});

    std::mt19937_64 gen(23);
    for (int trial = 0; trial < 100; ++trial) {
        const Transcription ref = random_seq(gen, 5);
        const Transcription hyp = random_seq(gen, 5);
        CHECK(label_against_reference(ref, hyp).size() == hyp.size());
    }
}

TEST_CASE("phoneme_presence follows the alignment") {
    const Transcription original{"d", "aa", "r", "k"};
    const Transcription mutant{"d", "aa", "k"};
    CHECK(phoneme_presence(original, mutant, 2) == 0);
    CHECK(phoneme_presence(original, mutant, 0) == 1);
    CHECK(phoneme_presence(original, mutant, 3) == 1);

    for (int p = 0; p < 4; ++p) CHECK(phoneme_presence(original, original, p) == 1);
    for (int p = 0; p < 4; ++p) CHECK(phoneme_presence(original, {}, p) == 0);

    CHECK_THROWS_AS(phoneme_presence(original, mutant, 4), InvalidArgument);
    CHECK_THROWS_AS(phoneme_presence(original, mutant, -1), InvalidArgument);

    // A substitution at p counts as "does not exist".
    CHECK(phoneme_presence({"er"}, {"uw"}, 0) == 0);
}

TEST_CASE("mistake_frequencies counts per-utterance presence") {
    std::vector<std::pair<Transcription, Transcription>> corpus;
    for (int i = 0; i < 4; ++i) corpus.push_back({{"er", "iy"}, {"uw", "iy"}});
    for (int i = 0; i < 6; ++i) corpus.push_back({{"er", "iy"}, {"er", "iy"}});

    const auto freqs = mistake_frequencies(corpus);
    REQUIRE(freqs.size() == 1);
    CHECK(freqs[0].key.kind == OpKind::substitution);
    CHECK(freqs[0].key.ref_label == "er");
    CHECK(freqs[0].key.hyp_label == "uw");
    CHECK(freqs[0].frequency == Catch::Approx(0.40));

    // Repeated occurrences within one pair still count once.
    const auto once = mistake_frequencies({{{"er", "er"}, {"uw", "uw"}}});
    REQUIRE(once.size() == 1);
    CHECK(once[0].frequency == Catch::Approx(1.0));

    CHECK(mistake_frequencies({{{"aa"}, {"aa"}}}).empty());
    CHECK_THROWS_AS(mistake_frequencies({}), InvalidArgument);
}

TEST_CASE("mistake_frequencies sorts by frequency then key") {
    std::vector<std::pair<Transcription, Transcription>> corpus;
    corpus.push_back({{"aa", "iy"}, {"sh", "iy"}});  // aa->sh sub
    corpus.push_back({{"aa", "iy"}, {"sh", "iy"}});
    corpus.push_back({{"iy"}, {}});  // iy deletion
    const auto freqs = mistake_frequencies(corpus);
    REQUIRE(freqs.size() == 2);
    CHECK(freqs[0].key.ref_label == "aa");
    CHECK(freqs[0].frequency == Catch::Approx(2.0 / 3.0));
    CHECK(freqs[1].key.kind == OpKind::deletion);

    // Equal counts fall back to lexicographic key order.
    const auto tied = mistake_frequencies({{{"bb"}, {"cc"}}, {{"aa"}, {"cc"}}});
    REQUIRE(tied.size() == 2);
    CHECK(tied[0].key.ref_label == "aa");
    CHECK(tied[1].key.ref_label == "bb");
}

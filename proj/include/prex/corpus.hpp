#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "prex/alignment.hpp"
#include "prex/audio.hpp"
#include "prex/errors.hpp"
#include "prex/evaluation.hpp"
#include "prex/explainer.hpp"
#include "prex/json_io.hpp"
#include "prex/parallel.hpp"
#include "prex/perturbation.hpp"
#include "prex/phn.hpp"
#include "prex/recognizer.hpp"
#include "prex/rng.hpp"
#include "prex/wav.hpp"

namespace prex {

struct ManifestEntry {
    std::string audio_id;
    std::string wav;
    std::string phn;  // empty when no expert annotation exists
    SpeakerInfo speaker;
};

/// Batch input: audio entries plus the recognizer and perturbation plan to
/// run them with.
struct CorpusManifest {
    std::vector<ManifestEntry> entries;
    RecognizerSpec recognizer;
    PerturbationPlan plan;
};

inline Json manifest_to_json(const CorpusManifest& m) {
    Json entries = Json::array();
    for (const ManifestEntry& e : m.entries) {
        Json j{{"audio_id", e.audio_id}, {"wav", e.wav}};
        if (!e.phn.empty()) j["phn"] = e.phn;
        const Json spk = speaker_to_json(e.speaker);
        if (!spk.empty()) j["speaker"] = spk;
        entries.push_back(std::move(j));
    }
    return Json{{"recognizer", recognizer_to_json(m.recognizer)},
                {"plan", plan_to_json(m.plan)},
                {"entries", std::move(entries)}};
}

inline CorpusManifest manifest_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("entries") || !j.contains("recognizer")) {
        throw FormatError("manifest must be an object with 'entries' and 'recognizer'");
    }
    CorpusManifest m;
    m.recognizer = recognizer_from_json(j.at("recognizer"));
    if (j.contains("plan")) m.plan = plan_from_json(j.at("plan"));
    std::set<std::string> ids;
    for (const Json& e : j.at("entries")) {
        ManifestEntry entry;
        entry.audio_id = e.value("audio_id", "");
        entry.wav = e.value("wav", "");
        entry.phn = e.value("phn", "");
        if (e.contains("speaker")) entry.speaker = speaker_from_json(e.at("speaker"));
        if (entry.audio_id.empty()) throw FormatError("manifest entry without audio_id");
        if (entry.wav.empty()) throw FormatError("manifest entry without wav: " + entry.audio_id);
        if (!ids.insert(entry.audio_id).second) {
            throw FormatError("duplicate audio_id in manifest: " + entry.audio_id);
        }
        m.entries.push_back(std::move(entry));
    }
    return m;
}

/// Loads a manifest, resolving relative wav/phn paths against its directory.
inline CorpusManifest load_manifest(const std::string& path) {
    CorpusManifest m = manifest_from_json(load_json_file(path));
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    auto resolve = [&](std::string& p) {
        if (!p.empty() && std::filesystem::path(p).is_relative()) {
            p = (base / p).string();
        }
    };
    for (ManifestEntry& e : m.entries) {
        resolve(e.wav);
        resolve(e.phn);
    }
    return m;
}

inline void save_manifest(const CorpusManifest& m, const std::string& path) {
    write_json_file(manifest_to_json(m), path);
}

// ---------------------------------------------------------------------------
// Synthetic oracle corpora

struct SynthConfig {
    int n_clips = 10;
    int slots_per_clip = 8;
    int slot_ms = 70;
    int vocab_size = 5;
    bool contextual = false;
    std::uint64_t seed = 42;
    int sample_rate = 16000;
    double silence_threshold = 50.0;
};

inline std::vector<std::string> default_vocab(int n) {
    static const char* kBase[] = {"aa", "iy", "sh", "eh", "ow", "uw", "ah", "er",
                                  "ey", "ao", "uh", "ih", "ax", "ae", "axr", "w"};
    if (n < 1) throw InvalidArgument("vocab size must be >= 1");
    std::vector<std::string> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        if (i < static_cast<int>(sizeof(kBase) / sizeof(kBase[0]))) {
            out.emplace_back(kBase[i]);
        } else {
            out.push_back("p" + std::to_string(i));
        }
    }
    return out;
}

/// Generates constant-amplitude-slot WAVs whose PHN ground truth equals the
/// matching synthetic oracle's decode of the unmasked clip. Slot ids avoid
/// short-range repeats so the emitted label sequence has no adjacent equals
/// and alignment attributes a slot deletion to exactly one position.
/// Contextual corpora additionally avoid id 0, whose context contribution is
/// indistinguishable from a masked slot.
inline CorpusManifest synthesize_corpus(const SynthConfig& cfg, const std::string& out_dir) {
    if (cfg.n_clips < 1 || cfg.slots_per_clip < 1 || cfg.slot_ms < 1 || cfg.vocab_size < 1) {
        throw InvalidArgument("synth: all counts must be >= 1");
    }
    if (cfg.vocab_size > 32) {
        throw InvalidArgument("synth: vocab_size above 32 overflows 16-bit slot amplitudes");
    }
    const std::int64_t slot_len =
        static_cast<std::int64_t>(cfg.sample_rate) * cfg.slot_ms / 1000;
    if (slot_len < 1) throw InvalidArgument("synth: slot duration shorter than one sample period");

    std::filesystem::create_directories(out_dir);
    const std::vector<std::string> vocab = default_vocab(cfg.vocab_size);
    const int v = cfg.vocab_size;

    CorpusManifest manifest;
    manifest.recognizer.kind =
        cfg.contextual ? RecognizerKind::synthetic_contextual : RecognizerKind::synthetic_local;
    manifest.recognizer.slot_ms = cfg.slot_ms;
    manifest.recognizer.vocab = vocab;
    manifest.recognizer.silence_threshold = cfg.silence_threshold;
    manifest.plan.seed = cfg.seed;

    static const char* kDialects[] = {"DR1", "DR2", "DR3", "DR4", "DR5", "DR6", "DR7", "DR8"};

    for (int c = 0; c < cfg.n_clips; ++c) {
        std::mt19937_64 gen(derive_seed(cfg.seed, static_cast<std::uint64_t>(c)));

        std::vector<int> ids(cfg.slots_per_clip);
        for (int i = 0; i < cfg.slots_per_clip; ++i) {
            const int lo = cfg.contextual ? 1 : 0;
            const int choices = v - lo;
            std::optional<int> avoid;
            if (cfg.contextual && i >= 2 && choices >= 2) avoid = ids[i - 2];
            if (!cfg.contextual && i >= 1 && choices >= 2) avoid = ids[i - 1];
            int id;
            do {
                id = lo + static_cast<int>(uniform_below(gen, choices));
            } while (avoid && id == *avoid);
            ids[i] = id;
        }

        char name[32];
        std::snprintf(name, sizeof(name), "clip_%04d", c);

        AudioClip clip;
        clip.id = name;
        clip.sample_rate = cfg.sample_rate;
        clip.samples.resize(static_cast<std::size_t>(cfg.slots_per_clip) * slot_len);
        std::vector<Segment> segs(cfg.slots_per_clip);
        for (int i = 0; i < cfg.slots_per_clip; ++i) {
            const std::int16_t amp = static_cast<std::int16_t>(1000 * (ids[i] + 1));
            std::fill(clip.samples.begin() + i * slot_len,
                      clip.samples.begin() + (i + 1) * slot_len, amp);
            const int emitted =
                cfg.contextual ? (ids[i] + (i > 0 ? ids[i - 1] : 0)) % v : ids[i];
            segs[i] = Segment{i, i * slot_len, (i + 1) * slot_len, vocab[emitted]};
        }
        const Segmentation phn = make_segmentation(SegKind::expert, std::move(segs));

        // The oracle's decode of the unmasked clip must equal the annotation.
        if (transcribe(manifest.recognizer, clip) != segment_labels(phn)) {
            throw std::logic_error("synth: oracle decode disagrees with generated annotation");
        }

        const std::string wav_name = std::string(name) + ".wav";
        const std::string phn_name = std::string(name) + ".phn";
        write_wav(clip, (std::filesystem::path(out_dir) / wav_name).string());
        write_phn(phn, (std::filesystem::path(out_dir) / phn_name).string());

        ManifestEntry entry;
        entry.audio_id = name;
        entry.wav = wav_name;
        entry.phn = phn_name;
        entry.speaker.gender = c % 2 == 0 ? "Female" : "Male";
        entry.speaker.dialect = kDialects[c % 8];
        std::snprintf(name, sizeof(name), "spk%04d", c);
        entry.speaker.speaker_id = name;
        manifest.entries.push_back(std::move(entry));
    }
    return manifest;
}

// ---------------------------------------------------------------------------
// Corpus evaluation (validity + random baseline, per group and strategy)

struct EvalOptions {
    std::vector<Strategy> strategies{Strategy::lime, Strategy::lime_ws, Strategy::lime_ts};
    std::optional<std::uint64_t> seed;  // overrides the manifest plan's seed
    int jobs = 0;
    int trials = 10000;
    double lambda = 1.0;
    bool rank_by_absolute = false;
    AlignmentCosts costs{};
    std::string group_by = "gender";
    double fail_fraction_limit = 0.10;
};

struct StrategyStats {
    ValiditySummary validity;
    BaselineSummary baseline;
};

struct EvaluationResult {
    Json report;
    std::string table;
    int n_entries = 0;
    int n_failed = 0;
    bool partial_failure_exceeded = false;
    std::vector<std::string> failures;
    // group -> strategy name -> stats; "All" is always present when any entry succeeded.
    std::map<std::string, std::map<std::string, StrategyStats>> stats;
};

namespace detail {

inline std::string group_key(const SpeakerInfo& speaker, const std::string& group_by) {
    if (group_by == "gender") return speaker.gender;
    if (group_by == "dialect") return speaker.dialect;
    if (group_by == "speaker") return speaker.speaker_id;
    return "";
}

inline Json eval_config_echo(const std::string& command, const std::string& manifest_path,
                             const CorpusManifest& manifest, std::uint64_t seed,
                             const EvalOptions& opts) {
    Json strategies = Json::array();
    for (Strategy s : opts.strategies) strategies.push_back(strategy_name(s));
    PerturbationPlan plan = manifest.plan;
    plan.seed = seed;
    return Json{{"command", command},
                {"manifest", manifest_path},
                {"strategies", std::move(strategies)},
                {"seed", seed},
                {"trials", opts.trials},
                {"lambda", opts.lambda},
                {"ranking", opts.rank_by_absolute ? "absolute" : "signed"},
                {"alignment_costs",
                 Json{{"substitution", opts.costs.substitution},
                      {"deletion", opts.costs.deletion},
                      {"insertion", opts.costs.insertion}}},
                {"group_by", opts.group_by},
                {"plan", plan_to_json(plan)},
                {"recognizer", recognizer_to_json(manifest.recognizer)}};
}

inline std::string format_ratio_pair(double a, double b) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f/%.2f", a, b);
    return buf;
}

}  // namespace detail

/// Explains every entry with every strategy, maps each explained phoneme to
/// its annotated ground-truth segment, and reports validity@{1,3,5} against
/// the Monte-Carlo random baseline for the All group and each metadata group.
inline EvaluationResult run_evaluation(const CorpusManifest& manifest,
                                       const std::string& manifest_path, const EvalOptions& opts) {
    if (manifest.entries.empty()) throw InvalidArgument("evaluate: manifest has no entries");
    if (opts.strategies.empty()) throw InvalidArgument("evaluate: no strategies selected");

    const std::uint64_t base_seed = opts.seed.value_or(manifest.plan.seed);
    const RecognizerFn recognize = make_recognizer(manifest.recognizer);
    const std::size_t n_entries = manifest.entries.size();
    const std::size_t n_strategies = opts.strategies.size();

    struct EntryOutcome {
        bool ok = false;
        std::string error;
        // indexed by strategy
        std::vector<std::vector<EvalCase>> cases;
    };
    std::vector<EntryOutcome> outcomes(n_entries);

    parallel_for(n_entries, opts.jobs, [&](std::size_t ei) {
        EntryOutcome& outcome = outcomes[ei];
        try {
            const ManifestEntry& entry = manifest.entries[ei];
            if (entry.phn.empty()) {
                throw InvalidArgument("entry has no phn ground truth: " + entry.audio_id);
            }
            AudioClip clip = read_wav(entry.wav);
            clip.id = entry.audio_id;
            const Segmentation expert = parse_phn(entry.phn);
            const std::vector<std::string> reference = segment_labels(expert);

            outcome.cases.resize(n_strategies);
            for (std::size_t si = 0; si < n_strategies; ++si) {
                PerturbationPlan plan = manifest.plan;
                plan.strategy = opts.strategies[si];
                plan.seed = derive_seed(base_seed, ei * n_strategies + si);
                ExplainOptions expl_opts;
                expl_opts.lambda = opts.lambda;
                expl_opts.rank_by_absolute = opts.rank_by_absolute;
                expl_opts.costs = opts.costs;
                expl_opts.jobs = 1;  // parallelism lives at the entry level here

                ExplanationSet set = explain_all(clip, expert, recognize, plan, expl_opts);
                const auto seg = std::make_shared<const Segmentation>(std::move(set.seg));

                // Ground-truth map: align the annotation labels against the
                // transcription; matched or substituted positions inherit the
                // covering expert segment, inserted phonemes have no ground
                // truth and are skipped.
                const AlignmentResult gt_map =
                    align(reference, set.transcription, opts.costs);
                for (const AlignmentOp& op : gt_map.ops) {
                    if (op.kind != OpKind::match && op.kind != OpKind::substitution) continue;
                    EvalCase c;
                    c.ranking = set.explanations[*op.hyp_index].ranking;
                    c.seg = seg;
                    c.gt = expert.segments[*op.ref_index];
                    outcome.cases[si].push_back(std::move(c));
                }
            }
            outcome.ok = true;
        } catch (const std::exception& e) {
            outcome.ok = false;
            outcome.error = manifest.entries[ei].audio_id + ": " + e.what();
        }
    });

    EvaluationResult result;
    result.n_entries = static_cast<int>(n_entries);

    // Gather cases per strategy in entry order and assign baseline substreams.
    std::vector<std::vector<EvalCase>> all_cases(n_strategies);
    std::vector<std::vector<std::string>> case_groups(n_strategies);
    for (std::size_t ei = 0; ei < n_entries; ++ei) {
        if (!outcomes[ei].ok) {
            result.failures.push_back(outcomes[ei].error);
            warn("evaluate: skipping entry: " + outcomes[ei].error);
            continue;
        }
        const std::string group =
            detail::group_key(manifest.entries[ei].speaker, opts.group_by);
        for (std::size_t si = 0; si < n_strategies; ++si) {
            for (EvalCase& c : outcomes[ei].cases[si]) {
                c.stream_id = static_cast<std::int64_t>(all_cases[si].size());
                all_cases[si].push_back(std::move(c));
                case_groups[si].push_back(group);
            }
        }
    }
    result.n_failed = static_cast<int>(result.failures.size());
    result.partial_failure_exceeded =
        result.n_failed > opts.fail_fraction_limit * static_cast<double>(n_entries);

    // Per-case baseline hits are computed once per strategy; group summaries
    // are sums over member cases, so grouping never changes the draws.
    std::vector<std::string> group_names{"All"};
    {
        std::set<std::string> groups;
        for (const auto& per_strategy : case_groups) {
            for (const std::string& g : per_strategy) {
                if (!g.empty()) groups.insert(g);
            }
        }
        group_names.insert(group_names.end(), groups.begin(), groups.end());
    }

    for (std::size_t si = 0; si < n_strategies; ++si) {
        if (all_cases[si].empty()) continue;
        const std::string strat = strategy_name(opts.strategies[si]);
        const std::uint64_t baseline_seed =
            derive_seed(base_seed, 0xBA5Eull * (si + 1));
        const std::vector<CaseHitCounts> hits =
            random_baseline_per_case(all_cases[si], opts.trials, baseline_seed);

        for (const std::string& group : group_names) {
            std::vector<EvalCase const*> member_cases;
            long h1 = 0, h3 = 0, h5 = 0;
            std::vector<EvalCase> subset;
            for (std::size_t ci = 0; ci < all_cases[si].size(); ++ci) {
                if (group != "All" && case_groups[si][ci] != group) continue;
                subset.push_back(all_cases[si][ci]);
                h1 += hits[ci].h1;
                h3 += hits[ci].h3;
                h5 += hits[ci].h5;
            }
            if (subset.empty()) continue;
            StrategyStats stats;
            stats.validity = validity(subset);
            stats.baseline.trials = opts.trials;
            const double total = static_cast<double>(opts.trials) * subset.size();
            stats.baseline.v1 = h1 / total;
            stats.baseline.v3 = h3 / total;
            stats.baseline.v5 = h5 / total;
            result.stats[group][strat] = stats;
        }
    }

    // Assemble the report: rows = metrics, columns = strategy/baseline per group.
    Json groups_json = Json::array();
    std::string table;
    for (const std::string& group : group_names) {
        const auto git = result.stats.find(group);
        if (git == result.stats.end()) continue;
        Json strategies_json = Json::array();
        int group_n = 0;
        for (std::size_t si = 0; si < n_strategies; ++si) {
            const std::string strat = strategy_name(opts.strategies[si]);
            const auto sit = git->second.find(strat);
            if (sit == git->second.end()) continue;
            group_n = sit->second.validity.n;
            strategies_json.push_back(Json{{"strategy", strat},
                                           {"validity", validity_to_json(sit->second.validity)},
                                           {"baseline", baseline_to_json(sit->second.baseline)}});
        }
        groups_json.push_back(
            Json{{"group", group}, {"n", group_n}, {"strategies", std::move(strategies_json)}});

        table += "group " + group + "\n";
        table += "  metric      ";
        for (std::size_t si = 0; si < n_strategies; ++si) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%-14s", strategy_name(opts.strategies[si]));
            table += buf;
        }
        table += "\n";
        const char* metric_names[3] = {"validity_1", "validity_3", "validity_5"};
        for (int mi = 0; mi < 3; ++mi) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "  %-12s", metric_names[mi]);
            table += buf;
            for (std::size_t si = 0; si < n_strategies; ++si) {
                const auto sit = git->second.find(strategy_name(opts.strategies[si]));
                if (sit == git->second.end()) {
                    table += "-             ";
                    continue;
                }
                const ValiditySummary& v = sit->second.validity;
                const BaselineSummary& b = sit->second.baseline;
                const double vv = mi == 0 ? v.v1 : mi == 1 ? v.v3 : v.v5;
                const double bv = mi == 0 ? b.v1 : mi == 1 ? b.v3 : b.v5;
                std::snprintf(buf, sizeof(buf), "%-14s",
                              detail::format_ratio_pair(vv, bv).c_str());
                table += buf;
            }
            table += "\n";
        }
        table += "\n";
    }

    result.report = Json{{"config", detail::eval_config_echo("evaluate", manifest_path, manifest,
                                                             base_seed, opts)},
                         {"groups", std::move(groups_json)},
                         {"failures", result.failures}};
    result.table = std::move(table);
    return result;
}

// ---------------------------------------------------------------------------
// Mistake-frequency analysis with per-mistake top-segment reports

struct MistakeOptions {
    Strategy strategy = Strategy::lime_ws;
    int top_mistakes = 5;
    int top_m = 3;
    std::string group_by = "gender";
    std::optional<std::uint64_t> seed;
    int jobs = 0;
    double lambda = 1.0;
    bool rank_by_absolute = false;
    AlignmentCosts costs{};
    double fail_fraction_limit = 0.10;
};

struct MistakesResult {
    Json report;
    std::string table;
    int n_entries = 0;
    int n_failed = 0;
    bool partial_failure_exceeded = false;
    std::vector<std::string> failures;
    std::vector<MistakeFrequency> all_frequencies;
    std::map<std::string, std::vector<MistakeFrequency>> group_frequencies;
    std::optional<WilcoxonResult> wilcoxon;
};

/// Aligns recognizer output against the PHN reference per entry, tabulates
/// mistake frequencies per group, tests the two-group frequency difference
/// with the Wilcoxon signed-rank test, and reports the most frequent segments
/// in the explanations of each top mistake.
inline MistakesResult run_mistakes(const CorpusManifest& manifest,
                                   const std::string& manifest_path, const MistakeOptions& opts) {
    if (manifest.entries.empty()) throw InvalidArgument("mistakes: manifest has no entries");
    const std::uint64_t base_seed = opts.seed.value_or(manifest.plan.seed);
    const RecognizerFn recognize = make_recognizer(manifest.recognizer);
    const std::size_t n_entries = manifest.entries.size();

    struct EntryData {
        bool ok = false;
        std::string error;
        AudioClip clip;
        Segmentation expert;
        Transcription reference;
        Transcription hypothesis;
        AlignmentResult ops;
    };
    std::vector<EntryData> data(n_entries);

    parallel_for(n_entries, opts.jobs, [&](std::size_t ei) {
        EntryData& d = data[ei];
        try {
            const ManifestEntry& entry = manifest.entries[ei];
            if (entry.phn.empty()) {
                throw InvalidArgument("entry has no phn reference: " + entry.audio_id);
            }
            d.clip = read_wav(entry.wav);
            d.clip.id = entry.audio_id;
            d.expert = parse_phn(entry.phn);
            d.reference = segment_labels(d.expert);
            d.hypothesis = recognize(d.clip);
            d.ops = align(d.reference, d.hypothesis, opts.costs);
            d.ok = true;
        } catch (const std::exception& e) {
            d.error = manifest.entries[ei].audio_id + ": " + e.what();
        }
    });

    MistakesResult result;
    result.n_entries = static_cast<int>(n_entries);
    std::vector<std::size_t> ok_entries;
    for (std::size_t ei = 0; ei < n_entries; ++ei) {
        if (data[ei].ok) {
            ok_entries.push_back(ei);
        } else {
            result.failures.push_back(data[ei].error);
            warn("mistakes: skipping entry: " + data[ei].error);
        }
    }
    result.n_failed = static_cast<int>(result.failures.size());
    result.partial_failure_exceeded =
        result.n_failed > opts.fail_fraction_limit * static_cast<double>(n_entries);
    if (ok_entries.empty()) throw InvalidArgument("mistakes: every entry failed");

    std::vector<std::pair<Transcription, Transcription>> all_pairs;
    std::map<std::string, std::vector<std::pair<Transcription, Transcription>>> group_pairs;
    for (std::size_t ei : ok_entries) {
        all_pairs.emplace_back(data[ei].reference, data[ei].hypothesis);
        const std::string group =
            detail::group_key(manifest.entries[ei].speaker, opts.group_by);
        if (!group.empty()) group_pairs[group].emplace_back(data[ei].reference, data[ei].hypothesis);
    }
    result.all_frequencies = mistake_frequencies(all_pairs, opts.costs);
    for (const auto& [group, pairs] : group_pairs) {
        result.group_frequencies[group] = mistake_frequencies(pairs, opts.costs);
    }

    // Paired frequency comparison across exactly two groups.
    if (group_pairs.size() == 2) {
        const auto& ga = result.group_frequencies.begin()->second;
        const auto& gb = std::next(result.group_frequencies.begin())->second;
        std::map<MistakeKey, std::pair<double, double>> paired;
        for (const MistakeFrequency& f : ga) paired[f.key].first = f.frequency;
        for (const MistakeFrequency& f : gb) paired[f.key].second = f.frequency;
        std::vector<std::pair<double, double>> samples;
        for (const auto& [key, fr] : paired) samples.push_back(fr);
        try {
            result.wilcoxon = wilcoxon_signed_rank(samples);
        } catch (const InvalidArgument&) {
            // identical frequency profiles: the test is undefined, report none
        }
    }

    const int n_top = std::min<int>(opts.top_mistakes, result.all_frequencies.size());

    // Explanations are needed only for entries containing a top mistake with
    // an output position (substitutions and insertions; a deleted phoneme has
    // no output position to explain).
    std::set<std::size_t> involved;
    for (int mi = 0; mi < n_top; ++mi) {
        const MistakeKey& key = result.all_frequencies[mi].key;
        if (key.kind == OpKind::deletion) continue;
        for (std::size_t ei : ok_entries) {
            for (const AlignmentOp& op : data[ei].ops.ops) {
                if (op.kind != OpKind::match && mistake_key_from_op(op) == key) {
                    involved.insert(ei);
                    break;
                }
            }
        }
    }

    std::map<std::size_t, ExplanationSet> explained;
    for (std::size_t ei : involved) explained[ei];  // pre-create nodes for parallel fill
    {
        std::vector<std::size_t> order(involved.begin(), involved.end());
        parallel_for(order.size(), opts.jobs, [&](std::size_t k) {
            const std::size_t ei = order[k];
            PerturbationPlan plan = manifest.plan;
            plan.strategy = opts.strategy;
            plan.seed = derive_seed(base_seed, ei);
            ExplainOptions expl_opts;
            expl_opts.lambda = opts.lambda;
            expl_opts.rank_by_absolute = opts.rank_by_absolute;
            expl_opts.costs = opts.costs;
            expl_opts.jobs = 1;
            explained.at(ei) = explain_all(data[ei].clip, data[ei].expert, recognize, plan, expl_opts);
        });
    }

    Json top_json = Json::array();
    std::string table;
    table += "top mistakes (All, n=" + std::to_string(all_pairs.size()) + ")\n";
    for (int mi = 0; mi < n_top; ++mi) {
        const MistakeFrequency& mf = result.all_frequencies[mi];
        Json entry = mistake_key_to_json(mf.key);
        entry["frequency"] = mf.frequency;
        entry["count"] = mf.count;

        char line[128];
        std::snprintf(line, sizeof(line), "  %-12s %-6s -> %-6s  %.2f\n",
                      op_kind_name(mf.key.kind), mf.key.ref_label.value_or("-").c_str(),
                      mf.key.hyp_label.value_or("-").c_str(), mf.frequency);
        table += line;

        if (mf.key.kind == OpKind::deletion) {
            entry["top_segments"] = Json::array();
            entry["note"] = "deleted phonemes have no output position to explain";
        } else {
            std::vector<const Explanation*> expls;
            std::vector<const Segmentation*> segs;
            for (std::size_t ei : ok_entries) {
                const auto xit = explained.find(ei);
                if (xit == explained.end()) continue;
                for (const AlignmentOp& op : data[ei].ops.ops) {
                    if (op.kind == OpKind::match || mistake_key_from_op(op) != mf.key) continue;
                    expls.push_back(&xit->second.explanations[*op.hyp_index]);
                    segs.push_back(&xit->second.seg);
                }
            }
            Json segments_json = Json::array();
            if (!expls.empty()) {
                for (const TopSegmentEntry& ts : top_segment_report(expls, segs, opts.top_m)) {
                    Json tj{{"segment_index", ts.segment_index},
                            {"count", ts.count},
                            {"frequency", ts.frequency}};
                    tj["label"] = ts.label ? Json(*ts.label) : Json(nullptr);
                    segments_json.push_back(std::move(tj));
                }
            }
            entry["top_segments"] = std::move(segments_json);
        }
        top_json.push_back(std::move(entry));
    }

    Json group_json = Json::object();
    for (const auto& [group, freqs] : result.group_frequencies) {
        group_json[group] = mistake_frequencies_to_json(freqs);
    }

    EvalOptions echo_opts;
    echo_opts.strategies = {opts.strategy};
    echo_opts.lambda = opts.lambda;
    echo_opts.rank_by_absolute = opts.rank_by_absolute;
    echo_opts.costs = opts.costs;
    echo_opts.group_by = opts.group_by;
    Json config = detail::eval_config_echo("mistakes", manifest_path, manifest, base_seed, echo_opts);
    config.erase("trials");
    config["top_mistakes"] = opts.top_mistakes;
    config["top_m"] = opts.top_m;

    result.report = Json{{"config", std::move(config)},
                         {"all", mistake_frequencies_to_json(result.all_frequencies)},
                         {"groups", std::move(group_json)},
                         {"wilcoxon", result.wilcoxon ? wilcoxon_to_json(*result.wilcoxon)
                                                      : Json(nullptr)},
                         {"top_mistakes", std::move(top_json)},
                         {"failures", result.failures}};
    result.table = std::move(table);
    return result;
}

}  // namespace prex

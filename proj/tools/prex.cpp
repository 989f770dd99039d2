// Command-line surface: explain single clips, evaluate corpora against
// annotated ground truth, analyse transcription mistakes, and generate
// synthetic oracle corpora for self-contained runs.
//
// Exit codes: 0 success, 2 usage/input error, 3 recognizer error,
// 4 too many per-entry failures.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "prex/prex.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRecognizer = 3;
constexpr int kExitPartialFailure = 4;

namespace fs = std::filesystem;
using prex::Json;

std::vector<std::string> split_command(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

struct PlanFlags {
    std::string strategy;
    int n_global = 0;
    double mask_prob = 0.0;
    int window_k = 0;
    int n_per_window = 0;
    int ts_ms = 0;
    std::uint64_t seed = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--strategy", strategy, "perturbation strategy: lime, lime-ws or lime-ts");
        cmd->add_option("--n-global", n_global, "mutant count for lime");
        cmd->add_option("--mask-prob", mask_prob, "per-segment masking probability for lime");
        cmd->add_option("--window-k", window_k, "sliding window length in segments");
        cmd->add_option("--n-per-window", n_per_window, "mutants per window position");
        cmd->add_option("--ts-ms", ts_ms, "time segment duration in milliseconds");
        cmd->add_option("--seed", seed, "pseudorandom seed");
    }

    // CLI flags beat config-file values, which beat the base plan.
    void apply(const CLI::App* cmd, prex::PerturbationPlan& plan) const {
        if (cmd->count("--strategy")) plan.strategy = prex::parse_strategy(strategy);
        if (cmd->count("--n-global")) plan.n_global = n_global;
        if (cmd->count("--mask-prob")) plan.mask_prob = mask_prob;
        if (cmd->count("--window-k")) plan.window_k = window_k;
        if (cmd->count("--n-per-window")) plan.n_per_window = n_per_window;
        if (cmd->count("--ts-ms")) plan.ts_duration_ms = ts_ms;
        if (cmd->count("--seed")) plan.seed = seed;
    }
};

struct CommonFlags {
    std::string config_path;
    std::string out_dir = ".";
    int jobs = 0;
    double lambda = 1.0;
    std::string ranking = "signed";
    std::string recognizer_cmd;
    double timeout_s = 60.0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file (flags take precedence)");
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--jobs", jobs, "worker count (default: logical CPUs)");
        cmd->add_option("--lambda", lambda, "ridge regularization strength");
        cmd->add_option("--ranking", ranking, "rank segments by 'signed' or 'absolute' scores");
        cmd->add_option("--recognizer-cmd", recognizer_cmd,
                        "subprocess recognizer command (whitespace-split; WAV path is appended)");
        cmd->add_option("--timeout-s", timeout_s, "subprocess recognizer timeout in seconds");
    }

    Json load_config() const {
        if (config_path.empty()) return Json::object();
        return prex::load_json_file(config_path);
    }

    bool rank_by_absolute(const CLI::App* cmd, const Json& config) const {
        std::string mode = config.value("ranking", std::string("signed"));
        if (cmd->count("--ranking")) mode = ranking;
        if (mode != "signed" && mode != "absolute") {
            throw prex::InvalidArgument("--ranking must be 'signed' or 'absolute'");
        }
        return mode == "absolute";
    }

    double resolve_lambda(const CLI::App* cmd, const Json& config) const {
        double value = config.value("lambda", 1.0);
        if (cmd->count("--lambda")) value = lambda;
        if (value < 0.0) throw prex::InvalidArgument("--lambda must be non-negative");
        return value;
    }

    // Recognizer resolution order: --recognizer-cmd, then the config file,
    // then (for corpus commands) the manifest.
    std::optional<prex::RecognizerSpec> resolve_recognizer(const CLI::App* cmd,
                                                           const Json& config) const {
        if (cmd->count("--recognizer-cmd")) {
            prex::RecognizerSpec spec;
            spec.kind = prex::RecognizerKind::subprocess;
            spec.command = split_command(recognizer_cmd);
            spec.timeout_s = timeout_s;
            prex::validate_recognizer_spec(spec);
            return spec;
        }
        if (config.contains("recognizer")) {
            prex::RecognizerSpec spec = prex::recognizer_from_json(config.at("recognizer"));
            if (cmd->count("--timeout-s")) spec.timeout_s = timeout_s;
            return spec;
        }
        return std::nullopt;
    }
};

int cmd_explain(const CLI::App* cmd, const CommonFlags& common, const PlanFlags& plan_flags,
                const std::string& wav_path, const std::string& phn_path) {
    const Json config = common.load_config();

    prex::PerturbationPlan plan;
    if (config.contains("plan")) plan = prex::plan_from_json(config.at("plan"));
    plan_flags.apply(cmd, plan);
    prex::validate_plan(plan);

    const auto spec = common.resolve_recognizer(cmd, config);
    if (!spec) {
        throw prex::InvalidArgument(
            "no recognizer configured: pass --recognizer-cmd or a --config with a recognizer");
    }

    prex::ExplainOptions opts;
    opts.lambda = common.resolve_lambda(cmd, config);
    opts.rank_by_absolute = common.rank_by_absolute(cmd, config);
    opts.jobs = common.jobs;

    prex::AudioClip clip = prex::read_wav(wav_path);
    std::optional<prex::Segmentation> expert;
    if (!phn_path.empty()) expert = prex::parse_phn(phn_path);
    if (plan.strategy != prex::Strategy::lime_ts && !expert) {
        throw prex::InvalidArgument(std::string(prex::strategy_name(plan.strategy)) +
                                    " requires --phn (expert segments)");
    }

    const prex::ExplanationSet set =
        prex::explain_all(clip, expert, prex::make_recognizer(*spec), plan, opts);

    Json records = Json::array();
    for (const prex::Explanation& e : set.explanations) {
        records.push_back(prex::explanation_to_json(e, set.seg));
    }
    const Json out{{"config", Json{{"command", "explain"},
                                   {"wav", wav_path},
                                   {"phn", phn_path},
                                   {"plan", prex::plan_to_json(plan)},
                                   {"lambda", opts.lambda},
                                   {"ranking", opts.rank_by_absolute ? "absolute" : "signed"},
                                   {"recognizer", prex::recognizer_to_json(*spec)}}},
                   {"audio_id", clip.id},
                   {"transcription", set.transcription},
                   {"records", std::move(records)}};

    fs::create_directories(common.out_dir);
    const std::string out_path =
        (fs::path(common.out_dir) / (clip.id + ".explanations.json")).string();
    prex::write_json_file(out, out_path);
    std::printf("wrote %s (%zu records, %d mutants)\n", out_path.c_str(),
                set.explanations.size(), set.n_mutants);
    return 0;
}

int cmd_evaluate(const CLI::App* cmd, const CommonFlags& common, const PlanFlags& plan_flags,
                 const std::string& manifest_path, std::vector<std::string> strategy_names,
                 int trials, const std::string& group_by, bool emit_csv) {
    const Json config = common.load_config();
    prex::CorpusManifest manifest = prex::load_manifest(manifest_path);

    if (config.contains("plan")) manifest.plan = prex::plan_from_json(config.at("plan"), manifest.plan);
    plan_flags.apply(cmd, manifest.plan);
    prex::validate_plan(manifest.plan);
    if (const auto spec = common.resolve_recognizer(cmd, config)) manifest.recognizer = *spec;

    prex::EvalOptions opts;
    if (strategy_names.empty() && config.contains("strategies")) {
        strategy_names = config.at("strategies").get<std::vector<std::string>>();
    }
    if (!strategy_names.empty()) {
        opts.strategies.clear();
        for (const std::string& name : strategy_names) {
            opts.strategies.push_back(prex::parse_strategy(name));
        }
    }
    opts.jobs = common.jobs;
    opts.trials = cmd->count("--trials") ? trials : config.value("trials", trials);
    opts.lambda = common.resolve_lambda(cmd, config);
    opts.rank_by_absolute = common.rank_by_absolute(cmd, config);
    opts.group_by = cmd->count("--group-by") ? group_by
                                             : config.value("group_by", group_by);
    if (cmd->count("--seed")) opts.seed = manifest.plan.seed;

    const prex::EvaluationResult result = prex::run_evaluation(manifest, manifest_path, opts);

    fs::create_directories(common.out_dir);
    const std::string report_path = (fs::path(common.out_dir) / "report.json").string();
    prex::write_json_file(result.report, report_path);
    std::fputs(result.table.c_str(), stdout);
    std::printf("wrote %s (%d entries, %d failed)\n", report_path.c_str(), result.n_entries,
                result.n_failed);

    if (emit_csv) {
        const std::string csv_path = (fs::path(common.out_dir) / "report.csv").string();
        std::string csv = "group,strategy,metric,validity,baseline\n";
        for (const Json& group : result.report.at("groups")) {
            for (const Json& strat : group.at("strategies")) {
                const char* metrics[3] = {"validity_1", "validity_3", "validity_5"};
                for (const char* metric : metrics) {
                    csv += group.at("group").get<std::string>() + "," +
                           strat.at("strategy").get<std::string>() + "," + metric + "," +
                           strat.at("validity").at(metric).dump() + "," +
                           strat.at("baseline").at(metric).dump() + "\n";
                }
            }
        }
        std::ofstream f(csv_path, std::ios::binary | std::ios::trunc);
        f << csv;
        std::printf("wrote %s\n", csv_path.c_str());
    }

    if (result.partial_failure_exceeded) {
        std::fprintf(stderr, "prex: %d of %d entries failed (over the 10%% limit)\n",
                     result.n_failed, result.n_entries);
        return kExitPartialFailure;
    }
    return 0;
}

int cmd_mistakes(const CLI::App* cmd, const CommonFlags& common, const PlanFlags& plan_flags,
                 const std::string& manifest_path, int top_mistakes, int top_m,
                 const std::string& group_by) {
    const Json config = common.load_config();
    prex::CorpusManifest manifest = prex::load_manifest(manifest_path);
    if (config.contains("plan")) manifest.plan = prex::plan_from_json(config.at("plan"), manifest.plan);
    plan_flags.apply(cmd, manifest.plan);
    prex::validate_plan(manifest.plan);
    if (const auto spec = common.resolve_recognizer(cmd, config)) manifest.recognizer = *spec;

    prex::MistakeOptions opts;
    if (cmd->count("--strategy")) opts.strategy = prex::parse_strategy(plan_flags.strategy);
    opts.top_mistakes = top_mistakes;
    opts.top_m = top_m;
    opts.group_by = cmd->count("--group-by") ? group_by : config.value("group_by", group_by);
    opts.jobs = common.jobs;
    opts.lambda = common.resolve_lambda(cmd, config);
    opts.rank_by_absolute = common.rank_by_absolute(cmd, config);
    if (cmd->count("--seed")) opts.seed = manifest.plan.seed;

    const prex::MistakesResult result = prex::run_mistakes(manifest, manifest_path, opts);

    fs::create_directories(common.out_dir);
    const std::string report_path = (fs::path(common.out_dir) / "mistakes.json").string();
    prex::write_json_file(result.report, report_path);
    std::fputs(result.table.c_str(), stdout);
    if (result.wilcoxon) {
        std::printf("wilcoxon (two groups): W=%.1f p=%.4f %s\n", result.wilcoxon->w,
                    result.wilcoxon->p_value,
                    result.wilcoxon->significant_at_5pct ? "significant at 5%"
                                                         : "not significant at 5%");
    }
    std::printf("wrote %s (%d entries, %d failed)\n", report_path.c_str(), result.n_entries,
                result.n_failed);

    if (result.partial_failure_exceeded) {
        std::fprintf(stderr, "prex: %d of %d entries failed (over the 10%% limit)\n",
                     result.n_failed, result.n_entries);
        return kExitPartialFailure;
    }
    return 0;
}

int cmd_synth(const prex::SynthConfig& cfg, const std::string& out_dir) {
    prex::CorpusManifest manifest = prex::synthesize_corpus(cfg, out_dir);
    Json j = prex::manifest_to_json(manifest);
    j["config"] = Json{{"command", "synth"},
                       {"n_clips", cfg.n_clips},
                       {"slots_per_clip", cfg.slots_per_clip},
                       {"slot_ms", cfg.slot_ms},
                       {"vocab_size", cfg.vocab_size},
                       {"contextual", cfg.contextual},
                       {"seed", cfg.seed},
                       {"sample_rate", cfg.sample_rate}};
    const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
    prex::write_json_file(j, manifest_path);
    std::printf("wrote %d clips and %s\n", cfg.n_clips, manifest_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"black-box explanation engine for phoneme recognition"};
    app.require_subcommand(1);

    // explain
    auto* explain = app.add_subcommand("explain", "explain every phoneme of one clip");
    std::string wav_path, phn_path;
    explain->add_option("--wav", wav_path, "input WAV (PCM 16-bit mono)")->required();
    explain->add_option("--phn", phn_path, "expert segment annotation (TIMIT PHN layout)");
    CommonFlags explain_common;
    PlanFlags explain_plan;
    explain_common.attach(explain);
    explain_plan.attach(explain);

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "validity report over an annotated corpus");
    std::string eval_manifest;
    std::vector<std::string> eval_strategies;
    int eval_trials = 10000;
    std::string eval_group_by = "gender";
    bool eval_csv = false;
    evaluate->add_option("--manifest", eval_manifest, "corpus manifest JSON")->required();
    evaluate->add_option("--strategies", eval_strategies, "strategies to compare")
        ->delimiter(',');
    evaluate->add_option("--trials", eval_trials, "random baseline trials");
    evaluate->add_option("--group-by", eval_group_by, "speaker grouping: gender, dialect, speaker");
    evaluate->add_flag("--emit-csv", eval_csv, "also write report.csv");
    CommonFlags eval_common;
    PlanFlags eval_plan;
    eval_common.attach(evaluate);
    eval_plan.attach(evaluate);

    // mistakes (--strategy, from the plan flags, selects the explanation
    // strategy for the top-segment reports; default lime-ws)
    auto* mistakes = app.add_subcommand("mistakes", "mistake frequencies and top segments");
    std::string mist_manifest, mist_group_by = "gender";
    int mist_top_mistakes = 5, mist_top_m = 3;
    mistakes->add_option("--manifest", mist_manifest, "corpus manifest JSON")->required();
    mistakes->add_option("--top-mistakes", mist_top_mistakes, "number of top mistakes to report");
    mistakes->add_option("--top-m", mist_top_m, "segment ranks counted per explanation");
    mistakes->add_option("--group-by", mist_group_by, "speaker grouping: gender, dialect, speaker");
    CommonFlags mist_common;
    PlanFlags mist_plan;
    mist_common.attach(mistakes);
    mist_plan.attach(mistakes);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic oracle corpus");
    prex::SynthConfig synth_cfg;
    std::string synth_out;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--n-clips", synth_cfg.n_clips, "number of clips");
    synth->add_option("--slots", synth_cfg.slots_per_clip, "slots per clip");
    synth->add_option("--slot-ms", synth_cfg.slot_ms, "slot duration in milliseconds");
    synth->add_option("--vocab-size", synth_cfg.vocab_size, "oracle vocabulary size");
    synth->add_flag("--contextual", synth_cfg.contextual, "use the context-dependent oracle");
    synth->add_option("--seed", synth_cfg.seed, "pseudorandom seed");
    synth->add_option("--sample-rate", synth_cfg.sample_rate, "sample rate in Hz");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (app.got_subcommand(explain)) {
            if (explain_common.jobs > 0) prex::set_max_concurrent_processes(explain_common.jobs);
            return cmd_explain(explain, explain_common, explain_plan, wav_path, phn_path);
        }
        if (app.got_subcommand(evaluate)) {
            if (eval_common.jobs > 0) prex::set_max_concurrent_processes(eval_common.jobs);
            return cmd_evaluate(evaluate, eval_common, eval_plan, eval_manifest, eval_strategies,
                                eval_trials, eval_group_by, eval_csv);
        }
        if (app.got_subcommand(mistakes)) {
            if (mist_common.jobs > 0) prex::set_max_concurrent_processes(mist_common.jobs);
            return cmd_mistakes(mistakes, mist_common, mist_plan, mist_manifest,
                                mist_top_mistakes, mist_top_m, mist_group_by);
        }
        if (app.got_subcommand(synth)) {
            return cmd_synth(synth_cfg, synth_out);
        }
    } catch (const prex::RecognizerError& e) {
        std::fprintf(stderr, "prex: recognizer error: %s\n", e.what());
        return kExitRecognizer;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "prex: error: %s\n", e.what());
        return kExitUsage;
    }
    return 0;
}

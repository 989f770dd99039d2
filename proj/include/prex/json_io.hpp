#pragma once

#include <json.hpp>

#include <fstream>
#include <string>
#include <vector>

#include "prex/alignment.hpp"
#include "prex/audio.hpp"
#include "prex/errors.hpp"
#include "prex/evaluation.hpp"
#include "prex/explainer.hpp"
#include "prex/perturbation.hpp"
#include "prex/recognizer.hpp"

namespace prex {

/// Key order is preserved so serialized reports are byte-stable across runs.
using Json = nlohmann::ordered_json;

inline Json plan_to_json(const PerturbationPlan& plan) {
    return Json{{"strategy", strategy_name(plan.strategy)},
                {"n_global", plan.n_global},
                {"mask_prob", plan.mask_prob},
                {"window_k", plan.window_k},
                {"n_per_window", plan.n_per_window},
                {"ts_duration_ms", plan.ts_duration_ms},
                {"seed", plan.seed}};
}

inline PerturbationPlan plan_from_json(const Json& j, PerturbationPlan base = {}) {
    if (!j.is_object()) throw FormatError("plan must be a JSON object");
    if (j.contains("strategy")) base.strategy = parse_strategy(j.at("strategy").get<std::string>());
    base.n_global = j.value("n_global", base.n_global);
    base.mask_prob = j.value("mask_prob", base.mask_prob);
    base.window_k = j.value("window_k", base.window_k);
    base.n_per_window = j.value("n_per_window", base.n_per_window);
    base.ts_duration_ms = j.value("ts_duration_ms", base.ts_duration_ms);
    base.seed = j.value("seed", base.seed);
    validate_plan(base);
    return base;
}

inline Json recognizer_to_json(const RecognizerSpec& spec) {
    return Json{{"kind", recognizer_kind_name(spec.kind)},
                {"command", spec.command},
                {"slot_ms", spec.slot_ms},
                {"vocab", spec.vocab},
                {"silence_threshold", spec.silence_threshold},
                {"timeout_s", spec.timeout_s}};
}

inline RecognizerSpec recognizer_from_json(const Json& j, RecognizerSpec base = {}) {
    if (!j.is_object()) throw FormatError("recognizer must be a JSON object");
    if (j.contains("kind")) base.kind = parse_recognizer_kind(j.at("kind").get<std::string>());
    if (j.contains("command")) base.command = j.at("command").get<std::vector<std::string>>();
    base.slot_ms = j.value("slot_ms", base.slot_ms);
    if (j.contains("vocab")) base.vocab = j.at("vocab").get<std::vector<std::string>>();
    base.silence_threshold = j.value("silence_threshold", base.silence_threshold);
    base.timeout_s = j.value("timeout_s", base.timeout_s);
    validate_recognizer_spec(base);
    return base;
}

inline Json speaker_to_json(const SpeakerInfo& s) {
    Json j = Json::object();
    if (!s.gender.empty()) j["gender"] = s.gender;
    if (!s.dialect.empty()) j["dialect"] = s.dialect;
    if (!s.speaker_id.empty()) j["speaker_id"] = s.speaker_id;
    return j;
}

inline SpeakerInfo speaker_from_json(const Json& j) {
    SpeakerInfo s;
    if (j.is_null()) return s;
    s.gender = j.value("gender", "");
    s.dialect = j.value("dialect", "");
    s.speaker_id = j.value("speaker_id", "");
    return s;
}

inline Json segmentation_to_json(const Segmentation& seg) {
    Json arr = Json::array();
    for (const Segment& s : seg.segments) {
        Json item{{"index", s.index}, {"start", s.start}, {"end", s.end}};
        if (s.label) item["label"] = *s.label;
        arr.push_back(std::move(item));
    }
    return Json{{"kind", seg_kind_name(seg.kind)}, {"segments", std::move(arr)}};
}

inline Json explanation_to_json(const Explanation& e, const Segmentation& seg) {
    Json segments = Json::array();
    for (const Segment& s : seg.segments) {
        Json item{{"index", s.index}, {"start", s.start}, {"end", s.end}};
        if (s.label) item["label"] = *s.label;
        segments.push_back(std::move(item));
    }
    return Json{{"audio_id", e.audio_id},
                {"position", e.position},
                {"phoneme", e.phoneme},
                {"strategy", strategy_name(e.strategy)},
                {"plan", plan_to_json(e.plan)},
                {"lambda", e.lambda},
                {"intercept", e.intercept},
                {"scores", e.scores},
                {"ranking", e.ranking},
                {"segments", std::move(segments)},
                {"confidence_flag", e.degenerate ? "degenerate" : "ok"}};
}

inline Json mistake_key_to_json(const MistakeKey& key) {
    Json j = Json::object();
    j["ref"] = key.ref_label ? Json(*key.ref_label) : Json(nullptr);
    j["hyp"] = key.hyp_label ? Json(*key.hyp_label) : Json(nullptr);
    j["kind"] = op_kind_name(key.kind);
    return j;
}

inline Json mistake_frequencies_to_json(const std::vector<MistakeFrequency>& freqs) {
    Json arr = Json::array();
    for (const MistakeFrequency& f : freqs) {
        Json j = mistake_key_to_json(f.key);
        j["count"] = f.count;
        j["frequency"] = f.frequency;
        arr.push_back(std::move(j));
    }
    return arr;
}

inline Json validity_to_json(const ValiditySummary& v) {
    return Json{{"n", v.n},          {"validity_1", v.v1}, {"validity_3", v.v3},
                {"validity_5", v.v5}, {"n_1", v.n1},        {"n_3", v.n3},
                {"n_5", v.n5}};
}

inline Json baseline_to_json(const BaselineSummary& b) {
    return Json{{"validity_1", b.v1},
                {"validity_3", b.v3},
                {"validity_5", b.v5},
                {"trials", b.trials}};
}

inline Json wilcoxon_to_json(const WilcoxonResult& w) {
    return Json{{"w", w.w},
                {"p_value", w.p_value},
                {"significant_at_5pct", w.significant_at_5pct},
                {"n", w.n},
                {"method", w.exact ? "exact" : "normal_approximation"}};
}

inline Json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open JSON file: " + path);
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

inline void write_json_file(const Json& j, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace prex

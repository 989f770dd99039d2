#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <unistd.h>
#include <vector>

#include "prex/audio.hpp"
#include "prex/errors.hpp"
#include "prex/subprocess.hpp"
#include "prex/transcription.hpp"
#include "prex/wav.hpp"

namespace prex {

enum class RecognizerKind { subprocess, synthetic_local, synthetic_contextual };

inline const char* recognizer_kind_name(RecognizerKind kind) {
    switch (kind) {
        case RecognizerKind::subprocess: return "subprocess";
        case RecognizerKind::synthetic_local: return "synthetic_local";
        case RecognizerKind::synthetic_contextual: return "synthetic_contextual";
    }
    return "?";
}

inline RecognizerKind parse_recognizer_kind(const std::string& name) {
    if (name == "subprocess") return RecognizerKind::subprocess;
    if (name == "synthetic_local") return RecognizerKind::synthetic_local;
    if (name == "synthetic_contextual") return RecognizerKind::synthetic_contextual;
    throw InvalidArgument("unknown recognizer kind: " + name);
}

/// The black-box boundary. Subprocess recognizers wrap real systems behind an
/// argv contract; the synthetic kinds are deterministic oracles whose
/// ground-truth behaviour is known exactly.
struct RecognizerSpec {
    RecognizerKind kind = RecognizerKind::synthetic_local;
    std::vector<std::string> command;  // subprocess: executable + fixed args
    int slot_ms = 70;                  // synthetic: hidden slot duration
    std::vector<std::string> vocab;    // synthetic: phoneme label table
    double silence_threshold = 50.0;   // synthetic: mean-abs amplitude floor
    double timeout_s = 60.0;           // subprocess only
};

inline void validate_recognizer_spec(const RecognizerSpec& spec) {
    if (spec.kind == RecognizerKind::subprocess) {
        if (spec.command.empty()) {
            throw InvalidArgument("subprocess recognizer requires a non-empty command");
        }
        return;
    }
    if (spec.vocab.empty()) {
        throw InvalidArgument("synthetic recognizer requires a non-empty vocab");
    }
    for (const std::string& v : spec.vocab) {
        if (!valid_phoneme_token(v)) {
            throw InvalidArgument("invalid vocab entry: '" + v + "'");
        }
    }
    if (spec.slot_ms <= 0) throw InvalidArgument("slot_ms must be positive");
}

namespace detail {

/// Per-slot raw amplitude index: nullopt for silent slots, otherwise
/// clamp(round(mean_abs / 1000) - 1, 0, |vocab|-1). Slots are anchored at
/// sample 0 like time_segmentation; a final shorter remainder slot counts.
inline std::vector<std::optional<int>> slot_ids(const RecognizerSpec& spec, const AudioClip& clip) {
    const std::int64_t slot_len =
        static_cast<std::int64_t>(clip.sample_rate) * spec.slot_ms / 1000;
    if (slot_len < 1) throw InvalidArgument("slot duration shorter than one sample period");
    const int vocab_size = static_cast<int>(spec.vocab.size());

    std::vector<std::optional<int>> ids;
    const std::int64_t n = static_cast<std::int64_t>(clip.samples.size());
    for (std::int64_t start = 0; start < n; start += slot_len) {
        const std::int64_t end = std::min(start + slot_len, n);
        std::int64_t sum_abs = 0;
        for (std::int64_t i = start; i < end; ++i) {
            sum_abs += std::abs(static_cast<std::int32_t>(clip.samples[i]));
        }
        const double mean = static_cast<double>(sum_abs) / static_cast<double>(end - start);
        if (mean < spec.silence_threshold) {
            ids.push_back(std::nullopt);
        } else {
            int id = static_cast<int>(std::llround(mean / 1000.0)) - 1;
            id = std::max(0, std::min(id, vocab_size - 1));
            ids.push_back(id);
        }
    }
    return ids;
}

}  // namespace detail

/// Strictly local oracle: each slot's output depends on that slot alone.
inline Transcription synthetic_local_decode(const RecognizerSpec& spec, const AudioClip& clip) {
    validate_recognizer_spec(spec);
    Transcription out;
    for (const auto& id : detail::slot_ids(spec, clip)) {
        if (id) out.push_back(spec.vocab[*id]);
    }
    return out;
}

/// Context-dependent oracle: slot i emits vocab[(id_i + id_{i-1}) mod V],
/// with id_{-1} = 0. A silent slot emits nothing and contributes id 0 to its
/// successor, so masking a slot perturbs the next slot's label too.
inline Transcription synthetic_contextual_decode(const RecognizerSpec& spec,
                                                 const AudioClip& clip) {
    validate_recognizer_spec(spec);
    const int vocab_size = static_cast<int>(spec.vocab.size());
    Transcription out;
    int prev = 0;
    for (const auto& id : detail::slot_ids(spec, clip)) {
        if (!id) {
            prev = 0;
            continue;
        }
        out.push_back(spec.vocab[(*id + prev) % vocab_size]);
        prev = *id;
    }
    return out;
}

namespace detail {

/// Removes the adapter's temporary WAV file no matter how the call exits.
struct TempFileGuard {
    std::string path;
    ~TempFileGuard() {
        if (!path.empty()) {
            std::error_code ec;
            std::filesystem::remove(path, ec);
        }
    }
};

inline std::string make_temp_wav_path() {
    const std::filesystem::path dir = std::filesystem::temp_directory_path();
    std::string tmpl = (dir / "prex_XXXXXX.wav").string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    const int fd = ::mkstemps(buf.data(), 4);
    if (fd < 0) throw IoError("cannot create temporary WAV file in " + dir.string());
    ::close(fd);
    return std::string(buf.data());
}

}  // namespace detail

/// Adapter contract: `<command...> <wav-path>` -> whitespace-separated
/// phoneme tokens on stdout, exit 0. Empty stdout with exit 0 is a valid
/// empty transcription (heavily masked mutants legitimately say nothing).
inline Transcription subprocess_transcribe(const RecognizerSpec& spec, const AudioClip& clip) {
    validate_recognizer_spec(spec);
    detail::TempFileGuard tmp{detail::make_temp_wav_path()};
    write_wav(clip, tmp.path);

    std::vector<std::string> argv = spec.command;
    argv.push_back(tmp.path);
    const ProcessResult res = run_process(argv, spec.timeout_s);

    if (res.timed_out) {
        throw RecognizerError("recognizer timed out after " + std::to_string(spec.timeout_s) +
                                  "s: " + spec.command.front(),
                              -1, res.err, true);
    }
    if (res.exit_code != 0) {
        throw RecognizerError("recognizer exited with code " + std::to_string(res.exit_code) +
                                  ": " + spec.command.front() +
                                  (res.err.empty() ? "" : "\nstderr: " + res.err),
                              res.exit_code, res.err);
    }
    return split_tokens(res.out);
}

/// Dispatch on the spec's kind. Synthetic kinds are pure and deterministic;
/// the subprocess adapter is safe to call from many workers concurrently.
inline Transcription transcribe(const RecognizerSpec& spec, const AudioClip& clip) {
    switch (spec.kind) {
        case RecognizerKind::subprocess: return subprocess_transcribe(spec, clip);
        case RecognizerKind::synthetic_local: return synthetic_local_decode(spec, clip);
        case RecognizerKind::synthetic_contextual: return synthetic_contextual_decode(spec, clip);
    }
    throw InvalidArgument("unknown recognizer kind");
}

/// Callable recognizer abstraction used by the explanation pipeline; lets
/// tests wrap counting or constant recognizers around the real thing.
using RecognizerFn = std::function<Transcription(const AudioClip&)>;

inline RecognizerFn make_recognizer(const RecognizerSpec& spec) {
    validate_recognizer_spec(spec);
    return [spec](const AudioClip& clip) { return transcribe(spec, clip); };
}

}  // namespace prex

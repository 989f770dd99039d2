#pragma once

#include <cctype>
#include <sstream>
#include <string>
#include <vector>

#include "prex/errors.hpp"

namespace prex {

/// Ordered phoneme label sequence, the recognizer's output.
using Transcription = std::vector<std::string>;

inline bool valid_phoneme_token(const std::string& token) {
    if (token.empty()) return false;
    for (char c : token) {
        if (std::isspace(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

/// Splits recognizer stdout on whitespace into phoneme tokens.
inline Transcription split_tokens(const std::string& text) {
    Transcription out;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

inline std::string join_tokens(const Transcription& t) {
    std::string out;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (i > 0) out += ' ';
        out += t[i];
    }
    return out;
}

}  // namespace prex

#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "prex/audio.hpp"
#include "prex/errors.hpp"

namespace prex {

namespace detail {

inline bool parse_sample_offset(const std::string& token, std::int64_t& out) {
    if (token.empty()) return false;
    for (char c : token) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    }
    try {
        out = std::stoll(token);
    } catch (const std::exception&) {
        return false;
    }
    return true;
}

}  // namespace detail

/// Parses phoneme annotation text: one "start end label" triple per line,
/// offsets in sample units, LF or CRLF line endings. Labels are kept
/// verbatim. `origin` is used in error messages only.
inline Segmentation parse_phn_text(const std::string& text, const std::string& origin) {
    std::vector<Segment> segs;
    std::istringstream lines(text);
    std::string line;
    int line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream fields(line);
        std::string start_tok, end_tok, label, extra;
        if (!(fields >> start_tok)) continue;  // blank line
        if (!(fields >> end_tok >> label) || (fields >> extra)) {
            throw ParseError(origin + ":" + std::to_string(line_no) +
                             ": expected 'start end label'");
        }
        std::int64_t start = 0, end = 0;
        if (!detail::parse_sample_offset(start_tok, start) ||
            !detail::parse_sample_offset(end_tok, end)) {
            throw ParseError(origin + ":" + std::to_string(line_no) +
                             ": offsets must be non-negative integers");
        }
        segs.push_back(Segment{0, start, end, label});
    }
    try {
        return make_segmentation(SegKind::expert, std::move(segs));
    } catch (const InvalidArgument& e) {
        throw ParseError(origin + ": " + e.what());
    }
}

inline Segmentation parse_phn(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open PHN file: " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_phn_text(text.str(), path);
}

/// Serializes an expert segmentation back to PHN text. parse_phn_text of the
/// result reproduces every numeric field exactly.
inline std::string format_phn(const Segmentation& seg) {
    std::string out;
    for (const Segment& s : seg.segments) {
        if (!s.label) {
            throw InvalidArgument("cannot serialize unlabeled segment " + std::to_string(s.index));
        }
        out += std::to_string(s.start) + " " + std::to_string(s.end) + " " + *s.label + "\n";
    }
    return out;
}

inline void write_phn(const Segmentation& seg, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    const std::string text = format_phn(seg);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw IoError("write failed: " + path);
}

}  // namespace prex

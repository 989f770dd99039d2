#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "prex/audio.hpp"
#include "prex/errors.hpp"

namespace prex {

namespace detail {

inline std::uint16_t read_u16le(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t read_u32le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_u16le(std::vector<unsigned char>& out, std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xFF));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
}

inline void put_u32le(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xFF));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
    out.push_back(static_cast<unsigned char>((v >> 16) & 0xFF));
    out.push_back(static_cast<unsigned char>((v >> 24) & 0xFF));
}

}  // namespace detail

/// Reads a RIFF/WAVE file. Only PCM (format 1), mono, 16-bit audio is
/// accepted; anything else is rejected naming the offending header field so
/// recognizer inputs stay bit-reproducible. The clip id is the file stem.
inline AudioClip read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open WAV file: " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
        std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
        throw FormatError("not a RIFF/WAVE file: " + path);
    }

    bool have_fmt = false, have_data = false;
    std::uint16_t format_code = 0, channels = 0, bits = 0;
    std::uint32_t sample_rate = 0;
    std::size_t data_off = 0, data_len = 0;

    std::size_t off = 12;
    while (off + 8 <= buf.size()) {
        char chunk_id[5] = {0};
        std::memcpy(chunk_id, buf.data() + off, 4);
        const std::uint32_t chunk_size = detail::read_u32le(buf.data() + off + 4);
        off += 8;
        if (off + chunk_size > buf.size()) {
            throw FormatError(std::string("truncated '") + chunk_id + "' chunk: " + path);
        }
        if (std::memcmp(chunk_id, "fmt ", 4) == 0) {
            if (chunk_size < 16) throw FormatError("fmt chunk too small: " + path);
            format_code = detail::read_u16le(buf.data() + off);
            channels = detail::read_u16le(buf.data() + off + 2);
            sample_rate = detail::read_u32le(buf.data() + off + 4);
            bits = detail::read_u16le(buf.data() + off + 14);
            have_fmt = true;
        } else if (std::memcmp(chunk_id, "data", 4) == 0) {
            data_off = off;
            data_len = chunk_size;
            have_data = true;
        }
        off += chunk_size + (chunk_size & 1);  // chunks are word-aligned
    }

    if (!have_fmt) throw FormatError("missing fmt chunk: " + path);
    if (format_code != 1) {
        throw FormatError("format=" + std::to_string(format_code) +
                          " unsupported (PCM required): " + path);
    }
    if (channels != 1) {
        throw FormatError("channels=" + std::to_string(channels) + " unsupported: " + path);
    }
    if (bits != 16) {
        throw FormatError("bits=" + std::to_string(bits) + " unsupported: " + path);
    }
    if (sample_rate == 0) throw FormatError("sample_rate=0 invalid: " + path);
    if (!have_data) throw FormatError("missing data chunk: " + path);
    if (data_len % 2 != 0) throw FormatError("odd data chunk size: " + path);

    AudioClip clip;
    clip.sample_rate = static_cast<int>(sample_rate);
    clip.id = std::filesystem::path(path).stem().string();
    clip.samples.resize(data_len / 2);
    for (std::size_t i = 0; i < clip.samples.size(); ++i) {
        clip.samples[i] =
            static_cast<std::int16_t>(detail::read_u16le(buf.data() + data_off + 2 * i));
    }
    return clip;
}

/// Writes a canonical 44-byte-header PCM 16-bit mono WAV file.
/// read_wav(write_wav(clip)) reproduces the samples bit-identically.
inline void write_wav(const AudioClip& clip, const std::string& path) {
    if (clip.sample_rate <= 0) throw InvalidArgument("sample_rate must be positive");
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);

    std::vector<unsigned char> out;
    out.reserve(44 + data_bytes);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    detail::put_u32le(out, 36 + data_bytes);
    out.insert(out.end(), {'W', 'A', 'V', 'E'});
    out.insert(out.end(), {'f', 'm', 't', ' '});
    detail::put_u32le(out, 16);
    detail::put_u16le(out, 1);  // PCM
    detail::put_u16le(out, 1);  // mono
    detail::put_u32le(out, static_cast<std::uint32_t>(clip.sample_rate));
    detail::put_u32le(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);  // byte rate
    detail::put_u16le(out, 2);   // block align
    detail::put_u16le(out, 16);  // bits per sample
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    detail::put_u32le(out, data_bytes);
    for (std::int16_t s : clip.samples) {
        const std::uint16_t u = static_cast<std::uint16_t>(s);
        out.push_back(static_cast<unsigned char>(u & 0xFF));
        out.push_back(static_cast<unsigned char>((u >> 8) & 0xFF));
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write failed: " + path);
}

}  // namespace prex

#pragma once

// Raw float32 stack rasters with a text sidecar header, 8-bit previews,
// and the plain-text scene description read by the simulator.
//
// A stack stored at base path B is two files:
//   B.hdr   text header:
//             PATFSTACK 1
//             width = W
//             height = H
//             dates = M
//             looks = L_0 ... L_{M-1}
//             byte_order = little
//             data_type = float32
//   B.raw   4*M*H*W bytes, little-endian IEEE float32, date-major then row-major.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "patf/error.hpp"
#include "patf/image.hpp"
#include "patf/keyvalue.hpp"
#include "patf/residual.hpp"
#include "patf/speckle.hpp"

namespace patf {

inline constexpr const char* kStackMagic = "PATFSTACK 1";

struct StackPaths {
    std::filesystem::path header;
    std::filesystem::path payload;
};

/// Accepts the base path or either of the two file names.
inline StackPaths stack_paths(const std::filesystem::path& path) {
    std::filesystem::path base = path;
    if (base.extension() == ".hdr" || base.extension() == ".raw") {
        base.replace_extension();
    }
    return {std::filesystem::path(base.string() + ".hdr"), std::filesystem::path(base.string() + ".raw")};
}

namespace detail {

inline std::uint32_t to_little(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
    }
    return v;
}

} // namespace detail

/// Values are stored as float32; anything not representable is rounded.
inline void write_stack(const ImageStack& stack, const std::filesystem::path& path) {
    validate(stack);
    const auto paths = stack_paths(path);
    {
        std::ofstream hdr(paths.header);
        require(static_cast<bool>(hdr), ErrorCode::io_failure, "cannot write " + paths.header.string());
        hdr << kStackMagic << '\n'
            << "width = " << stack.cols() << '\n'
            << "height = " << stack.rows() << '\n'
            << "dates = " << stack.dates() << '\n'
            << "looks =";
        for (double l : stack.looks) {
            hdr << ' ' << format_exact(l);
        }
        hdr << '\n' << "byte_order = little\n" << "data_type = float32\n";
        require(static_cast<bool>(hdr), ErrorCode::io_failure, "cannot write " + paths.header.string());
    }
    std::ofstream raw(paths.payload, std::ios::binary);
    require(static_cast<bool>(raw), ErrorCode::io_failure, "cannot write " + paths.payload.string());
    std::vector<std::uint32_t> buffer;
    for (const auto& frame : stack.frames) {
        buffer.resize(frame.size());
        auto v = frame.values();
        for (std::size_t i = 0; i < v.size(); ++i) {
            buffer[i] = detail::to_little(std::bit_cast<std::uint32_t>(static_cast<float>(v[i])));
        }
        raw.write(reinterpret_cast<const char*>(buffer.data()),
                  static_cast<std::streamsize>(buffer.size() * sizeof(std::uint32_t)));
    }
    require(static_cast<bool>(raw), ErrorCode::io_failure, "cannot write " + paths.payload.string());
}

struct StackHeader {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t dates = 0;
    std::vector<double> looks;
};

inline StackHeader read_stack_header(const std::filesystem::path& header_path) {
    std::ifstream in(header_path);
    require(static_cast<bool>(in), ErrorCode::io_failure, "cannot open " + header_path.string());
    std::string first;
    while (std::getline(in, first) && trim(first).empty()) {
    }
    require(trim(first) == kStackMagic, ErrorCode::bad_magic,
            header_path.string() + ": expected '" + kStackMagic + "' on the first line");
    const auto kv = parse_key_values(in, ErrorCode::malformed_header);
    StackHeader h;
    bool seen_w = false, seen_h = false, seen_m = false, seen_l = false, seen_bo = false, seen_dt = false;
    constexpr auto bad = ErrorCode::malformed_header;
    for (const auto& [key, value] : kv) {
        if (key == "width") {
            h.width = parse_number<std::size_t>(value, "width", bad);
            seen_w = true;
        } else if (key == "height") {
            h.height = parse_number<std::size_t>(value, "height", bad);
            seen_h = true;
        } else if (key == "dates") {
            h.dates = parse_number<std::size_t>(value, "dates", bad);
            seen_m = true;
        } else if (key == "looks") {
            h.looks.clear();
            for (const auto& word : split_words(value)) {
                h.looks.push_back(parse_number<double>(word, "looks", bad));
            }
            seen_l = true;
        } else if (key == "byte_order") {
            require(value == "little", bad, "unsupported byte order '" + value + "'");
            seen_bo = true;
        } else if (key == "data_type") {
            require(value == "float32", bad, "unsupported data type '" + value + "'");
            seen_dt = true;
        } else {
            throw Error(bad, header_path.string() + ": unknown header key '" + key + "'");
        }
    }
    require(seen_w && seen_h && seen_m && seen_l && seen_bo && seen_dt, bad,
            header_path.string() + ": header is missing a required key");
    require(h.width > 0 && h.height > 0 && h.dates > 0, bad, "header dimensions must be positive");
    for (double l : h.looks) {
        require(l > 0.0 && std::isfinite(l), bad, "looks must be positive");
    }
    require(h.looks.size() == h.dates, ErrorCode::dimension_mismatch,
            "header lists " + std::to_string(h.looks.size()) + " looks values for " + std::to_string(h.dates) +
                " dates");
    return h;
}

inline ImageStack read_stack(const std::filesystem::path& path) {
    const auto paths = stack_paths(path);
    const auto h = read_stack_header(paths.header);
    std::ifstream raw(paths.payload, std::ios::binary | std::ios::ate);
    require(static_cast<bool>(raw), ErrorCode::io_failure, "cannot open " + paths.payload.string());
    const auto actual = static_cast<std::uintmax_t>(raw.tellg());
    const std::uintmax_t frame_bytes = 4ull * h.width * h.height;
    const std::uintmax_t expected = frame_bytes * h.dates;
    if (actual != expected) {
        if (actual > expected || actual % frame_bytes == 0) {
            throw Error(ErrorCode::dimension_mismatch,
                        "header declares " + std::to_string(h.dates) + " dates of " + std::to_string(h.height) +
                            "x" + std::to_string(h.width) + " but the payload holds " +
                            std::to_string(actual / frame_bytes) + " whole dates (" + std::to_string(actual) +
                            " bytes, expected " + std::to_string(expected) + ")");
        }
        throw Error(ErrorCode::truncated_payload, "payload " + paths.payload.string() + " is truncated: expected " +
                                                      std::to_string(expected) + " bytes, found " +
                                                      std::to_string(actual));
    }
    raw.seekg(0);
    ImageStack stack;
    stack.looks = h.looks;
    std::vector<std::uint32_t> buffer(h.width * h.height);
    for (std::size_t t = 0; t < h.dates; ++t) {
        raw.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(frame_bytes));
        require(static_cast<bool>(raw), ErrorCode::io_failure, "read failed on " + paths.payload.string());
        Image frame(h.height, h.width);
        auto v = frame.values();
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = static_cast<double>(std::bit_cast<float>(detail::to_little(buffer[i])));
        }
        stack.frames.push_back(std::move(frame));
    }
    validate(stack);
    return stack;
}

// ---------------------------------------------------------------------------
// Previews

enum class GrayScaling { linear, log, quantile };

inline GrayScaling parse_scaling(std::string_view name) {
    if (name == "linear") return GrayScaling::linear;
    if (name == "log") return GrayScaling::log;
    if (name == "quantile") return GrayScaling::quantile;
    throw Error(ErrorCode::invalid_parameter, "unknown scaling '" + std::string(name) + "'");
}

inline std::string_view to_string(GrayScaling s) {
    switch (s) {
    case GrayScaling::linear: return "linear";
    case GrayScaling::log: return "log";
    case GrayScaling::quantile: return "quantile";
    }
    return "unknown";
}

/// Maps an image to 8 bits. linear: [min, max]; log: the same on log
/// intensities (zeros raised to the smallest positive value); quantile:
/// [1st, 99th] percentile with clipping. A flat range maps to 128.
inline std::vector<std::uint8_t> to_gray(const Image& img, GrayScaling scaling) {
    std::vector<double> v(img.values().begin(), img.values().end());
    for (double x : v) {
        require(std::isfinite(x), ErrorCode::invalid_input, "preview needs a finite image");
    }
    if (scaling == GrayScaling::log) {
        double smallest = INFINITY;
        for (double x : v) {
            if (x > 0.0) {
                smallest = std::min(smallest, x);
            }
        }
        if (!std::isfinite(smallest)) {
            smallest = 1.0;
        }
        for (double& x : v) {
            x = std::log(std::max(x, smallest));
        }
    }
    double lo = 0.0;
    double hi = 0.0;
    if (scaling == GrayScaling::quantile) {
        std::vector<double> sorted(v);
        std::sort(sorted.begin(), sorted.end());
        auto at = [&](double q) {
            const double pos = q * static_cast<double>(sorted.size() - 1);
            const auto k = static_cast<std::size_t>(std::floor(pos));
            const double f = pos - static_cast<double>(k);
            return k + 1 < sorted.size() ? sorted[k] + f * (sorted[k + 1] - sorted[k]) : sorted[k];
        };
        lo = at(0.01);
        hi = at(0.99);
    } else {
        const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
        lo = *mn;
        hi = *mx;
    }
    std::vector<std::uint8_t> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(hi > lo)) {
            out[i] = 128;
            continue;
        }
        const double x = std::clamp((v[i] - lo) / (hi - lo), 0.0, 1.0);
        out[i] = static_cast<std::uint8_t>(std::lround(255.0 * x));
    }
    return out;
}

inline void export_pgm(const Image& img, const std::filesystem::path& path, GrayScaling scaling) {
    const auto gray = to_gray(img, scaling);
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::io_failure, "cannot write " + path.string());
    out << "P5\n# scaling: " << to_string(scaling) << '\n'
        << img.cols() << ' ' << img.rows() << "\n255\n";
    out.write(reinterpret_cast<const char*>(gray.data()), static_cast<std::streamsize>(gray.size()));
    require(static_cast<bool>(out), ErrorCode::io_failure, "cannot write " + path.string());
}

/// Four-class color rendering of a quality map (blue, green, yellow, red for
/// increasing residual); pixels with no defined patch are black.
inline void export_quality_ppm(const QualityMap& q, const std::filesystem::path& path) {
    static constexpr std::uint8_t palette[4][3] = {{0, 0, 255}, {0, 200, 0}, {255, 220, 0}, {255, 0, 0}};
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::io_failure, "cannot write " + path.string());
    out << "P6\n# residual classes: [0,1) [1,2) [2,3) [3,inf)\n"
        << q.map.cols() << ' ' << q.map.rows() << "\n255\n";
    std::vector<std::uint8_t> rgb(q.map.size() * 3, 0);
    for (std::size_t i = 0; i < q.map.size(); ++i) {
        if (q.defined[i]) {
            const auto* c = palette[quality_class(q.map.values()[i])];
            std::memcpy(&rgb[i * 3], c, 3);
        }
    }
    out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    require(static_cast<bool>(out), ErrorCode::io_failure, "cannot write " + path.string());
}

// ---------------------------------------------------------------------------
// Scene description
//
//   rows = 256
//   cols = 256
//   background = constant <u>
//   background = mosaic <cells> <low> <high> <seed>
//   texture = <looks> <smooth_half> <seed>             (optional)
//   targets = <count> <level> <seed>                  (optional, repeatable)
//   region = <row> <col> <height> <width> <profile>   (repeatable)
//
// with <profile> one of
//   constant <u>
//   step <u0> <u1> <onset>
//   impulse <u0> <u1> <onset> <end>
//   cycle <u0> <amplitude> <period> <phase>
//   complex <start> <profile> ; <start> <profile> ; ...

namespace detail {

inline ChangeProfile parse_simple_profile(const std::vector<std::string>& w, std::size_t at) {
    const auto& kind = w.at(at);
    auto num = [&](std::size_t k) { return parse_number<double>(w.at(at + k), kind); };
    auto integer = [&](std::size_t k) { return parse_number<int>(w.at(at + k), kind); };
    auto arity = [&](std::size_t n) {
        require(w.size() == at + 1 + n, ErrorCode::parse_error,
                "profile '" + kind + "' takes " + std::to_string(n) + " parameters");
    };
    if (kind == "constant") {
        arity(1);
        return ChangeProfile::constant(num(1));
    }
    if (kind == "step") {
        arity(3);
        return ChangeProfile::step(num(1), num(2), integer(3));
    }
    if (kind == "impulse") {
        arity(4);
        return ChangeProfile::impulse(num(1), num(2), integer(3), integer(4));
    }
    if (kind == "cycle") {
        arity(4);
        return ChangeProfile::cycle(num(1), num(2), num(3), num(4));
    }
    throw Error(ErrorCode::parse_error, "unknown profile kind '" + kind + "'");
}

inline ChangeProfile parse_profile(std::string_view text) {
    const auto words = split_words(text);
    require(!words.empty(), ErrorCode::parse_error, "empty profile");
    if (words.front() != "complex") {
        return parse_simple_profile(words, 0);
    }
    std::vector<ProfileSegment> segments;
    std::string_view rest = text.substr(text.find("complex") + 7);
    while (!trim(rest).empty()) {
        const auto semi = rest.find(';');
        const auto part = split_words(rest.substr(0, semi));
        require(part.size() >= 2, ErrorCode::parse_error, "complex segment needs '<start> <profile>'");
        segments.push_back({parse_number<int>(part.front(), "segment start"), parse_simple_profile(part, 1)});
        rest = semi == std::string_view::npos ? std::string_view{} : rest.substr(semi + 1);
    }
    return ChangeProfile::complex(std::move(segments));
}

} // namespace detail

inline SceneSpec parse_scene(std::istream& in) {
    const auto kv = parse_key_values(in);
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::string> background;
    std::vector<std::string> texture;
    std::vector<std::vector<std::string>> targets;
    std::vector<std::string> regions;
    for (const auto& [key, value] : kv) {
        if (key == "rows") {
            rows = parse_number<std::size_t>(value, "rows");
        } else if (key == "cols") {
            cols = parse_number<std::size_t>(value, "cols");
        } else if (key == "background") {
            require(background.empty(), ErrorCode::parse_error, "background given twice");
            background = split_words(value);
        } else if (key == "texture") {
            require(texture.empty(), ErrorCode::parse_error, "texture given twice");
            texture = split_words(value);
            require(texture.size() == 3, ErrorCode::parse_error, "texture needs '<looks> <smooth_half> <seed>'");
        } else if (key == "targets") {
            targets.push_back(split_words(value));
        } else if (key == "region") {
            regions.push_back(value);
        } else {
            throw Error(ErrorCode::parse_error, "unknown scene key '" + key + "'");
        }
    }
    require(rows > 0 && cols > 0, ErrorCode::parse_error, "scene needs positive rows and cols");
    require(!background.empty(), ErrorCode::parse_error, "scene needs a background");
    SceneSpec spec;
    if (background[0] == "constant" && background.size() == 2) {
        spec.background = constant_background(rows, cols, parse_number<double>(background[1], "background"));
    } else if (background[0] == "mosaic" && background.size() == 5) {
        spec.background = mosaic_background(rows, cols, parse_number<std::size_t>(background[1], "cells"),
                                            parse_number<double>(background[2], "low"),
                                            parse_number<double>(background[3], "high"),
                                            parse_number<std::uint64_t>(background[4], "seed"));
    } else {
        throw Error(ErrorCode::parse_error,
                    "background must be 'constant <u>' or 'mosaic <cells> <low> <high> <seed>'");
    }
    if (!texture.empty()) {
        apply_texture(spec.background, parse_number<double>(texture[0], "texture looks"),
                      parse_number<std::size_t>(texture[1], "smooth_half"),
                      parse_number<std::uint64_t>(texture[2], "seed"));
    }
    for (const auto& t : targets) {
        require(t.size() == 3, ErrorCode::parse_error, "targets needs '<count> <level> <seed>'");
        add_point_targets(spec.background, parse_number<std::size_t>(t[0], "count"),
                          parse_number<double>(t[1], "level"), parse_number<std::uint64_t>(t[2], "seed"));
    }
    for (const auto& text : regions) {
        const auto words = split_words(text);
        require(words.size() >= 5, ErrorCode::parse_error, "region needs '<row> <col> <height> <width> <profile>'");
        Rect rect{parse_number<std::size_t>(words[0], "row"), parse_number<std::size_t>(words[1], "col"),
                  parse_number<std::size_t>(words[2], "height"), parse_number<std::size_t>(words[3], "width")};
        // The profile is everything after the fourth word.
        std::string_view rest = text;
        for (int k = 0; k < 4; ++k) {
            rest = trim(rest);
            rest = rest.substr(std::min(rest.size(), rest.find_first_of(" \t")));
        }
        spec.regions.push_back({rect, detail::parse_profile(trim(rest))});
    }
    validate(spec);
    return spec;
}

inline SceneSpec load_scene(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::io_failure, "cannot open " + path.string());
    return parse_scene(in);
}

} // namespace patf

#pragma once

// Flat "key = value" text documents, shared by the raster header, the
// calibration cache, scene files and metric reports.

#include <charconv>
#include <cstdio>
#include <istream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "patf/error.hpp"

namespace patf {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

/// Blank lines and lines starting with '#' are skipped. Keys may repeat.
inline KeyValues parse_key_values(std::istream& in, ErrorCode on_error = ErrorCode::parse_error) {
    KeyValues out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto body = trim(line);
        if (body.empty() || body.front() == '#') {
            continue;
        }
        const auto eq = body.find('=');
        require(eq != std::string_view::npos, on_error,
                "line " + std::to_string(number) + ": expected 'key = value'");
        const auto key = trim(body.substr(0, eq));
        require(!key.empty(), on_error, "line " + std::to_string(number) + ": empty key");
        out.emplace_back(std::string(key), std::string(trim(body.substr(eq + 1))));
    }
    return out;
}

inline std::vector<std::string> split_words(std::string_view s) {
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) {
            ++i;
        }
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') {
            ++j;
        }
        if (j > i) {
            words.emplace_back(s.substr(i, j - i));
        }
        i = j;
    }
    return words;
}

template <typename T>
T parse_number(std::string_view text, std::string_view what, ErrorCode code = ErrorCode::parse_error) {
    T value{};
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    require(ec == std::errc() && ptr == last, code,
            "cannot parse " + std::string(what) + " from '" + std::string(text) + "'");
    return value;
}

/// Shortest text that reads back to the same double.
inline std::string format_exact(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

/// Six significant digits, used for every printed numeric result.
inline std::string format_g6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

} // namespace patf

#pragma once

// Monte-Carlo calibration of the PATF thresholds (tau1, tau2) and the
// smoothing parameter h under the no-change hypothesis, plus a small
// on-disk cache keyed by everything the H0 distribution depends on.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "patf/error.hpp"
#include "patf/image.hpp"
#include "patf/keyvalue.hpp"
#include "patf/similarity.hpp"
#include "patf/speckle.hpp"

namespace patf {

inline constexpr std::size_t kMinCalibrationSamples = 100'000;

struct CalibrationOptions {
    std::size_t samples = 1'000'000;
    std::uint64_t seed = 0;
    double reflectivity = 1.0;  // common u of both patches; d1 does not depend on it
    unsigned threads = default_threads();
};

/// Empirical quantile with linear interpolation between order statistics.
/// Reorders `values`.
inline double empirical_quantile(std::vector<double>& values, double alpha) {
    require(!values.empty(), ErrorCode::invalid_input, "quantile of an empty sample");
    const double pos = alpha * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(lo);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
    const double a = values[lo];
    if (frac == 0.0 || lo + 1 >= values.size()) {
        return a;
    }
    const double b = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
    return a + frac * (b - a);
}

/// d1 of `samples` independent pure-speckle patch pairs with a common
/// reflectivity. Block b draws from stream b, so the sample is the same for
/// any worker count.
inline std::vector<double> sample_h0_dissimilarities(const SimilarityParams& params,
                                                     const CalibrationOptions& options) {
    validate(params);
    require(options.reflectivity > 0.0, ErrorCode::invalid_parameter, "reflectivity must be positive");
    constexpr std::size_t block = 4096;
    const std::size_t n_pix = params.patch_size() * params.patch_size();
    const std::size_t blocks = (options.samples + block - 1) / block;
    const double scale = 2.0 * params.looks - 1.0;
    std::vector<double> out(options.samples);
    parallel_for(blocks, options.threads, [&](std::size_t b) {
        auto engine = make_engine(options.seed, 0xca1b0000ULL + b);
        std::gamma_distribution<double> gamma(params.looks, options.reflectivity / params.looks);
        const std::size_t end = std::min(options.samples, (b + 1) * block);
        for (std::size_t i = b * block; i < end; ++i) {
            double acc = 0.0;
            for (std::size_t k = 0; k < n_pix; ++k) {
                const double y1 = gamma(engine);
                const double y2 = gamma(engine);
                acc += patch_term(y1, y2);
            }
            out[i] = scale * acc;
        }
    });
    return out;
}

/// Fills tau1 = F^-1(alpha_low), tau2 = F^-1(alpha_high) and
/// h = F^-1(alpha_h) - E[d1] from the empirical H0 distribution of d1.
inline SimilarityParams calibrate(SimilarityParams params, const CalibrationOptions& options) {
    validate(params);
    require(options.samples >= kMinCalibrationSamples, ErrorCode::calibration_uncertainty,
            "calibration needs at least " + std::to_string(kMinCalibrationSamples) +
                " Monte-Carlo samples, got " + std::to_string(options.samples));
    auto d1 = sample_h0_dissimilarities(params, options);
    double acc = 0.0;
    for (double v : d1) {
        acc += v;
    }
    const double h0_mean = acc / static_cast<double>(d1.size());
    params.tau1 = empirical_quantile(d1, params.alpha_low);
    params.tau2 = empirical_quantile(d1, params.alpha_high);
    params.h = empirical_quantile(d1, params.alpha_h) - h0_mean;
    require(params.h > 0.0, ErrorCode::calibration_uncertainty,
            "alpha_h quantile does not exceed the H0 mean; h would be non-positive");
    return params;
}

// ---------------------------------------------------------------------------
// Cache

inline std::filesystem::path default_cache_dir() {
    if (const char* dir = std::getenv("PATF_CACHE_DIR"); dir != nullptr && *dir != '\0') {
        return dir;
    }
    if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg != nullptr && *xdg != '\0') {
        return std::filesystem::path(xdg) / "patf";
    }
    if (const char* home = std::getenv("HOME"); home != nullptr && *home != '\0') {
        return std::filesystem::path(home) / ".cache" / "patf";
    }
    return ".patf-cache";
}

inline std::string calibration_cache_name(const SimilarityParams& p, const CalibrationOptions& o) {
    return "calibration_L" + format_exact(p.looks) + "_N" + std::to_string(p.patch_size()) + "_a" +
           format_exact(p.alpha_low) + "_" + format_exact(p.alpha_high) + "_" + format_exact(p.alpha_h) +
           "_n" + std::to_string(o.samples) + "_s" + std::to_string(o.seed) + ".txt";
}

inline void write_calibration(const std::filesystem::path& path, const SimilarityParams& p,
                              const CalibrationOptions& o) {
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorCode::io_failure, "cannot write " + path.string());
    out << "# patf threshold calibration\n"
        << "looks = " << format_exact(p.looks) << '\n'
        << "patch_size = " << p.patch_size() << '\n'
        << "alpha_low = " << format_exact(p.alpha_low) << '\n'
        << "alpha_high = " << format_exact(p.alpha_high) << '\n'
        << "alpha_h = " << format_exact(p.alpha_h) << '\n'
        << "samples = " << o.samples << '\n'
        << "seed = " << o.seed << '\n'
        << "tau1 = " << format_exact(p.tau1) << '\n'
        << "tau2 = " << format_exact(p.tau2) << '\n'
        << "h = " << format_exact(p.h) << '\n';
    require(static_cast<bool>(out), ErrorCode::io_failure, "cannot write " + path.string());
}

/// Returns the cached thresholds when the file exists and its key fields
/// match `p` and `o`; a file with other keys is treated as a miss.
inline std::optional<SimilarityParams> read_calibration(const std::filesystem::path& path,
                                                        SimilarityParams p, const CalibrationOptions& o) {
    std::ifstream in(path);
    if (!in) {
        return std::nullopt;
    }
    const auto kv = parse_key_values(in);
    auto get = [&](const std::string& key) -> const std::string& {
        for (const auto& [k, v] : kv) {
            if (k == key) {
                return v;
            }
        }
        throw Error(ErrorCode::parse_error, path.string() + ": missing key '" + key + "'");
    };
    if (parse_number<double>(get("looks"), "looks") != p.looks ||
        parse_number<std::size_t>(get("patch_size"), "patch_size") != p.patch_size() ||
        parse_number<double>(get("alpha_low"), "alpha_low") != p.alpha_low ||
        parse_number<double>(get("alpha_high"), "alpha_high") != p.alpha_high ||
        parse_number<double>(get("alpha_h"), "alpha_h") != p.alpha_h ||
        parse_number<std::size_t>(get("samples"), "samples") != o.samples ||
        parse_number<std::uint64_t>(get("seed"), "seed") != o.seed) {
        return std::nullopt;
    }
    p.tau1 = parse_number<double>(get("tau1"), "tau1");
    p.tau2 = parse_number<double>(get("tau2"), "tau2");
    p.h = parse_number<double>(get("h"), "h");
    validate(p, true);
    return p;
}

/// Cached calibrate(): loads from `dir` when present, otherwise computes and stores.
inline SimilarityParams calibrate_cached(const SimilarityParams& p, const CalibrationOptions& o,
                                         const std::filesystem::path& dir) {
    const auto path = dir / calibration_cache_name(p, o);
    if (auto hit = read_calibration(path, p, o)) {
        return *hit;
    }
    auto result = calibrate(p, o);
    std::filesystem::create_directories(dir);
    write_calibration(path, result, o);
    return result;
}

} // namespace patf

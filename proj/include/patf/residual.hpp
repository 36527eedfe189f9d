#pragma once

// No-reference despeckling quality from the ratio image noisy / denoised.
// A good denoiser leaves pure unit-mean speckle in the ratio; leftover
// structure shows up as lag-one autocovariance inside small patches.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstddef>
#include <optional>
#include <vector>

#include "patf/error.hpp"
#include "patf/image.hpp"
#include "patf/similarity.hpp"

namespace patf {

struct RatioImage {
    Image values;
    std::size_t clamped = 0;  // denoised pixels raised to the floor
};

/// R = noisy / denoised. Denoised values at or below 1e-10 of the denoised
/// mean are clamped to that floor and counted.
inline RatioImage ratio(const Image& noisy, const Image& denoised) {
    require(noisy.same_shape(denoised), ErrorCode::dimension_mismatch, "ratio operands differ in shape");
    const double floor = intensity_floor(denoised, 1e-10);
    RatioImage out{Image(noisy.rows(), noisy.cols())};
    auto y = noisy.values();
    auto u = denoised.values();
    auto r = out.values.values();
    for (std::size_t i = 0; i < r.size(); ++i) {
        double den = u[i];
        if (!(den > floor)) {
            den = floor;
            ++out.clamped;
        }
        r[i] = y[i] / den;
    }
    return out;
}

struct Displacement {
    int dr = 0;
    int dc = 0;
};

enum class ResidualDenominator {
    as_printed,  // sum over the patch of (R^2 - 1)
    centered,    // sum over the patch of (R - 1)^2
};

struct ResidualOptions {
    std::size_t patch_size = 8;
    std::vector<Displacement> displacements{{0, 1}, {1, 0}};
    ResidualDenominator denominator = ResidualDenominator::as_printed;
};

inline void validate(const ResidualOptions& o) {
    require(o.patch_size >= 2, ErrorCode::invalid_parameter, "residual patch size must be >= 2");
    require(!o.displacements.empty(), ErrorCode::invalid_parameter, "at least one displacement is required");
}

/// Patches are addressed by their top-left pixel and must lie inside R.
/// C(d) = mean over patch pixels p of (R(p) - m)(R(p + d) - m), m the patch
/// mean; R(p + d) is mirror-padded when it leaves the raster.
inline double patch_autocov(const Image& r, std::size_t row, std::size_t col, Displacement d,
                            std::size_t patch_size) {
    require(row + patch_size <= r.rows() && col + patch_size <= r.cols(), ErrorCode::invalid_parameter,
            "patch does not fit inside the ratio image");
    double m = 0.0;
    for (std::size_t i = 0; i < patch_size; ++i) {
        for (std::size_t j = 0; j < patch_size; ++j) {
            m += r(row + i, col + j);
        }
    }
    const auto n = static_cast<double>(patch_size * patch_size);
    m /= n;
    double acc = 0.0;
    for (std::size_t i = 0; i < patch_size; ++i) {
        for (std::size_t j = 0; j < patch_size; ++j) {
            const auto pr = static_cast<std::ptrdiff_t>(row + i);
            const auto pc = static_cast<std::ptrdiff_t>(col + j);
            acc += (r(row + i, col + j) - m) * (mirrored(r, pr + d.dr, pc + d.dc) - m);
        }
    }
    return acc / n;
}

/// Numerator and denominator of the normalized autocovariance, before the
/// N^2/(N^2-1) factor. Exposed for invariance checks.
struct PatchScoreParts {
    double numerator = 0.0;
    double denominator = 0.0;
};

inline PatchScoreParts patch_score_parts(const Image& r, std::size_t row, std::size_t col,
                                         const ResidualOptions& options) {
    PatchScoreParts parts;
    for (const auto& d : options.displacements) {
        if (d.dr == 0 && d.dc == 0) {
            continue;
        }
        const double c = patch_autocov(r, row, col, d, options.patch_size);
        parts.numerator += c * c;
    }
    for (std::size_t i = 0; i < options.patch_size; ++i) {
        for (std::size_t j = 0; j < options.patch_size; ++j) {
            const double v = r(row + i, col + j);
            parts.denominator +=
                options.denominator == ResidualDenominator::as_printed ? v * v - 1.0 : (v - 1.0) * (v - 1.0);
        }
    }
    return parts;
}

inline double denominator_guard(std::size_t patch_size) {
    return 1e-8 * static_cast<double>(patch_size * patch_size);
}

/// Normalized residual autocovariance of one patch, or nullopt when the
/// denominator falls below the guard (the patch is then excluded).
inline std::optional<double> patch_score(const Image& r, std::size_t row, std::size_t col,
                                         const ResidualOptions& options) {
    validate(options);
    const auto parts = patch_score_parts(r, row, col, options);
    if (!(parts.denominator >= denominator_guard(options.patch_size))) {
        return std::nullopt;
    }
    const auto n = static_cast<double>(options.patch_size * options.patch_size);
    return n / (n - 1.0) * parts.numerator / parts.denominator;
}

struct QualityMap {
    Image map;                  // 0 where no defined patch covers the pixel
    std::vector<char> defined;  // per pixel
    double score = 0.0;         // mean of the defined map values
    std::size_t defined_pixels = 0;
    std::size_t patches = 0;
    std::size_t undefined_patches = 0;
};

namespace detail {

/// Ratio image with a mirrored border wide enough for every displacement.
struct PaddedRatio {
    std::size_t pad = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    PaddedRatio(const Image& r, const std::vector<Displacement>& displacements) {
        for (const auto& d : displacements) {
            pad = std::max<std::size_t>(pad, static_cast<std::size_t>(std::max(std::abs(d.dr), std::abs(d.dc))));
        }
        const auto p = static_cast<std::ptrdiff_t>(pad);
        cols = r.cols() + 2 * pad;
        const std::size_t rows = r.rows() + 2 * pad;
        values.resize(rows * cols);
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < cols; ++j) {
                values[i * cols + j] =
                    mirrored(r, static_cast<std::ptrdiff_t>(i) - p, static_cast<std::ptrdiff_t>(j) - p);
            }
        }
    }

    double operator()(std::ptrdiff_t r, std::ptrdiff_t c) const {
        const auto p = static_cast<std::ptrdiff_t>(pad);
        return values[static_cast<std::size_t>(r + p) * cols + static_cast<std::size_t>(c + p)];
    }
};

inline std::optional<double> padded_patch_score(const PaddedRatio& r, std::size_t row, std::size_t col,
                                                const ResidualOptions& options) {
    const std::size_t n = options.patch_size;
    const auto n2 = static_cast<double>(n * n);
    const auto r0 = static_cast<std::ptrdiff_t>(row);
    const auto c0 = static_cast<std::ptrdiff_t>(col);
    const auto size = static_cast<std::ptrdiff_t>(n);
    double m = 0.0;
    double den = 0.0;
    for (std::ptrdiff_t i = 0; i < size; ++i) {
        for (std::ptrdiff_t j = 0; j < size; ++j) {
            const double v = r(r0 + i, c0 + j);
            m += v;
            den += options.denominator == ResidualDenominator::as_printed ? v * v - 1.0 : (v - 1.0) * (v - 1.0);
        }
    }
    if (!(den >= denominator_guard(n))) {
        return std::nullopt;
    }
    m /= n2;
    double num = 0.0;
    for (const auto& d : options.displacements) {
        if (d.dr == 0 && d.dc == 0) {
            continue;
        }
        double acc = 0.0;
        for (std::ptrdiff_t i = 0; i < size; ++i) {
            for (std::ptrdiff_t j = 0; j < size; ++j) {
                acc += (r(r0 + i, c0 + j) - m) * (r(r0 + i + d.dr, c0 + j + d.dc) - m);
            }
        }
        const double c = acc / n2;
        num += c * c;
    }
    return n2 / (n2 - 1.0) * num / den;
}

} // namespace detail

/// Dense sliding patches; each pixel takes the mean score of the defined
/// patches that contain it. Accumulation order per pixel is fixed.
inline QualityMap quality_map(const Image& r, const ResidualOptions& options = {}) {
    validate(options);
    const std::size_t n = options.patch_size;
    require(r.rows() >= n && r.cols() >= n, ErrorCode::invalid_parameter,
            "ratio image is smaller than one residual patch");
    const detail::PaddedRatio padded(r, options.displacements);
    const std::size_t pr = r.rows() - n + 1;
    const std::size_t pc = r.cols() - n + 1;
    Image sum(r.rows(), r.cols());
    std::vector<std::size_t> count(r.size(), 0);
    QualityMap out;
    out.patches = pr * pc;
    for (std::size_t i = 0; i < pr; ++i) {
        for (std::size_t j = 0; j < pc; ++j) {
            const auto score = detail::padded_patch_score(padded, i, j, options);
            if (!score) {
                ++out.undefined_patches;
                continue;
            }
            for (std::size_t a = 0; a < n; ++a) {
                for (std::size_t b = 0; b < n; ++b) {
                    sum(i + a, j + b) += *score;
                    ++count[(i + a) * r.cols() + j + b];
                }
            }
        }
    }
    require(out.undefined_patches < out.patches, ErrorCode::degenerate_ratio,
            "degenerate ratio: every residual patch is undefined");
    out.map = Image(r.rows(), r.cols());
    out.defined.assign(r.size(), 0);
    double total = 0.0;
    for (std::size_t k = 0; k < r.size(); ++k) {
        if (count[k] > 0) {
            out.map.values()[k] = sum.values()[k] / static_cast<double>(count[k]);
            out.defined[k] = 1;
            ++out.defined_pixels;
            total += out.map.values()[k];
        }
    }
    out.score = total / static_cast<double>(out.defined_pixels);
    return out;
}

/// Four display classes over [0, 4] with edges {1, 2, 3}; for visualization only.
inline int quality_class(double value) {
    if (value < 1.0) {
        return 0;
    }
    if (value < 2.0) {
        return 1;
    }
    if (value < 3.0) {
        return 2;
    }
    return 3;
}

/// Residual score of every date of a denoised stack against its noisy input.
inline std::vector<QualityMap> stack_quality(const ImageStack& noisy, const ImageStack& denoised,
                                             const ResidualOptions& options = {}) {
    require(noisy.dates() == denoised.dates() && noisy.rows() == denoised.rows() &&
                noisy.cols() == denoised.cols(),
            ErrorCode::dimension_mismatch, "noisy and denoised stacks differ in shape");
    std::vector<QualityMap> out;
    for (std::size_t t = 0; t < noisy.dates(); ++t) {
        out.push_back(quality_map(ratio(noisy[t], denoised[t]).values, options));
    }
    return out;
}

inline double mean_score(const std::vector<QualityMap>& maps) {
    double acc = 0.0;
    for (const auto& m : maps) {
        acc += m.score;
    }
    return maps.empty() ? 0.0 : acc / static_cast<double>(maps.size());
}

} // namespace patf

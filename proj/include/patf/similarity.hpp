#pragma once

// GLR similarity between two intensity observations and between two
// patches of an image stack.

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>

#include "patf/error.hpp"
#include "patf/image.hpp"

namespace patf {

struct SimilarityParams {
    std::size_t patch_half = 3;  // patch is (2*patch_half+1)^2
    double looks = 1.0;
    double h = 0.0;              // smoothing; filled by calibrate()
    double tau1 = 0.0;           // "unchanged" threshold
    double tau2 = 0.0;           // "changed" threshold
    double alpha_low = 0.08;
    double alpha_high = 0.92;
    double alpha_h = 0.92;       // quantile level inside the definition of h
    double floor_ratio = 1e-10;  // zero intensities are clamped to floor_ratio * date mean

    std::size_t patch_size() const noexcept { return 2 * patch_half + 1; }
    bool calibrated() const noexcept { return h > 0.0 && tau1 < tau2; }
};

inline void validate(const SimilarityParams& p, bool need_calibration = false) {
    require(p.looks > 0.5 && std::isfinite(p.looks), ErrorCode::invalid_parameter,
            "patch similarity needs looks > 0.5 so that 2L-1 > 0");
    require(p.alpha_low > 0.0 && p.alpha_low < p.alpha_high && p.alpha_high < 1.0,
            ErrorCode::invalid_parameter, "quantile levels must satisfy 0 < alpha_low < alpha_high < 1");
    require(p.alpha_h > 0.0 && p.alpha_h < 1.0, ErrorCode::invalid_parameter, "alpha_h must lie in (0, 1)");
    require(p.floor_ratio > 0.0, ErrorCode::invalid_parameter, "floor ratio must be positive");
    if (need_calibration) {
        require(p.h > 0.0 && std::isfinite(p.h), ErrorCode::invalid_parameter, "h must be positive");
        require(p.tau1 < p.tau2, ErrorCode::invalid_parameter, "tau1 must be below tau2");
    }
}

namespace detail {

inline void check_pair(double y1, double y2, double l1, double l2) {
    require(y1 > 0.0 && y2 > 0.0 && std::isfinite(y1) && std::isfinite(y2), ErrorCode::invalid_input,
            "GLR needs strictly positive finite intensities");
    require(l1 > 0.0 && l2 > 0.0, ErrorCode::invalid_parameter, "looks must be positive");
}

// log1p(x) - x without cancellation for small |x|.
inline double log1p_minus_x(double x) {
    if (std::abs(x) >= 0.1) {
        return std::log1p(x) - x;
    }
    double term = x * x;
    double acc = 0.0;
    for (int n = 2; n < 40; ++n) {
        const double contribution = (n % 2 == 0 ? -term : term) / n;
        acc += contribution;
        if (std::abs(contribution) <= 1e-18 * std::abs(acc)) {
            break;
        }
        term *= x;
    }
    return acc;
}

} // namespace detail

/// GLR ratio (L1+L2)^(L1+L2) y1^L1 y2^L2 / (L1 y1 + L2 y2)^(L1+L2), in (0, 1].
inline double glrt(double y1, double y2, double l1, double l2) {
    detail::check_pair(y1, y2, l1, l2);
    // Same value written as (y1/m)^L1 (y2/m)^L2 with m the pooled ML estimate.
    const double m = (l1 * y1 + l2 * y2) / (l1 + l2);
    return std::pow(y1 / m, l1) * std::pow(y2 / m, l2);
}

/// -log GLRT with arbitrary looks. Non-negative, zero iff y1 == y2.
inline double s_glr(double y1, double y2, double l1, double l2) {
    detail::check_pair(y1, y2, l1, l2);
    const double l = l1 + l2;
    const double x1 = l2 * (y2 - y1) / (l * y1);  // m/y1 - 1
    const double x2 = l1 * (y1 - y2) / (l * y2);  // m/y2 - 1
    if (std::abs(x1) < 0.5 && std::abs(x2) < 0.5) {
        // The first-order parts of L1 log1p(x1) + L2 log1p(x2) cancel exactly.
        const double diff = (y2 - y1) / std::sqrt(y1) / std::sqrt(y2);
        return (l1 * l2 / l) * diff * diff + l1 * detail::log1p_minus_x(x1) +
               l2 * detail::log1p_minus_x(x2);
    }
    return l1 * std::log1p(x1) + l2 * std::log1p(x2);
}

/// Equal-looks form: 2L log(sqrt(y1/y2) + sqrt(y2/y1)) - 2L log 2.
inline double s_glr_equal_looks(double y1, double y2, double looks) {
    detail::check_pair(y1, y2, looks, looks);
    const double diff = (y1 - y2) / std::sqrt(y1) / std::sqrt(y2);
    return looks * std::log1p(0.25 * diff * diff);
}

/// Per-pixel patch term log(sqrt(a/b) + sqrt(b/a)); minimum log 2 at a == b.
inline double patch_term(double a, double b) {
    return std::log(std::sqrt(a / b) + std::sqrt(b / a));
}

/// Smallest attainable patch dissimilarity, (2L-1) N1^2 log 2.
inline double min_dissimilarity(const SimilarityParams& p) {
    const auto n = static_cast<double>(p.patch_size());
    return (2.0 * p.looks - 1.0) * n * n * std::numbers::ln2;
}

/// Clamp level for one date: floor_ratio times the date mean.
inline double intensity_floor(const Image& img, double floor_ratio) {
    return std::max(floor_ratio * mean(img.values()), std::numeric_limits<double>::min());
}

/// Patch GLR dissimilarity between dates t and t2 around pixel (row, col):
/// (2L-1) * sum_k log(sqrt(r_k) + sqrt(1/r_k)), mirror-padded, with
/// intensities below the date floor clamped to it.
inline double patch_dissimilarity(const ImageStack& stack, std::size_t t, std::size_t t2, std::size_t row,
                                  std::size_t col, const SimilarityParams& params) {
    validate(params);
    require(t < stack.dates() && t2 < stack.dates(), ErrorCode::invalid_parameter, "date out of range");
    require(row < stack.rows() && col < stack.cols(), ErrorCode::invalid_parameter, "pixel out of range");
    const Image& a = stack[t];
    const Image& b = stack[t2];
    const double floor_a = intensity_floor(a, params.floor_ratio);
    const double floor_b = intensity_floor(b, params.floor_ratio);
    const auto h = static_cast<std::ptrdiff_t>(params.patch_half);
    const auto r0 = static_cast<std::ptrdiff_t>(row);
    const auto c0 = static_cast<std::ptrdiff_t>(col);
    double acc = 0.0;
    for (std::ptrdiff_t dr = -h; dr <= h; ++dr) {
        for (std::ptrdiff_t dc = -h; dc <= h; ++dc) {
            const double va = std::max(mirrored(a, r0 + dr, c0 + dc), floor_a);
            const double vb = std::max(mirrored(b, r0 + dr, c0 + dc), floor_b);
            acc += patch_term(va, vb);
        }
    }
    return (2.0 * params.looks - 1.0) * acc;
}

namespace detail {

/// Floor-clamped intensities of one date together with their logarithms.
struct PreparedDate {
    Image values;
    Image logs;
};

inline PreparedDate prepare_date(const Image& img, double floor_ratio) {
    const double floor = intensity_floor(img, floor_ratio);
    PreparedDate out{Image(img.rows(), img.cols()), Image(img.rows(), img.cols())};
    auto src = img.values();
    auto v = out.values.values();
    auto l = out.logs.values();
    for (std::size_t i = 0; i < src.size(); ++i) {
        v[i] = std::max(src[i], floor);
        l[i] = std::log(v[i]);
    }
    return out;
}

// log(sqrt(a/b) + sqrt(b/a)) = log(a + b) - (log a + log b) / 2; symmetric in (a, b).
inline void term_plane(const PreparedDate& a, const PreparedDate& b, Image& out) {
    auto va = a.values.values();
    auto vb = b.values.values();
    auto la = a.logs.values();
    auto lb = b.logs.values();
    auto o = out.values();
    for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] = std::log(va[i] + vb[i]) - 0.5 * (la[i] + lb[i]);
    }
}

inline Image dissimilarity_plane(const PreparedDate& a, const PreparedDate& b,
                                 const SimilarityParams& params) {
    Image terms(a.values.rows(), a.values.cols());
    term_plane(a, b, terms);
    Image plane = box_sum(terms, params.patch_half);
    const double scale = 2.0 * params.looks - 1.0;
    for (double& v : plane.values()) {
        v *= scale;
    }
    return plane;
}

} // namespace detail

/// patch_dissimilarity evaluated at every pixel for the date pair (t, t2).
inline Image dissimilarity_plane(const ImageStack& stack, std::size_t t, std::size_t t2,
                                 const SimilarityParams& params) {
    validate(params);
    require(t < stack.dates() && t2 < stack.dates(), ErrorCode::invalid_parameter, "date out of range");
    const auto a = detail::prepare_date(stack[t], params.floor_ratio);
    const auto b = detail::prepare_date(stack[t2], params.floor_ratio);
    return detail::dissimilarity_plane(a, b, params);
}

} // namespace patf

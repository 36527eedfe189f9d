#pragma once

// Full-reference (PSNR, MSSIM) and region (ENL) metrics, computed on linear
// intensities.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "patf/error.hpp"
#include "patf/image.hpp"
#include "patf/keyvalue.hpp"
#include "patf/speckle.hpp"

namespace patf {

/// A metric value that may legitimately be infinite (zero MSE, zero variance).
struct FlaggedValue {
    double value = 0.0;
    bool infinite = false;
};

inline double max_value(std::span<const double> v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) {
        m = std::max(m, x);
    }
    return m;
}

/// 10 log10(peak^2 / MSE). Peak defaults to the reference maximum.
inline FlaggedValue psnr(std::span<const double> reference, std::span<const double> estimate,
                         std::optional<double> peak = std::nullopt) {
    require(reference.size() == estimate.size() && !reference.empty(), ErrorCode::dimension_mismatch,
            "PSNR operands differ in size");
    const double p = peak.value_or(max_value(reference));
    require(p > 0.0, ErrorCode::invalid_parameter, "PSNR peak must be positive");
    double se = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double e = estimate[i] - reference[i];
        se += e * e;
    }
    if (se == 0.0) {
        return {std::numeric_limits<double>::infinity(), true};
    }
    const double mse = se / static_cast<double>(reference.size());
    return {10.0 * std::log10(p * p / mse), false};
}

inline FlaggedValue psnr(const Image& reference, const Image& estimate, std::optional<double> peak = std::nullopt) {
    require(reference.same_shape(estimate), ErrorCode::dimension_mismatch, "PSNR operands differ in shape");
    return psnr(reference.values(), estimate.values(), peak);
}

/// PSNR over every pixel of every date.
inline FlaggedValue psnr(const ImageStack& reference, const ImageStack& estimate,
                         std::optional<double> peak = std::nullopt) {
    require(reference.dates() == estimate.dates(), ErrorCode::dimension_mismatch, "stacks differ in dates");
    std::vector<double> ref;
    std::vector<double> est;
    for (std::size_t t = 0; t < reference.dates(); ++t) {
        require(reference[t].same_shape(estimate[t]), ErrorCode::dimension_mismatch, "stacks differ in shape");
        ref.insert(ref.end(), reference[t].values().begin(), reference[t].values().end());
        est.insert(est.end(), estimate[t].values().begin(), estimate[t].values().end());
    }
    return psnr(ref, est, peak);
}

/// Mean SSIM over all fully contained window x window uniform windows
/// (the window shrinks to the image when the image is smaller). Constants
/// C1 = (0.01 P)^2, C2 = (0.03 P)^2 with P the peak of both inputs, which
/// keeps the metric symmetric in its arguments.
inline double mssim(const Image& reference, const Image& estimate, std::size_t window = 11,
                    std::optional<double> peak = std::nullopt) {
    require(reference.same_shape(estimate) && !reference.empty(), ErrorCode::dimension_mismatch,
            "MSSIM operands differ in shape");
    require(window >= 1, ErrorCode::invalid_parameter, "MSSIM window must be >= 1");
    const double p = peak.value_or(std::max(max_value(reference.values()), max_value(estimate.values())));
    require(p > 0.0, ErrorCode::invalid_parameter, "MSSIM peak must be positive");
    const double c1 = (0.01 * p) * (0.01 * p);
    const double c2 = (0.03 * p) * (0.03 * p);
    const std::size_t wr = std::min(window, reference.rows());
    const std::size_t wc = std::min(window, reference.cols());
    const std::size_t nr = reference.rows() - wr + 1;
    const std::size_t nc = reference.cols() - wc + 1;
    const auto area = static_cast<double>(wr * wc);

    // Column sums over wr rows, then window sums along each row.
    auto window_sums = [&](auto&& value) {
        std::vector<double> column(nr * reference.cols());
        for (std::size_t r = 0; r < nr; ++r) {
            for (std::size_t c = 0; c < reference.cols(); ++c) {
                double acc = 0.0;
                for (std::size_t k = 0; k < wr; ++k) {
                    acc += value(r + k, c);
                }
                column[r * reference.cols() + c] = acc;
            }
        }
        std::vector<double> out(nr * nc);
        for (std::size_t r = 0; r < nr; ++r) {
            for (std::size_t c = 0; c < nc; ++c) {
                double acc = 0.0;
                for (std::size_t k = 0; k < wc; ++k) {
                    acc += column[r * reference.cols() + c + k];
                }
                out[r * nc + c] = acc / area;
            }
        }
        return out;
    };
    const auto mx = window_sums([&](std::size_t r, std::size_t c) { return reference(r, c); });
    const auto my = window_sums([&](std::size_t r, std::size_t c) { return estimate(r, c); });
    const auto mxx = window_sums([&](std::size_t r, std::size_t c) { return reference(r, c) * reference(r, c); });
    const auto myy = window_sums([&](std::size_t r, std::size_t c) { return estimate(r, c) * estimate(r, c); });
    const auto mxy = window_sums([&](std::size_t r, std::size_t c) { return reference(r, c) * estimate(r, c); });
    double acc = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        const double vx = mxx[i] - mx[i] * mx[i];
        const double vy = myy[i] - my[i] * my[i];
        const double cxy = mxy[i] - mx[i] * my[i];
        const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2);
        const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
        acc += num / den;
    }
    return acc / static_cast<double>(mx.size());
}

/// Mean of the per-date MSSIM values.
inline double mssim(const ImageStack& reference, const ImageStack& estimate, std::size_t window = 11,
                    std::optional<double> peak = std::nullopt) {
    require(reference.dates() == estimate.dates() && reference.dates() > 0, ErrorCode::dimension_mismatch,
            "stacks differ in dates");
    double acc = 0.0;
    for (std::size_t t = 0; t < reference.dates(); ++t) {
        acc += mssim(reference[t], estimate[t], window, peak);
    }
    return acc / static_cast<double>(reference.dates());
}

/// mean^2 / variance (population variance); infinite when the region is constant.
inline FlaggedValue enl(std::span<const double> region) {
    require(region.size() >= 2, ErrorCode::invalid_input, "ENL needs at least two pixels");
    const double m = mean(region);
    double var = 0.0;
    for (double v : region) {
        var += (v - m) * (v - m);
    }
    var /= static_cast<double>(region.size());
    if (var == 0.0) {
        return {std::numeric_limits<double>::infinity(), true};
    }
    return {m * m / var, false};
}

inline FlaggedValue enl(const Image& img, const Rect& region) {
    require(region.row + region.height <= img.rows() && region.col + region.width <= img.cols(),
            ErrorCode::invalid_parameter, "ENL region lies outside the raster");
    std::vector<double> values;
    values.reserve(region.height * region.width);
    for (std::size_t r = region.row; r < region.row + region.height; ++r) {
        for (std::size_t c = region.col; c < region.col + region.width; ++c) {
            values.push_back(img(r, c));
        }
    }
    return enl(values);
}

struct MetricReport {
    FlaggedValue psnr;
    double mssim = 0.0;
    std::optional<FlaggedValue> enl;
};

inline void write_report(std::ostream& out, const MetricReport& report) {
    auto flagged = [&](const char* key, const FlaggedValue& v) {
        out << key << " = " << (v.infinite ? std::string("inf") : format_g6(v.value)) << '\n';
        out << key << "_infinite = " << (v.infinite ? 1 : 0) << '\n';
    };
    flagged("psnr", report.psnr);
    out << "mssim = " << format_g6(report.mssim) << '\n';
    if (report.enl) {
        flagged("enl", *report.enl);
    }
}

} // namespace patf

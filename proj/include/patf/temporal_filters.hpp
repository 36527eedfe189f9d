#pragma once

// Multitemporal despeckling filters.
//
// PATF averages each pixel over the dates whose surrounding patch is
// statistically similar to the reference date. The baselines UTA, NLTF and
// ANLTF estimate a per-date local mean mu_t (boxcar, unweighted non-local,
// weighted non-local) and combine the dates with
//     u_t(s) = mu_t(s) / M * sum_t' y_t'(s) / mu_t'(s).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "patf/error.hpp"
#include "patf/image.hpp"
#include "patf/similarity.hpp"

namespace patf {

enum class Method { patf, uta, nltf, anltf, arithmetic_mean };

inline std::string_view to_string(Method m) {
    switch (m) {
    case Method::patf: return "patf";
    case Method::uta: return "uta";
    case Method::nltf: return "nltf";
    case Method::anltf: return "anltf";
    case Method::arithmetic_mean: return "mean";
    }
    return "unknown";
}

inline Method parse_method(std::string_view name) {
    for (Method m : {Method::patf, Method::uta, Method::nltf, Method::anltf, Method::arithmetic_mean}) {
        if (name == to_string(m)) {
            return m;
        }
    }
    throw Error(ErrorCode::invalid_parameter, "unknown method '" + std::string(name) + "'");
}

struct FilterConfig {
    Method method = Method::patf;
    SimilarityParams sim;
    std::size_t window_half = 2;   // UTA boxcar and ANLTF search window, (2*half+1)^2
    std::size_t search_half = 10;  // NLTF search window
    std::size_t n_similar = 16;    // NLTF N2
    bool window_only = false;      // baselines: return mu_t without temporal combination
    std::optional<std::size_t> date;
    unsigned threads = default_threads();
};

struct FilterDiagnostics {
    std::size_t reduced_candidate_pixels = 0;  // NLTF pixels with fewer than N2 candidates
    std::size_t effective_n_similar = 0;
};

/// Temporal weights of one reference pixel. `normalization` is the raw sum.
struct WeightVector {
    std::vector<double> w;
    double normalization = 0.0;

    std::vector<double> normalized() const {
        std::vector<double> out(w);
        for (double& v : out) {
            v /= normalization;
        }
        return out;
    }
};

/// Piecewise weight rule for one reference date given its dissimilarity to
/// every date: 0 at d >= tau2, exp(-d/h) strictly between the thresholds,
/// w_max at d <= tau1 and for the reference itself. w_max is the largest
/// middle-band weight, or 1 when no date falls in the middle band.
inline double fill_weights(std::span<const double> d, std::size_t self, const SimilarityParams& p,
                           std::span<double> w) {
    double d_lo = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < d.size(); ++t) {
        if (t != self && d[t] > p.tau1 && d[t] < p.tau2) {
            d_lo = std::min(d_lo, d[t]);
        }
    }
    const bool middle = d_lo < std::numeric_limits<double>::infinity();
    // Shift the exponent only when exp(-d/h) would underflow everywhere;
    // a common factor does not change the normalized weights.
    const double shift = middle && std::exp(-d_lo / p.h) == 0.0 ? d_lo : 0.0;
    const double w_max = middle ? std::exp(-(d_lo - shift) / p.h) : 1.0;
    for (std::size_t t = 0; t < d.size(); ++t) {
        w[t] = 0.0;
        if (t != self && d[t] > p.tau1 && d[t] < p.tau2) {
            w[t] = std::exp(-(d[t] - shift) / p.h);
        }
    }
    double sum = 0.0;
    for (std::size_t t = 0; t < d.size(); ++t) {
        if (t == self || d[t] <= p.tau1) {
            w[t] = w_max;
        }
        sum += w[t];
    }
    return sum;
}

inline WeightVector weights_from_dissimilarities(std::span<const double> d, std::size_t self,
                                                 const SimilarityParams& p) {
    WeightVector out;
    out.w.resize(d.size());
    out.normalization = fill_weights(d, self, p, out.w);
    return out;
}

/// PATF weights for reference date t at pixel (row, col).
inline WeightVector patf_weights(const ImageStack& stack, std::size_t t, std::size_t row, std::size_t col,
                                 const SimilarityParams& params) {
    validate(params, true);
    std::vector<double> d(stack.dates());
    for (std::size_t t2 = 0; t2 < stack.dates(); ++t2) {
        d[t2] = t2 == t ? min_dissimilarity(params) : patch_dissimilarity(stack, t, t2, row, col, params);
    }
    return weights_from_dissimilarities(d, t, params);
}

namespace detail {

inline Image patf_date(const ImageStack& stack, std::span<const PreparedDate> prepared, std::size_t t,
                       const SimilarityParams& params) {
    const std::size_t dates = stack.dates();
    const std::size_t pixels = stack.rows() * stack.cols();
    std::vector<Image> planes(dates);
    for (std::size_t t2 = 0; t2 < dates; ++t2) {
        if (t2 != t) {
            planes[t2] = dissimilarity_plane(prepared[t], prepared[t2], params);
        }
    }
    Image out(stack.rows(), stack.cols());
    std::vector<double> d(dates, min_dissimilarity(params));
    std::vector<double> w(dates);
    for (std::size_t i = 0; i < pixels; ++i) {
        for (std::size_t t2 = 0; t2 < dates; ++t2) {
            if (t2 != t) {
                d[t2] = planes[t2].values()[i];
            }
        }
        const double norm = fill_weights(d, t, params, w);
        double acc = 0.0;
        for (std::size_t t2 = 0; t2 < dates; ++t2) {
            acc += w[t2] * stack[t2].values()[i];
        }
        out.values()[i] = acc / norm;
    }
    return out;
}

inline std::vector<std::size_t> output_dates(const ImageStack& stack, std::optional<std::size_t> date) {
    if (date) {
        require(*date < stack.dates(), ErrorCode::invalid_parameter, "date out of range");
        return {*date};
    }
    std::vector<std::size_t> all(stack.dates());
    for (std::size_t t = 0; t < all.size(); ++t) {
        all[t] = t;
    }
    return all;
}

inline ImageStack assemble(const ImageStack& stack, const std::vector<std::size_t>& dates,
                           std::vector<Image> frames) {
    ImageStack out;
    out.frames = std::move(frames);
    for (std::size_t t : dates) {
        out.looks.push_back(stack.looks[t]);
    }
    return out;
}

} // namespace detail

/// Temporal weighted average with PATF weights, for every date (or one).
inline ImageStack patf_denoise(const ImageStack& stack, const SimilarityParams& params,
                               std::optional<std::size_t> date = std::nullopt,
                               unsigned threads = default_threads()) {
    validate(stack);
    validate(params, true);
    std::vector<detail::PreparedDate> prepared;
    prepared.reserve(stack.dates());
    for (const auto& frame : stack.frames) {
        prepared.push_back(detail::prepare_date(frame, params.floor_ratio));
    }
    const auto dates = detail::output_dates(stack, date);
    std::vector<Image> frames(dates.size());
    parallel_for(dates.size(), threads, [&](std::size_t k) {
        frames[k] = detail::patf_date(stack, prepared, dates[k], params);
    });
    return detail::assemble(stack, dates, std::move(frames));
}

/// Per-pixel temporal mean.
inline Image arithmetic_mean(const ImageStack& stack) {
    validate(stack);
    Image out(stack.rows(), stack.cols());
    auto o = out.values();
    for (const auto& frame : stack.frames) {
        auto in = frame.values();
        for (std::size_t i = 0; i < o.size(); ++i) {
            o[i] += in[i];
        }
    }
    const auto m = static_cast<double>(stack.dates());
    for (double& v : o) {
        v /= m;
    }
    return out;
}

/// mu_t(s) / M * sum_t' y_t'(s) / mu_t'(s). A zero local mean only arises
/// on an all-zero window; its ratio term is taken as 1.
inline Image temporal_combination(const ImageStack& stack, const std::vector<Image>& means, std::size_t t) {
    const std::size_t pixels = stack.rows() * stack.cols();
    const auto m = static_cast<double>(stack.dates());
    Image out(stack.rows(), stack.cols());
    for (std::size_t i = 0; i < pixels; ++i) {
        double acc = 0.0;
        for (std::size_t t2 = 0; t2 < stack.dates(); ++t2) {
            const double mu = means[t2].values()[i];
            acc += mu > 0.0 ? stack[t2].values()[i] / mu : 1.0;
        }
        out.values()[i] = means[t].values()[i] / m * acc;
    }
    return out;
}

namespace detail {

template <typename MeanFn>
ImageStack combine_dates(const ImageStack& stack, const FilterConfig& config, MeanFn&& local_mean) {
    std::vector<Image> means(stack.dates());
    const auto dates = output_dates(stack, config.date);
    if (config.window_only) {
        parallel_for(dates.size(), config.threads, [&](std::size_t k) { means[dates[k]] = local_mean(dates[k]); });
        std::vector<Image> frames;
        for (std::size_t t : dates) {
            frames.push_back(std::move(means[t]));
        }
        return assemble(stack, dates, std::move(frames));
    }
    parallel_for(stack.dates(), config.threads, [&](std::size_t t) { means[t] = local_mean(t); });
    std::vector<Image> frames(dates.size());
    parallel_for(dates.size(), config.threads,
                 [&](std::size_t k) { frames[k] = temporal_combination(stack, means, dates[k]); });
    return assemble(stack, dates, std::move(frames));
}

/// Mirror-padded copy of a prepared date, padded by `pad` on every side.
struct PaddedDate {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
    std::vector<double> logs;
};

inline PaddedDate pad_date(const PreparedDate& src, std::size_t pad) {
    const auto rows = static_cast<std::ptrdiff_t>(src.values.rows());
    const auto cols = static_cast<std::ptrdiff_t>(src.values.cols());
    const auto p = static_cast<std::ptrdiff_t>(pad);
    PaddedDate out;
    out.rows = src.values.rows() + 2 * pad;
    out.cols = src.values.cols() + 2 * pad;
    out.values.resize(out.rows * out.cols);
    out.logs.resize(out.rows * out.cols);
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(out.rows); ++r) {
        const auto sr = static_cast<std::size_t>(mirror_index(r - p, rows));
        for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(out.cols); ++c) {
            const auto sc = static_cast<std::size_t>(mirror_index(c - p, cols));
            const std::size_t i = static_cast<std::size_t>(r) * out.cols + static_cast<std::size_t>(c);
            out.values[i] = src.values(sr, sc);
            out.logs[i] = src.logs(sr, sc);
        }
    }
    return out;
}

/// Calls visit(s, i, d) once for every unordered pair of distinct pixels s, i
/// of the same date with |i - s|_inf <= search_half, where d is their patch
/// dissimilarity (mirror-padded patches). s is the earlier pixel in raster order.
template <typename Visit>
void for_each_patch_pair(const PreparedDate& date, const SimilarityParams& params, std::size_t search_half,
                         Visit&& visit) {
    const std::size_t p = params.patch_half;
    const std::size_t n1 = params.patch_size();
    const auto rows = static_cast<std::ptrdiff_t>(date.values.rows());
    const auto cols = static_cast<std::ptrdiff_t>(date.values.cols());
    const auto padded = pad_date(date, p);
    const double scale = 2.0 * params.looks - 1.0;
    const auto s_max = static_cast<std::ptrdiff_t>(search_half);
    std::vector<double> terms;
    std::vector<double> horizontal;
    for (std::ptrdiff_t dr = 0; dr <= s_max; ++dr) {
        for (std::ptrdiff_t dc = -s_max; dc <= s_max; ++dc) {
            if (dr == 0 && dc <= 0) {
                continue;
            }
            // Pixels s with s + (dr, dc) inside the raster.
            const std::ptrdiff_t r_lo = 0;
            const std::ptrdiff_t r_hi = rows - dr;
            const std::ptrdiff_t c_lo = std::max<std::ptrdiff_t>(0, -dc);
            const std::ptrdiff_t c_hi = std::min(cols, cols - dc);
            if (r_hi <= r_lo || c_hi <= c_lo) {
                continue;
            }
            const auto nr = static_cast<std::size_t>(r_hi - r_lo);
            const auto nc = static_cast<std::size_t>(c_hi - c_lo);
            const std::size_t tr = nr + 2 * p;
            const std::size_t tc = nc + 2 * p;
            terms.resize(tr * tc);
            // Pixel s = (r, c) has its patch on padded rows r .. r + 2p; its
            // partner s + (dr, dc) is shifted by the offset.
            for (std::size_t r = 0; r < tr; ++r) {
                const std::size_t row_a = (r + static_cast<std::size_t>(r_lo)) * padded.cols;
                const std::size_t row_b = row_a + static_cast<std::size_t>(dr) * padded.cols;
                const auto col_a = static_cast<std::size_t>(c_lo);
                const auto col_b = static_cast<std::size_t>(c_lo + dc);
                for (std::size_t c = 0; c < tc; ++c) {
                    const std::size_t ia = row_a + col_a + c;
                    const std::size_t ib = row_b + col_b + c;
                    terms[r * tc + c] = std::log(padded.values[ia] + padded.values[ib]) -
                                        0.5 * (padded.logs[ia] + padded.logs[ib]);
                }
            }
            horizontal.resize(tr * nc);
            for (std::size_t r = 0; r < tr; ++r) {
                for (std::size_t c = 0; c < nc; ++c) {
                    double acc = 0.0;
                    for (std::size_t k = 0; k < n1; ++k) {
                        acc += terms[r * tc + c + k];
                    }
                    horizontal[r * nc + c] = acc;
                }
            }
            for (std::size_t r = 0; r < nr; ++r) {
                for (std::size_t c = 0; c < nc; ++c) {
                    double acc = 0.0;
                    for (std::size_t k = 0; k < n1; ++k) {
                        acc += horizontal[(r + k) * nc + c];
                    }
                    const auto sr = static_cast<std::size_t>(r_lo) + r;
                    const auto sc = static_cast<std::size_t>(c_lo) + c;
                    const std::size_t s = sr * static_cast<std::size_t>(cols) + sc;
                    const std::size_t i = (sr + static_cast<std::size_t>(dr)) * static_cast<std::size_t>(cols) +
                                          static_cast<std::size_t>(static_cast<std::ptrdiff_t>(sc) + dc);
                    visit(s, i, scale * acc);
                }
            }
        }
    }
}

inline std::size_t clipped_window_area(std::size_t r, std::size_t c, std::size_t rows, std::size_t cols,
                                       std::size_t half) {
    const std::size_t r0 = r >= half ? r - half : 0;
    const std::size_t c0 = c >= half ? c - half : 0;
    const std::size_t r1 = std::min(rows - 1, r + half);
    const std::size_t c1 = std::min(cols - 1, c + half);
    return (r1 - r0 + 1) * (c1 - c0 + 1);
}

/// Running selection of the n smallest (d, index) pairs per pixel.
class NearestPatches {
public:
    NearestPatches(std::size_t pixels, std::size_t n) : n_(n), count_(pixels, 0), d_(pixels * n), idx_(pixels * n) {}

    void offer(std::size_t s, std::size_t i, double d) {
        double* ds = d_.data() + s * n_;
        std::size_t* is = idx_.data() + s * n_;
        std::size_t& cnt = count_[s];
        if (cnt == n_ && !less(d, i, ds[n_ - 1], is[n_ - 1])) {
            return;
        }
        std::size_t pos = cnt < n_ ? cnt++ : n_ - 1;
        while (pos > 0 && less(d, i, ds[pos - 1], is[pos - 1])) {
            ds[pos] = ds[pos - 1];
            is[pos] = is[pos - 1];
            --pos;
        }
        ds[pos] = d;
        is[pos] = i;
    }

    std::span<const std::size_t> selected(std::size_t s) const {
        return {idx_.data() + s * n_, count_[s]};
    }

private:
    static bool less(double da, std::size_t ia, double db, std::size_t ib) {
        return da < db || (da == db && ia < ib);
    }

    std::size_t n_;
    std::vector<std::size_t> count_;
    std::vector<double> d_;
    std::vector<std::size_t> idx_;
};

} // namespace detail

/// Boxcar local mean over the (2*window_half+1)^2 window, mirror-padded.
inline Image boxcar_mean(const Image& img, std::size_t window_half) {
    Image out = box_sum(img, window_half);
    const auto n = static_cast<double>((2 * window_half + 1) * (2 * window_half + 1));
    for (double& v : out.values()) {
        v /= n;
    }
    return out;
}

inline ImageStack uta_denoise(const ImageStack& stack, const FilterConfig& config) {
    validate(stack);
    require(config.window_half >= 1, ErrorCode::invalid_parameter, "UTA needs window_half >= 1");
    return detail::combine_dates(stack, config,
                                 [&](std::size_t t) { return boxcar_mean(stack[t], config.window_half); });
}

/// NLTF local mean of one date: the mean of all patch pixels of the N2 most
/// similar patches (self first, then by dissimilarity and raster index)
/// within the clipped search window.
inline Image nltf_local_mean(const Image& img, const FilterConfig& config, FilterDiagnostics* diag = nullptr) {
    const auto& params = config.sim;
    const std::size_t rows = img.rows();
    const std::size_t cols = img.cols();
    const std::size_t pixels = rows * cols;
    const auto prepared = detail::prepare_date(img, params.floor_ratio);
    const double self_d = -std::numeric_limits<double>::infinity();
    detail::NearestPatches nearest(pixels, config.n_similar);
    for (std::size_t s = 0; s < pixels; ++s) {
        nearest.offer(s, s, self_d);
    }
    detail::for_each_patch_pair(prepared, params, config.search_half, [&](std::size_t s, std::size_t i, double d) {
        nearest.offer(s, i, d);
        nearest.offer(i, s, d);
    });
    const Image patch_sum = box_sum(img, params.patch_half);
    const auto patch_pixels = static_cast<double>(params.patch_size() * params.patch_size());
    Image out(rows, cols);
    std::size_t reduced = 0;
    for (std::size_t s = 0; s < pixels; ++s) {
        const auto sel = nearest.selected(s);
        if (sel.size() < config.n_similar) {
            ++reduced;
        }
        double acc = 0.0;
        for (std::size_t i : sel) {
            acc += patch_sum.values()[i];
        }
        out.values()[s] = acc / (static_cast<double>(sel.size()) * patch_pixels);
    }
    if (diag != nullptr) {
        diag->reduced_candidate_pixels += reduced;
    }
    return out;
}

inline ImageStack nltf_denoise(const ImageStack& stack, const FilterConfig& config,
                               FilterDiagnostics* diag = nullptr) {
    validate(stack);
    validate(config.sim);
    require(config.n_similar >= 1, ErrorCode::invalid_parameter, "NLTF needs n_similar >= 1");
    std::vector<FilterDiagnostics> per_date(stack.dates());
    auto result = detail::combine_dates(stack, config, [&](std::size_t t) {
        return nltf_local_mean(stack[t], config, &per_date[t]);
    });
    if (diag != nullptr) {
        const std::size_t available =
            std::min(stack.rows(), 2 * config.search_half + 1) * std::min(stack.cols(), 2 * config.search_half + 1);
        diag->effective_n_similar = std::min(config.n_similar, available);
        for (const auto& d : per_date) {
            diag->reduced_candidate_pixels += d.reduced_candidate_pixels;
        }
    }
    return result;
}

/// ANLTF local mean of one date: average of y_t(i) over the clipped window
/// with weights exp(-d1(s, i) / h). Weights are evaluated relative to the
/// minimum d1, which leaves the normalized weights unchanged.
inline Image anltf_local_mean(const Image& img, const FilterConfig& config) {
    const auto& params = config.sim;
    const std::size_t pixels = img.size();
    const auto prepared = detail::prepare_date(img, params.floor_ratio);
    const double d_min = min_dissimilarity(params);
    std::vector<double> num(img.values().begin(), img.values().end());
    std::vector<double> den(pixels, 1.0);
    const auto y = img.values();
    detail::for_each_patch_pair(prepared, params, config.window_half, [&](std::size_t s, std::size_t i, double d) {
        const double w = std::exp(-(d - d_min) / params.h);
        num[s] += w * y[i];
        den[s] += w;
        num[i] += w * y[s];
        den[i] += w;
    });
    Image out(img.rows(), img.cols());
    for (std::size_t s = 0; s < pixels; ++s) {
        out.values()[s] = num[s] / den[s];
    }
    return out;
}

inline ImageStack anltf_denoise(const ImageStack& stack, const FilterConfig& config) {
    validate(stack);
    validate(config.sim);
    require(config.sim.h > 0.0, ErrorCode::invalid_parameter, "ANLTF needs a positive h");
    require(config.window_half >= 1, ErrorCode::invalid_parameter, "ANLTF needs window_half >= 1");
    return detail::combine_dates(stack, config, [&](std::size_t t) { return anltf_local_mean(stack[t], config); });
}

/// Runs the configured method.
inline ImageStack despeckle(const ImageStack& stack, const FilterConfig& config, FilterDiagnostics* diag = nullptr) {
    switch (config.method) {
    case Method::patf: return patf_denoise(stack, config.sim, config.date, config.threads);
    case Method::uta: return uta_denoise(stack, config);
    case Method::nltf: return nltf_denoise(stack, config, diag);
    case Method::anltf: return anltf_denoise(stack, config);
    case Method::arithmetic_mean: {
        const Image m = arithmetic_mean(stack);
        const auto dates = detail::output_dates(stack, config.date);
        return detail::assemble(stack, dates, std::vector<Image>(dates.size(), m));
    }
    }
    throw Error(ErrorCode::invalid_parameter, "unknown method");
}

} // namespace patf

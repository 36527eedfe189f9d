#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <span>
#include <thread>
#include <vector>

#include "patf/error.hpp"

namespace patf {

/// Dense row-major H x W raster of intensities.
class Image {
public:
    Image() = default;
    Image(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Image(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        require(data_.size() == rows_ * cols_, ErrorCode::dimension_mismatch,
                "image buffer does not match its shape");
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    bool same_shape(const Image& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// M co-registered intensity rasters with their per-date equivalent number of looks.
struct ImageStack {
    std::vector<Image> frames;
    std::vector<double> looks;

    ImageStack() = default;
    ImageStack(std::vector<Image> f, std::vector<double> l) : frames(std::move(f)), looks(std::move(l)) {}
    ImageStack(std::vector<Image> f, double l) : frames(std::move(f)), looks(frames.size(), l) {}

    std::size_t dates() const noexcept { return frames.size(); }
    std::size_t rows() const noexcept { return frames.empty() ? 0 : frames.front().rows(); }
    std::size_t cols() const noexcept { return frames.empty() ? 0 : frames.front().cols(); }

    const Image& operator[](std::size_t t) const { return frames[t]; }
    Image& operator[](std::size_t t) { return frames[t]; }

    /// Common ENL when every date shares it; throws otherwise.
    double common_looks() const {
        require(!looks.empty(), ErrorCode::invalid_input, "stack has no dates");
        for (double l : looks) {
            require(l == looks.front(), ErrorCode::invalid_input,
                    "dates carry different numbers of looks");
        }
        return looks.front();
    }

    friend bool operator==(const ImageStack&, const ImageStack&) = default;
};

inline void validate(const ImageStack& stack) {
    require(stack.dates() >= 1, ErrorCode::invalid_input, "stack must hold at least one date");
    require(stack.looks.size() == stack.dates(), ErrorCode::dimension_mismatch,
            "one looks value is required per date");
    const auto& first = stack.frames.front();
    require(first.rows() > 0 && first.cols() > 0, ErrorCode::invalid_input, "empty raster");
    for (std::size_t t = 0; t < stack.dates(); ++t) {
        require(stack.frames[t].same_shape(first), ErrorCode::dimension_mismatch,
                "every date must share the same raster shape");
        require(stack.looks[t] > 0.0, ErrorCode::invalid_parameter, "looks must be positive");
        for (double v : stack.frames[t].values()) {
            require(std::isfinite(v) && v >= 0.0, ErrorCode::invalid_input,
                    "intensities must be finite and non-negative");
        }
    }
}

/// Reflect-101 boundary index ("dcb|abcd|cba"), valid for any offset.
inline std::ptrdiff_t mirror_index(std::ptrdiff_t i, std::ptrdiff_t n) noexcept {
    if (n <= 1) {
        return 0;
    }
    const std::ptrdiff_t period = 2 * (n - 1);
    i %= period;
    if (i < 0) {
        i += period;
    }
    return i < n ? i : period - i;
}

inline double mirrored(const Image& img, std::ptrdiff_t r, std::ptrdiff_t c) noexcept {
    return img(static_cast<std::size_t>(mirror_index(r, static_cast<std::ptrdiff_t>(img.rows()))),
               static_cast<std::size_t>(mirror_index(c, static_cast<std::ptrdiff_t>(img.cols()))));
}

/// Sum over the (2*half+1)^2 window around every pixel, mirror-padded.
inline Image box_sum(const Image& src, std::size_t half) {
    const auto rows = static_cast<std::ptrdiff_t>(src.rows());
    const auto cols = static_cast<std::ptrdiff_t>(src.cols());
    const auto h = static_cast<std::ptrdiff_t>(half);
    Image horizontal(src.rows(), src.cols());
    std::vector<std::ptrdiff_t> col_index(static_cast<std::size_t>(cols + 2 * h));
    for (std::ptrdiff_t c = -h; c < cols + h; ++c) {
        col_index[static_cast<std::size_t>(c + h)] = mirror_index(c, cols);
    }
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
        const auto in = src.row(static_cast<std::size_t>(r));
        auto out = horizontal.row(static_cast<std::size_t>(r));
        for (std::ptrdiff_t c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (std::ptrdiff_t k = 0; k <= 2 * h; ++k) {
                acc += in[static_cast<std::size_t>(col_index[static_cast<std::size_t>(c + k)])];
            }
            out[static_cast<std::size_t>(c)] = acc;
        }
    }
    Image result(src.rows(), src.cols());
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
        auto out = result.row(static_cast<std::size_t>(r));
        for (std::ptrdiff_t k = -h; k <= h; ++k) {
            const auto in = horizontal.row(static_cast<std::size_t>(mirror_index(r + k, rows)));
            for (std::size_t c = 0; c < out.size(); ++c) {
                out[c] += in[c];
            }
        }
    }
    return result;
}

inline double mean(std::span<const double> values) {
    double acc = 0.0;
    for (double v : values) {
        acc += v;
    }
    return values.empty() ? 0.0 : acc / static_cast<double>(values.size());
}

inline unsigned default_threads() {
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Callers must write
/// disjoint outputs; the static block partition keeps results independent of
/// the worker count.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> workers;
        workers.reserve(threads);
        for (unsigned w = 0; w < threads; ++w) {
            const std::size_t begin = n * w / threads;
            const std::size_t end = n * (w + 1) / threads;
            workers.emplace_back([begin, end, &fn, &error = errors[w]] {
                try {
                    for (std::size_t i = begin; i < end; ++i) {
                        fn(i);
                    }
                } catch (...) {
                    error = std::current_exception();
                }
            });
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

} // namespace patf

#pragma once

// Multiplicative gamma speckle, multilooking, and simulated multitemporal
// scenes with parametric reflectivity trajectories.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "patf/error.hpp"
#include "patf/image.hpp"

namespace patf {

/// Seeded engine for one independent stream (e.g. one date or one worker block).
inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

/// I.i.d. draws from G[u, L]: mean u, variance u^2 / L.
inline std::vector<double> sample_speckle(double u, double looks, std::size_t n, std::uint64_t seed) {
    require(u > 0.0 && std::isfinite(u), ErrorCode::invalid_parameter, "reflectivity must be positive");
    require(looks > 0.0 && std::isfinite(looks), ErrorCode::invalid_parameter, "looks must be positive");
    require(n >= 1, ErrorCode::invalid_parameter, "sample count must be at least 1");
    auto engine = make_engine(seed);
    std::gamma_distribution<double> gamma(looks, u / looks);
    std::vector<double> out(n);
    for (auto& v : out) {
        v = gamma(engine);
    }
    return out;
}

/// Block-averages factor x factor pixels. Trailing rows/cols that do not fill
/// a whole block are cropped.
inline Image multilook(const Image& img, std::size_t factor) {
    require(factor >= 1, ErrorCode::invalid_parameter, "multilook factor must be >= 1");
    const std::size_t rows = img.rows() / factor;
    const std::size_t cols = img.cols() / factor;
    require(rows > 0 && cols > 0, ErrorCode::invalid_parameter, "multilook factor exceeds image size");
    Image out(rows, cols);
    const double norm = 1.0 / static_cast<double>(factor * factor);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (std::size_t i = 0; i < factor; ++i) {
                for (std::size_t j = 0; j < factor; ++j) {
                    acc += img(r * factor + i, c * factor + j);
                }
            }
            out(r, c) = factor == 1 ? acc : acc * norm;
        }
    }
    return out;
}

inline ImageStack multilook(const ImageStack& stack, std::size_t factor) {
    require(factor >= 1, ErrorCode::invalid_parameter, "multilook factor must be >= 1");
    ImageStack out;
    const double gain = static_cast<double>(factor * factor);
    for (std::size_t t = 0; t < stack.dates(); ++t) {
        out.frames.push_back(multilook(stack.frames[t], factor));
        out.looks.push_back(stack.looks[t] * gain);
    }
    return out;
}

enum class ProfileKind { constant, step, impulse, cycle, complex };

struct ProfileSegment;

/// Parametric temporal reflectivity trajectory.
///   constant: base
///   step:     base before onset, level from onset on
///   impulse:  level on [onset, end), base elsewhere
///   cycle:    base * (1 + amplitude * sin(2 pi t / period + phase))
///   complex:  piecewise; each segment's profile applies from its start date
struct ChangeProfile {
    ProfileKind kind = ProfileKind::constant;
    double base = 1.0;
    double level = 1.0;
    int onset = 0;
    int end = 0;
    double amplitude = 0.0;
    double period = 1.0;
    double phase = 0.0;
    std::vector<ProfileSegment> segments;

    static ChangeProfile constant(double u);
    static ChangeProfile step(double u0, double u1, int t0);
    static ChangeProfile impulse(double u0, double u1, int t0, int t1);
    static ChangeProfile cycle(double u0, double a, double period, double phase);
    static ChangeProfile complex(std::vector<ProfileSegment> segs);
};

struct ProfileSegment {
    int start = 0;
    ChangeProfile profile;
};

inline ChangeProfile ChangeProfile::constant(double u) {
    ChangeProfile p;
    p.base = u;
    return p;
}

inline ChangeProfile ChangeProfile::step(double u0, double u1, int t0) {
    ChangeProfile p;
    p.kind = ProfileKind::step;
    p.base = u0;
    p.level = u1;
    p.onset = t0;
    return p;
}

inline ChangeProfile ChangeProfile::impulse(double u0, double u1, int t0, int t1) {
    ChangeProfile p;
    p.kind = ProfileKind::impulse;
    p.base = u0;
    p.level = u1;
    p.onset = t0;
    p.end = t1;
    return p;
}

inline ChangeProfile ChangeProfile::cycle(double u0, double a, double period, double phase) {
    ChangeProfile p;
    p.kind = ProfileKind::cycle;
    p.base = u0;
    p.amplitude = a;
    p.period = period;
    p.phase = phase;
    return p;
}

inline ChangeProfile ChangeProfile::complex(std::vector<ProfileSegment> segs) {
    ChangeProfile p;
    p.kind = ProfileKind::complex;
    p.segments = std::move(segs);
    return p;
}

namespace detail {

inline double profile_value(const ChangeProfile& p, int t) {
    switch (p.kind) {
    case ProfileKind::constant: return p.base;
    case ProfileKind::step: return t < p.onset ? p.base : p.level;
    case ProfileKind::impulse: return (t >= p.onset && t < p.end) ? p.level : p.base;
    case ProfileKind::cycle:
        return p.base * (1.0 + p.amplitude * std::sin(2.0 * std::numbers::pi * t / p.period + p.phase));
    case ProfileKind::complex: {
        const ChangeProfile* active = &p.segments.front().profile;
        for (const auto& seg : p.segments) {
            if (seg.start <= t) {
                active = &seg.profile;
            }
        }
        return profile_value(*active, t);
    }
    }
    return 0.0;
}

inline void check_profile(const ChangeProfile& p) {
    switch (p.kind) {
    case ProfileKind::impulse:
        require(p.onset <= p.end, ErrorCode::invalid_parameter, "impulse must end after it starts");
        break;
    case ProfileKind::cycle:
        require(p.period > 0.0, ErrorCode::invalid_parameter, "cycle period must be positive");
        break;
    case ProfileKind::complex: {
        require(!p.segments.empty(), ErrorCode::invalid_parameter, "complex profile needs segments");
        require(p.segments.front().start == 0, ErrorCode::invalid_parameter,
                "first complex segment must start at date 0");
        for (std::size_t i = 0; i < p.segments.size(); ++i) {
            require(p.segments[i].profile.kind != ProfileKind::complex, ErrorCode::invalid_parameter,
                    "complex segments cannot nest");
            if (i > 0) {
                require(p.segments[i].start > p.segments[i - 1].start, ErrorCode::invalid_parameter,
                        "complex segment starts must increase");
            }
            check_profile(p.segments[i].profile);
        }
        break;
    }
    default: break;
    }
}

} // namespace detail

/// Noise-free reflectivity for dates 0..M-1. Throws if any value is not > 0.
inline std::vector<double> render_profile(const ChangeProfile& profile, std::size_t dates) {
    require(dates >= 1, ErrorCode::invalid_parameter, "profile needs at least one date");
    detail::check_profile(profile);
    std::vector<double> out(dates);
    for (std::size_t t = 0; t < dates; ++t) {
        const double v = detail::profile_value(profile, static_cast<int>(t));
        require(std::isfinite(v) && v > 0.0, ErrorCode::invalid_parameter,
                "profile produces non-positive reflectivity at date " + std::to_string(t));
        out[t] = v;
    }
    return out;
}

struct Rect {
    std::size_t row = 0;
    std::size_t col = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    bool contains(std::size_t r, std::size_t c) const noexcept {
        return r >= row && r < row + height && c >= col && c < col + width;
    }
    bool overlaps(const Rect& o) const noexcept {
        return row < o.row + o.height && o.row < row + height && col < o.col + o.width &&
               o.col < col + width;
    }
};

struct ChangeRegion {
    Rect rect;
    ChangeProfile profile;
};

struct SceneSpec {
    Image background;
    std::vector<ChangeRegion> regions;
};

inline void validate(const SceneSpec& spec) {
    require(!spec.background.empty(), ErrorCode::invalid_parameter, "scene background is empty");
    for (double v : spec.background.values()) {
        require(std::isfinite(v) && v >= 0.0, ErrorCode::invalid_parameter,
                "background reflectivity must be finite and >= 0");
    }
    for (std::size_t i = 0; i < spec.regions.size(); ++i) {
        const Rect& r = spec.regions[i].rect;
        require(r.height > 0 && r.width > 0 && r.row + r.height <= spec.background.rows() &&
                    r.col + r.width <= spec.background.cols(),
                ErrorCode::invalid_parameter, "region " + std::to_string(i) + " lies outside the raster");
        for (std::size_t j = 0; j < i; ++j) {
            require(!r.overlaps(spec.regions[j].rect), ErrorCode::invalid_parameter,
                    "regions " + std::to_string(j) + " and " + std::to_string(i) + " overlap");
        }
    }
}

inline Image constant_background(std::size_t rows, std::size_t cols, double u) {
    require(u > 0.0, ErrorCode::invalid_parameter, "background level must be positive");
    return Image(rows, cols, u);
}

/// Piecewise-constant field mosaic: nearest-seed (Voronoi) cells with
/// log-uniform levels in [low, high].
inline Image mosaic_background(std::size_t rows, std::size_t cols, std::size_t cells, double low,
                               double high, std::uint64_t seed) {
    require(cells >= 1, ErrorCode::invalid_parameter, "mosaic needs at least one cell");
    require(low > 0.0 && high >= low, ErrorCode::invalid_parameter, "mosaic levels must satisfy 0 < low <= high");
    auto engine = make_engine(seed, 0x6d6f73);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    struct Site {
        double r, c, level;
    };
    std::vector<Site> sites(cells);
    for (auto& s : sites) {
        s.r = unit(engine) * static_cast<double>(rows);
        s.c = unit(engine) * static_cast<double>(cols);
        s.level = low * std::pow(high / low, unit(engine));
    }
    Image out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            double best = INFINITY;
            double level = sites.front().level;
            for (const auto& s : sites) {
                const double dr = static_cast<double>(r) + 0.5 - s.r;
                const double dc = static_cast<double>(c) + 0.5 - s.c;
                const double d = dr * dr + dc * dc;
                if (d < best) {
                    best = d;
                    level = s.level;
                }
            }
            out(r, c) = level;
        }
    }
    return out;
}

/// Multiplies `img` by a unit-mean texture: G[1, texture_looks] samples
/// averaged over a (2 smooth_half + 1)^2 box, which correlates neighbours.
inline void apply_texture(Image& img, double texture_looks, std::size_t smooth_half, std::uint64_t seed) {
    require(texture_looks > 0.0 && std::isfinite(texture_looks), ErrorCode::invalid_parameter,
            "texture looks must be positive");
    auto engine = make_engine(seed, 0x747874);
    std::gamma_distribution<double> gamma(texture_looks, 1.0 / texture_looks);
    Image field(img.rows(), img.cols());
    for (double& v : field.values()) {
        v = gamma(engine);
    }
    const Image sums = box_sum(field, smooth_half);
    const double area = static_cast<double>((2 * smooth_half + 1) * (2 * smooth_half + 1));
    for (std::size_t i = 0; i < img.size(); ++i) {
        img.values()[i] *= sums.values()[i] / area;
    }
}

/// Sets `count` random pixels to `level` (bright point scatterers).
inline void add_point_targets(Image& img, std::size_t count, double level, std::uint64_t seed) {
    require(level > 0.0, ErrorCode::invalid_parameter, "target level must be positive");
    auto engine = make_engine(seed, 0x747267);
    std::uniform_int_distribution<std::size_t> pick(0, img.size() - 1);
    for (std::size_t i = 0; i < count; ++i) {
        img.values()[pick(engine)] = level;
    }
}

struct SimulatedStack {
    ImageStack noise_free;
    ImageStack noisy;
};

/// noise_free(t) is the background with each region overridden by its
/// profile at t; noisy multiplies it by independent G[1, L] speckle.
/// Date t draws from its own stream so the result does not depend on order.
inline SimulatedStack simulate_stack(const SceneSpec& spec, std::size_t dates, double looks,
                                     std::uint64_t seed) {
    require(dates >= 1, ErrorCode::invalid_parameter, "simulation needs at least one date");
    require(looks > 0.0 && std::isfinite(looks), ErrorCode::invalid_parameter, "looks must be positive");
    validate(spec);
    std::vector<std::vector<double>> trajectories;
    for (const auto& region : spec.regions) {
        trajectories.push_back(render_profile(region.profile, dates));
    }
    SimulatedStack sim;
    for (std::size_t t = 0; t < dates; ++t) {
        Image clean = spec.background;
        for (std::size_t k = 0; k < spec.regions.size(); ++k) {
            const Rect& r = spec.regions[k].rect;
            for (std::size_t i = r.row; i < r.row + r.height; ++i) {
                for (std::size_t j = r.col; j < r.col + r.width; ++j) {
                    clean(i, j) = trajectories[k][t];
                }
            }
        }
        auto engine = make_engine(seed, t + 1);
        std::gamma_distribution<double> gamma(looks, 1.0 / looks);
        Image noisy(clean.rows(), clean.cols());
        auto in = clean.values();
        auto out = noisy.values();
        for (std::size_t i = 0; i < in.size(); ++i) {
            out[i] = in[i] * gamma(engine);
        }
        sim.noise_free.frames.push_back(std::move(clean));
        sim.noisy.frames.push_back(std::move(noisy));
    }
    sim.noise_free.looks.assign(dates, looks);
    sim.noisy.looks.assign(dates, looks);
    return sim;
}

} // namespace patf

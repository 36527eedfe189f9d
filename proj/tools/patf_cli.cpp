// Command-line front end: simulate, calibrate, despeckle, evaluate, metrics.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "patf/patf.hpp"

namespace {

namespace fs = std::filesystem;

struct SimulateArgs {
    std::string scene;
    std::size_t dates = 64;
    double looks = 1.0;
    std::uint64_t seed = 0;
    std::string clean_out;
    std::string noisy_out;
};

struct SimilarityArgs {
    std::size_t patch_half = 3;
    std::optional<double> looks;
    double alpha_low = 0.08;
    double alpha_high = 0.92;
    double alpha_h = 0.92;
    std::size_t samples = 1'000'000;
    std::uint64_t seed = 0;
    std::string cache_dir;
    std::optional<double> h;
    std::optional<double> tau1;
    std::optional<double> tau2;
};

struct DespeckleArgs {
    std::string input;
    std::string output;
    std::string method = "patf";
    std::size_t window_half = 2;
    std::size_t search_half = 10;
    std::size_t n_similar = 16;
    bool window_only = false;
    std::optional<std::size_t> date;
    std::string preview;
    std::string scaling = "log";
};

struct EvaluateArgs {
    std::string noisy;
    std::string denoised;
    std::optional<std::size_t> date;
    std::size_t patch_size = 8;
    std::string denominator = "as_printed";
    std::string map_out;
    std::string ppm_prefix;
};

struct MetricsArgs {
    std::string reference;
    std::string estimate;
    std::optional<std::size_t> date;
    std::optional<double> peak;
    std::size_t window = 11;
    std::vector<std::size_t> enl_region;
};

void print_value(const std::string& key, double value) {
    std::cout << key << " = " << patf::format_g6(value) << '\n';
}

fs::path cache_dir_or_default(const std::string& flag) {
    return flag.empty() ? patf::default_cache_dir() : fs::path(flag);
}

void require_distinct(const std::string& input, const std::string& output) {
    const auto in = patf::stack_paths(input);
    const auto out = patf::stack_paths(output);
    patf::require(fs::weakly_canonical(in.payload) != fs::weakly_canonical(out.payload),
                  patf::ErrorCode::invalid_parameter, "output would overwrite the input stack");
}

patf::SimilarityParams similarity_params(const SimilarityArgs& a, double looks) {
    patf::SimilarityParams p;
    p.patch_half = a.patch_half;
    p.looks = looks;
    p.alpha_low = a.alpha_low;
    p.alpha_high = a.alpha_high;
    p.alpha_h = a.alpha_h;
    return p;
}

patf::CalibrationOptions calibration_options(const SimilarityArgs& a, unsigned threads) {
    patf::CalibrationOptions o;
    o.samples = a.samples;
    o.seed = a.seed;
    o.threads = threads;
    return o;
}

/// Explicit thresholds win; any missing value comes from the (cached) calibration.
patf::SimilarityParams resolve_thresholds(const SimilarityArgs& a, double looks, unsigned threads) {
    auto p = similarity_params(a, looks);
    if (!(a.h && a.tau1 && a.tau2)) {
        p = patf::calibrate_cached(p, calibration_options(a, threads), cache_dir_or_default(a.cache_dir));
    }
    p.h = a.h.value_or(p.h);
    p.tau1 = a.tau1.value_or(p.tau1);
    p.tau2 = a.tau2.value_or(p.tau2);
    patf::validate(p, true);
    return p;
}

void add_similarity_flags(CLI::App* cmd, SimilarityArgs& a, bool thresholds) {
    cmd->add_option("--patch-half", a.patch_half, "Similarity patch half-width (patch is 2k+1 square)")
        ->capture_default_str();
    cmd->add_option("--alpha-low", a.alpha_low, "H0 quantile level of tau1")->capture_default_str();
    cmd->add_option("--alpha-high", a.alpha_high, "H0 quantile level of tau2")->capture_default_str();
    cmd->add_option("--alpha-h", a.alpha_h, "H0 quantile level used for h")->capture_default_str();
    cmd->add_option("--samples", a.samples, "Monte-Carlo sample count for calibration")->capture_default_str();
    cmd->add_option("--seed", a.seed, "Calibration seed")->capture_default_str();
    cmd->add_option("--cache-dir", a.cache_dir, "Calibration cache directory (default: $PATF_CACHE_DIR)");
    if (thresholds) {
        cmd->add_option("--looks", a.looks, "Looks used for similarity (default: stack looks)");
        cmd->add_option("--smoothing-h", a.h, "Smoothing parameter h override");
        cmd->add_option("--tau1", a.tau1, "Lower threshold override");
        cmd->add_option("--tau2", a.tau2, "Upper threshold override");
    }
}

int run_simulate(const SimulateArgs& a) {
    const auto spec = patf::load_scene(a.scene);
    const auto sim = patf::simulate_stack(spec, a.dates, a.looks, a.seed);
    patf::write_stack(sim.noise_free, a.clean_out);
    patf::write_stack(sim.noisy, a.noisy_out);
    std::cout << "rows = " << sim.noisy.rows() << '\n'
              << "cols = " << sim.noisy.cols() << '\n'
              << "dates = " << sim.noisy.dates() << '\n';
    print_value("looks", a.looks);
    return 0;
}

int run_calibrate(const SimilarityArgs& a, double looks, unsigned threads) {
    const auto p = similarity_params(a, looks);
    const auto o = calibration_options(a, threads);
    const auto dir = cache_dir_or_default(a.cache_dir);
    const auto result = patf::calibrate_cached(p, o, dir);
    std::cout << "cache = " << (dir / patf::calibration_cache_name(p, o)).string() << '\n';
    print_value("tau1", result.tau1);
    print_value("tau2", result.tau2);
    print_value("h", result.h);
    return 0;
}

int run_despeckle(const DespeckleArgs& a, const SimilarityArgs& s, unsigned threads) {
    require_distinct(a.input, a.output);
    const auto stack = patf::read_stack(a.input);
    patf::FilterConfig config;
    config.method = patf::parse_method(a.method);
    config.window_half = a.window_half;
    config.search_half = a.search_half;
    config.n_similar = a.n_similar;
    config.window_only = a.window_only;
    config.date = a.date;
    config.threads = threads;
    const double looks = s.looks.value_or(stack.common_looks());
    config.sim = similarity_params(s, looks);
    if (config.method == patf::Method::patf || config.method == patf::Method::anltf) {
        config.sim = resolve_thresholds(s, looks, threads);
    }
    patf::FilterDiagnostics diag;
    const auto out = patf::despeckle(stack, config, &diag);
    patf::write_stack(out, a.output);
    if (!a.preview.empty()) {
        patf::export_pgm(out[0], a.preview, patf::parse_scaling(a.scaling));
    }
    std::cout << "method = " << patf::to_string(config.method) << '\n' << "dates = " << out.dates() << '\n';
    if (config.method == patf::Method::patf || config.method == patf::Method::anltf) {
        print_value("h", config.sim.h);
        print_value("tau1", config.sim.tau1);
        print_value("tau2", config.sim.tau2);
    }
    if (config.method == patf::Method::nltf) {
        std::cout << "reduced_candidate_pixels = " << diag.reduced_candidate_pixels << '\n';
    }
    return 0;
}

patf::ImageStack select_date(const patf::ImageStack& stack, std::optional<std::size_t> date) {
    if (!date) {
        return stack;
    }
    patf::require(*date < stack.dates(), patf::ErrorCode::invalid_parameter, "date index out of range");
    return patf::ImageStack{{stack[*date]}, {stack.looks[*date]}};
}

int run_evaluate(const EvaluateArgs& a) {
    const auto noisy = select_date(patf::read_stack(a.noisy), a.date);
    const auto denoised = select_date(patf::read_stack(a.denoised), a.date);
    patf::ResidualOptions options;
    options.patch_size = a.patch_size;
    if (a.denominator == "centered") {
        options.denominator = patf::ResidualDenominator::centered;
    } else {
        patf::require(a.denominator == "as_printed", patf::ErrorCode::invalid_parameter,
                      "denominator must be 'as_printed' or 'centered'");
    }
    const auto maps = patf::stack_quality(noisy, denoised, options);
    for (std::size_t t = 0; t < maps.size(); ++t) {
        print_value("score_" + std::to_string(a.date.value_or(t)), maps[t].score);
        if (maps[t].undefined_patches > 0) {
            std::cout << "undefined_patches_" << a.date.value_or(t) << " = " << maps[t].undefined_patches << '\n';
        }
    }
    print_value("w_score", patf::mean_score(maps));
    if (!a.map_out.empty()) {
        patf::ImageStack out;
        for (const auto& m : maps) {
            out.frames.push_back(m.map);
            out.looks.push_back(1.0);
        }
        require_distinct(a.noisy, a.map_out);
        require_distinct(a.denoised, a.map_out);
        patf::write_stack(out, a.map_out);
    }
    if (!a.ppm_prefix.empty()) {
        for (std::size_t t = 0; t < maps.size(); ++t) {
            patf::export_quality_ppm(maps[t], a.ppm_prefix + "_" + std::to_string(a.date.value_or(t)) + ".ppm");
        }
    }
    return 0;
}

int run_metrics(const MetricsArgs& a) {
    const auto reference = select_date(patf::read_stack(a.reference), a.date);
    const auto estimate = select_date(patf::read_stack(a.estimate), a.date);
    patf::MetricReport report;
    report.psnr = patf::psnr(reference, estimate, a.peak);
    report.mssim = patf::mssim(reference, estimate, a.window, a.peak);
    if (!a.enl_region.empty()) {
        patf::require(a.enl_region.size() == 4, patf::ErrorCode::invalid_parameter,
                      "--enl-region takes row col height width");
        const patf::Rect region{a.enl_region[0], a.enl_region[1], a.enl_region[2], a.enl_region[3]};
        std::vector<double> values;
        for (const auto& frame : estimate.frames) {
            patf::require(region.row + region.height <= frame.rows() && region.col + region.width <= frame.cols(),
                          patf::ErrorCode::invalid_parameter, "ENL region lies outside the raster");
            for (std::size_t r = region.row; r < region.row + region.height; ++r) {
                for (std::size_t c = region.col; c < region.col + region.width; ++c) {
                    values.push_back(frame(r, c));
                }
            }
        }
        report.enl = patf::enl(values);
    }
    patf::write_report(std::cout, report);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multitemporal SAR despeckling toolkit"};
    app.require_subcommand(1);
    unsigned threads = patf::default_threads();
    app.add_option("--threads", threads, "Maximum worker threads")->check(CLI::PositiveNumber);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Write noise-free and speckled stacks from a scene file");
    simulate->add_option("--scene", sim.scene, "Scene description file")->required()->check(CLI::ExistingFile);
    simulate->add_option("--dates", sim.dates, "Number of dates")->capture_default_str();
    simulate->add_option("--looks", sim.looks, "Looks of the simulated speckle")->capture_default_str();
    simulate->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
    simulate->add_option("--clean", sim.clean_out, "Output base path of the noise-free stack")->required();
    simulate->add_option("--noisy", sim.noisy_out, "Output base path of the speckled stack")->required();

    SimilarityArgs cal_args;
    double cal_looks = 1.0;
    auto* calibrate = app.add_subcommand("calibrate", "Compute and cache tau1, tau2 and h");
    calibrate->add_option("--looks", cal_looks, "Looks of the data")->capture_default_str();
    add_similarity_flags(calibrate, cal_args, false);

    DespeckleArgs desp;
    SimilarityArgs desp_sim;
    auto* despeckle = app.add_subcommand("despeckle", "Filter a stack");
    despeckle->add_option("--input", desp.input, "Input stack")->required();
    despeckle->add_option("--output", desp.output, "Output stack")->required();
    despeckle->add_option("--method", desp.method, "patf, uta, nltf, anltf or mean")
        ->capture_default_str()
        ->check(CLI::IsMember({"patf", "uta", "nltf", "anltf", "mean"}));
    despeckle->add_option("--window-half", desp.window_half, "UTA/ANLTF window half-width")->capture_default_str();
    despeckle->add_option("--search-half", desp.search_half, "NLTF search half-width")->capture_default_str();
    despeckle->add_option("--n-similar", desp.n_similar, "NLTF number of similar patches")->capture_default_str();
    despeckle->add_flag("--window-only", desp.window_only, "Baselines: output the spatial estimate only");
    despeckle->add_option("--date", desp.date, "Filter this date only");
    despeckle->add_option("--preview", desp.preview, "Write a PGM preview of the first output date");
    despeckle->add_option("--scaling", desp.scaling, "Preview scaling")
        ->capture_default_str()
        ->check(CLI::IsMember({"linear", "log", "quantile"}));
    add_similarity_flags(despeckle, desp_sim, true);

    EvaluateArgs eval;
    auto* evaluate = app.add_subcommand("evaluate", "Residual quality of a denoised stack");
    evaluate->add_option("--noisy", eval.noisy, "Noisy stack")->required();
    evaluate->add_option("--denoised", eval.denoised, "Denoised stack")->required();
    evaluate->add_option("--date", eval.date, "Evaluate this date only");
    evaluate->add_option("--patch-size", eval.patch_size, "Residual patch size")->capture_default_str();
    evaluate->add_option("--denominator", eval.denominator, "as_printed or centered")
        ->capture_default_str()
        ->check(CLI::IsMember({"as_printed", "centered"}));
    evaluate->add_option("--map-out", eval.map_out, "Write the quality maps as a stack");
    evaluate->add_option("--ppm", eval.ppm_prefix, "Write 4-class PPM renderings with this prefix");

    MetricsArgs met;
    auto* metrics = app.add_subcommand("metrics", "Full-reference metrics of an estimate");
    metrics->add_option("--reference", met.reference, "Reference stack")->required();
    metrics->add_option("--estimate", met.estimate, "Estimated stack")->required();
    metrics->add_option("--date", met.date, "Compare this date only");
    metrics->add_option("--peak", met.peak, "PSNR/MSSIM peak (default: reference maximum)");
    metrics->add_option("--window", met.window, "MSSIM window size")->capture_default_str();
    metrics->add_option("--enl-region", met.enl_region, "ENL region of the estimate: row col height width")
        ->expected(4);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "patf: " << e.what() << '\n' << app.help();
        return 2;
    }

    try {
        if (*simulate) {
            return run_simulate(sim);
        }
        if (*calibrate) {
            return run_calibrate(cal_args, cal_looks, threads);
        }
        if (*despeckle) {
            return run_despeckle(desp, desp_sim, threads);
        }
        if (*evaluate) {
            return run_evaluate(eval);
        }
        if (*metrics) {
            return run_metrics(met);
        }
    } catch (const std::exception& e) {
        std::cerr << "patf: error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "patf/calibration.hpp"

using namespace patf;
namespace fs = std::filesystem;

namespace {

CalibrationOptions small_run(std::uint64_t seed = 1) {
    CalibrationOptions o;
    o.samples = kMinCalibrationSamples;
    o.seed = seed;
    return o;
}

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("patf_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST(EmpiricalQuantile, InterpolatesOrderStatistics) {
    std::vector<double> v{5, 1, 4, 2, 3};
    EXPECT_DOUBLE_EQ(empirical_quantile(v, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(empirical_quantile(v, 1.0), 5.0);
    EXPECT_DOUBLE_EQ(empirical_quantile(v, 0.5), 3.0);
    EXPECT_DOUBLE_EQ(empirical_quantile(v, 0.125), 1.5);
    std::vector<double> empty;
    EXPECT_THROW(empirical_quantile(empty, 0.5), Error);
}

TEST(Calibrate, TooFewSamplesIsCalibrationUncertainty) {
    CalibrationOptions o;
    o.samples = kMinCalibrationSamples - 1;
    try {
        calibrate(SimilarityParams{}, o);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::calibration_uncertainty);
    }
}

TEST(Calibrate, ThresholdsAreOrderedAboveMinimum) {
    const auto p = calibrate(SimilarityParams{}, small_run());
    EXPECT_TRUE(p.calibrated());
    EXPECT_GT(p.tau1, min_dissimilarity(p));
    EXPECT_LT(p.tau1, p.tau2);
    EXPECT_GT(p.h, 0.0);
}

TEST(Calibrate, HIsQuantileMinusMean) {
    SimilarityParams p;
    p.patch_half = 1;
    auto d = sample_h0_dissimilarities(p, small_run(4));
    double mean = 0.0;
    for (double v : d) {
        mean += v;
    }
    mean /= static_cast<double>(d.size());
    const double q = empirical_quantile(d, p.alpha_h);
    const auto out = calibrate(p, small_run(4));
    EXPECT_DOUBLE_EQ(out.h, q - mean);
}

TEST(Calibrate, QuantileFrequenciesHoldOnFreshSample) {
    SimilarityParams p;
    p.patch_half = 2;
    const auto cal = calibrate(p, small_run(10));
    const auto fresh = sample_h0_dissimilarities(p, small_run(11));
    double below = 0.0;
    double above = 0.0;
    for (double d : fresh) {
        below += d < cal.tau1;
        above += d > cal.tau2;
    }
    const auto n = static_cast<double>(fresh.size());
    EXPECT_NEAR(below / n, 0.08, 0.01);
    EXPECT_NEAR(above / n, 0.08, 0.01);
}

TEST(Calibrate, InvariantToReflectivity) {
    auto o1 = small_run(20);
    auto o2 = small_run(21);
    o2.reflectivity = 100.0;
    const auto a = calibrate(SimilarityParams{}, o1);
    const auto b = calibrate(SimilarityParams{}, o2);
    EXPECT_NEAR(a.tau1, b.tau1, 0.15);
    EXPECT_NEAR(a.tau2, b.tau2, 0.15);
    EXPECT_NEAR(a.h, b.h, 0.15);
}

TEST(Calibrate, IndependentOfWorkerCount) {
    auto one = small_run(30);
    one.threads = 1;
    auto three = small_run(30);
    three.threads = 3;
    EXPECT_EQ(sample_h0_dissimilarities(SimilarityParams{}, one),
              sample_h0_dissimilarities(SimilarityParams{}, three));
}

TEST(Calibrate, MoreLooksTightenTheDistribution) {
    SimilarityParams one;
    SimilarityParams four;
    four.looks = 4.0;
    const auto a = calibrate(one, small_run(40));
    const auto b = calibrate(four, small_run(40));
    // Relative spread (tau2 - tau1) / minimum shrinks as speckle weakens.
    EXPECT_LT((b.tau2 - b.tau1) / min_dissimilarity(b), (a.tau2 - a.tau1) / min_dissimilarity(a));
}

TEST(CalibrationCache, RoundTripsExactly) {
    const auto dir = fresh_dir("cache_roundtrip");
    SimilarityParams p;
    p.tau1 = 45.123456789012345;
    p.tau2 = 53.3;
    p.h = 4.300000000000001;
    const auto o = small_run(3);
    const auto path = dir / calibration_cache_name(p, o);
    write_calibration(path, p, o);
    const auto back = read_calibration(path, SimilarityParams{}, o);
    ASSERT_TRUE(back.has_value());
    EXPECT_EQ(back->tau1, p.tau1);
    EXPECT_EQ(back->tau2, p.tau2);
    EXPECT_EQ(back->h, p.h);
}

TEST(CalibrationCache, KeyMismatchIsMiss) {
    const auto dir = fresh_dir("cache_mismatch");
    SimilarityParams p;
    p.tau1 = 1.0;
    p.tau2 = 2.0;
    p.h = 0.5;
    const auto o = small_run(3);
    const auto path = dir / "entry.txt";
    write_calibration(path, p, o);
    SimilarityParams other = p;
    other.looks = 2.0;
    EXPECT_FALSE(read_calibration(path, other, o).has_value());
    auto other_seed = o;
    other_seed.seed = 4;
    EXPECT_FALSE(read_calibration(path, p, other_seed).has_value());
    EXPECT_FALSE(read_calibration(dir / "absent.txt", p, o).has_value());
}

TEST(CalibrationCache, CachedCallReadsStoredValues) {
    const auto dir = fresh_dir("cache_hit");
    SimilarityParams p;
    p.patch_half = 1;
    const auto o = small_run(5);
    const auto first = calibrate_cached(p, o, dir);
    const auto path = dir / calibration_cache_name(p, o);
    ASSERT_TRUE(fs::exists(path));
    SimilarityParams planted = first;
    planted.h = 123.5;
    write_calibration(path, planted, o);
    EXPECT_EQ(calibrate_cached(p, o, dir).h, 123.5);
}

TEST(CalibrationCache, EnvironmentSelectsDirectory) {
    ::setenv("PATF_CACHE_DIR", "/tmp/patf_env_cache", 1);
    EXPECT_EQ(default_cache_dir(), fs::path("/tmp/patf_env_cache"));
    ::unsetenv("PATF_CACHE_DIR");
    ::setenv("XDG_CACHE_HOME", "/tmp/xdg", 1);
    EXPECT_EQ(default_cache_dir(), fs::path("/tmp/xdg/patf"));
    ::unsetenv("XDG_CACHE_HOME");
}

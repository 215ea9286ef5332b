#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "agri/errors.hpp"
#include "agri/stats.hpp"

using namespace agri;

namespace {

// Closed-form two-sided critical value for df = 2: F(t) = 1/2 + t / (2 sqrt(2 + t^2)).
double t_critical_df2(double confidence) {
    const double p = 0.5 + confidence / 2.0;
    return (2.0 * p - 1.0) * std::sqrt(2.0 / (4.0 * p * (1.0 - p)));
}

// df = 1 is the Cauchy distribution.
double t_critical_df1(double confidence) { return std::tan(M_PI * confidence / 2.0); }

} // namespace

TEST(Stats, TCriticalMatchesClosedForms) {
    for (double c : {0.80, 0.90, 0.95, 0.99}) {
        EXPECT_NEAR(stats::t_critical(c, 2), t_critical_df2(c), 1e-9) << c;
        EXPECT_NEAR(stats::t_critical(c, 1), t_critical_df1(c), 1e-7) << c;
    }
    EXPECT_NEAR(stats::t_critical(0.95, 2), 4.302652729911275, 1e-9);
}

TEST(Stats, MeanCiOfThreeRuns) {
    const std::vector<double> runs{80.0, 90.0, 100.0};
    const auto ci = stats::mean_ci(runs);
    EXPECT_DOUBLE_EQ(ci.mean, 90.0);
    EXPECT_EQ(ci.n, 3);
    const double oracle = t_critical_df2(0.95) * 10.0 / std::sqrt(3.0);
    EXPECT_NEAR(ci.half_width, oracle, 1e-9);
    EXPECT_NEAR(ci.half_width, 24.84, 0.01);
}

TEST(Stats, IdenticalSamplesHaveZeroWidth) {
    const std::vector<double> same{90.0, 90.0, 90.0};
    EXPECT_EQ(stats::mean_ci(same).half_width, 0.0);
    const std::vector<double> one{42.0};
    EXPECT_EQ(stats::mean_ci(one).half_width, 0.0);
}

TEST(Stats, SampleStddev) {
    const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
    EXPECT_NEAR(stats::sample_stddev(v), std::sqrt(32.0 / 7.0), 1e-12);
    EXPECT_EQ(stats::sample_stddev(std::vector<double>{3.0}), 0.0);
}

TEST(Stats, OlsRecoversLine) {
    const std::vector<double> x{0, 1, 2, 3, 4};
    std::vector<double> y;
    for (double xi : x) {
        y.push_back(-2.5 * xi + 7.0);
    }
    const auto fit = stats::ols(x, y);
    EXPECT_NEAR(fit.slope, -2.5, 1e-12);
    EXPECT_NEAR(fit.intercept, 7.0, 1e-12);
}

TEST(Stats, OlsNeedsDistinctX) {
    const std::vector<double> x{1, 1, 1};
    const std::vector<double> y{1, 2, 3};
    EXPECT_THROW((void)stats::ols(x, y), InsufficientData);
    EXPECT_THROW((void)stats::ols(std::vector<double>{1}, std::vector<double>{1}), InsufficientData);
}

TEST(Stats, NearestRankPercentile) {
    std::vector<double> v;
    for (int i = 100; i >= 1; --i) {
        v.push_back(i);
    }
    EXPECT_EQ(stats::percentile(v, 99), 99.0);
    EXPECT_EQ(stats::percentile(v, 50), 50.0);
    EXPECT_EQ(stats::percentile(v, 100), 100.0);
    EXPECT_EQ(stats::percentile(v, 0), 1.0);
}

TEST(StatsProperty, CiWidthNonNegativeAndContainsMean) {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(2 + trial % 5);
        for (auto& x : v) {
            x = u(rng);
        }
        const auto ci = stats::mean_ci(v);
        EXPECT_GE(ci.half_width, 0.0);
        EXPECT_NEAR(ci.mean, stats::mean(v), 1e-9);
    }
}

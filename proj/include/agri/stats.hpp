#pragma once

#include <span>
#include <vector>

namespace agri::stats {

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Ordinary least squares of y on x. Requires >= 2 points with distinct x;
/// throws agri::InsufficientData otherwise.
LinearFit ols(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> v);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_stddev(std::span<const double> v);

/// Two-sided Student-t critical value, e.g. t_critical(0.95, 2) = 4.3027.
double t_critical(double confidence, int df);

struct MeanCI {
    double mean = 0.0;
    double half_width = 0.0;
    int n = 0;
};

/// Mean with a Student-t confidence interval over the samples (df = n - 1).
/// With a single sample the half-width is reported as 0.
MeanCI mean_ci(std::span<const double> samples, double confidence = 0.95);

/// Nearest-rank percentile (p in [0, 100]) of an unsorted sample.
double percentile(std::vector<double> samples, double p);

} // namespace agri::stats

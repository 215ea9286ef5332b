#include "agri/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

#include "agri/errors.hpp"

namespace agri::stats {

LinearFit ols(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("ols: x and y differ in length");
    }
    if (x.size() < 2) {
        throw InsufficientData("least squares needs at least two points");
    }
    const double mx = mean(x);
    const double my = mean(y);
    double sxx = 0.0;
    double sxy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) {
        throw InsufficientData("least squares needs distinct x values");
    }
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    return fit;
}

double mean(std::span<const double> v) {
    if (v.empty()) {
        throw InsufficientData("mean of empty series");
    }
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_stddev(std::span<const double> v) {
    if (v.size() < 2) {
        return 0.0;
    }
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) {
        ss += (x - m) * (x - m);
    }
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double t_critical(double confidence, int df) {
    if (df < 1) {
        throw std::invalid_argument("t_critical: df must be >= 1");
    }
    boost::math::students_t dist(df);
    return boost::math::quantile(dist, 1.0 - (1.0 - confidence) / 2.0);
}

MeanCI mean_ci(std::span<const double> samples, double confidence) {
    MeanCI out;
    out.n = static_cast<int>(samples.size());
    out.mean = mean(samples);
    if (samples.size() >= 2) {
        out.half_width = t_critical(confidence, out.n - 1) * sample_stddev(samples) /
                         std::sqrt(static_cast<double>(out.n));
    }
    return out;
}

double percentile(std::vector<double> samples, double p) {
    if (samples.empty()) {
        throw InsufficientData("percentile of empty sample");
    }
    if (p < 0.0 || p > 100.0) {
        throw std::invalid_argument("percentile must be within [0, 100]");
    }
    std::sort(samples.begin(), samples.end());
    auto rank = static_cast<size_t>(std::ceil(p / 100.0 * static_cast<double>(samples.size())));
    rank = std::clamp<size_t>(rank, 1, samples.size());
    return samples[rank - 1];
}

} // namespace agri::stats

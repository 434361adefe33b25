#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

// Small self-contained helpers shared by the unit and acceptance suites.
// These implement their own arithmetic so they stay independent of the
// library paths they are used to check.

namespace testutil {

// Kolmogorov-Smirnov distance of a sample against Uniform(0,1).
inline double ks_uniform(std::span<const double> x) {
    std::vector<double> v(x.begin(), x.end());
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double d = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        double hi = (static_cast<double>(i) + 1.0) / n - v[i];
        double lo = v[i] - static_cast<double>(i) / n;
        d = std::max(d, std::max(hi, lo));
    }
    return d;
}

inline double mean(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

inline double variance(std::span<const double> x) {
    double m = mean(x), s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

inline double sd(std::span<const double> x) { return std::sqrt(variance(x)); }

inline double skewness(std::span<const double> x) {
    double m = mean(x);
    double s2 = 0.0, s3 = 0.0;
    for (double v : x) {
        double d = v - m;
        s2 += d * d;
        s3 += d * d * d;
    }
    double n = static_cast<double>(x.size());
    double sig = std::sqrt(s2 / n);
    return (s3 / n) / (sig * sig * sig);
}

// OLS slope of y on x.
inline double ols_slope(std::span<const double> x, std::span<const double> y) {
    double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

// Pearson correlation squared.
inline double r_squared(std::span<const double> x, std::span<const double> y) {
    double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy * sxy / (sxx * syy);
}

} // namespace testutil

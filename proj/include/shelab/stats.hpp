#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace shelab {

struct Estimate {
    double value = 0.0;
    double se = 0.0;
};

// Welford accumulator.
class RunningStats {
public:
    void add(double x);
    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const;  // unbiased
    double standard_error() const;
    Estimate estimate() const { return {mean(), standard_error()}; }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

Estimate mean_estimate(std::span<const double> xs);

// |a - b| <= k * sqrt(se_a^2 + se_b^2)
bool agree_within(const Estimate& a, const Estimate& b, double k = 3.0);

struct Interval {
    double low = 0.0;
    double high = 0.0;
};

// Wilson score interval for a binomial proportion (z = 1.96 by default).
Interval wilson_interval(std::size_t successes, std::size_t n, double z = 1.96);

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

// Two-sample Kolmogorov-Smirnov test with the asymptotic Kolmogorov law.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

// Linear-interpolated empirical quantile of already sorted data.
double quantile_sorted(std::span<const double> sorted, double q);

}  // namespace shelab

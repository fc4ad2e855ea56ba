#pragma once

// Monte Carlo estimates with 95% batch-means confidence intervals.
// Policy: 20 batches in sample (particle) order, Student-t quantile, pass
// margins at 3 half-widths. Estimates from the same run are compared through
// paired batch differences where possible.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace mvsde {

struct StatEstimate {
    double value = 0;
    double ci = 0; // 95% half-width
    int64_t count = 0;
    int batches = 0;
    bool low_sample = false; // fewer samples than batches

    static StatEstimate exact(double v, int64_t n = 1) { return {v, 0.0, n, 0, false}; }
};

inline constexpr int kBatches = 20;
inline constexpr double kT975Df19 = 2.0930240544083093; // t-quantile, 19 dof

/// Mean with batch-means CI over samples in index order.
StatEstimate batch_mean(std::span<const double> samples);

/// Mean of fn(i) over i in [0, n), batched in index order without materializing.
StatEstimate batch_mean_fn(int64_t n, const std::function<double(int64_t)>& fn);

/// log of a positive estimate; CI by the delta method.
StatEstimate log_estimate(const StatEstimate& e);

/// a - b for estimates from independent runs (CIs combine in quadrature).
StatEstimate sub_independent(const StatEstimate& a, const StatEstimate& b);

/// Scalar transforms.
StatEstimate scale_estimate(const StatEstimate& e, double factor);
StatEstimate shift_estimate(const StatEstimate& e, double offset);
/// e^p with delta-method CI (e.value must be > 0 unless p is a positive integer).
StatEstimate pow_estimate(const StatEstimate& e, double p);

double combined_ci(std::initializer_list<double> cis);

/// Ordinary least squares of y on x: returns {slope, intercept, r_squared}.
struct LinearFit {
    double slope = 0;
    double intercept = 0;
    double r_squared = 0;
};
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

} // namespace mvsde

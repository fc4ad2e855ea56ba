#include "mvsde/stats.hpp"

#include <cmath>

#include "mvsde/errors.hpp"

namespace mvsde {

StatEstimate batch_mean_fn(int64_t n, const std::function<double(int64_t)>& fn) {
    if (n <= 0) throw InvalidInput("batch_mean needs at least one sample");
    StatEstimate est;
    est.count = n;
    if (n < kBatches) {
        double s = 0;
        for (int64_t i = 0; i < n; ++i) s += fn(i);
        est.value = s / double(n);
        est.low_sample = true;
        est.ci = 0;
        return est;
    }
    // Contiguous batches in index order; the first (n % kBatches) batches get
    // one extra sample. Deterministic for a fixed n.
    double bm[kBatches];
    const int64_t base = n / kBatches;
    const int64_t extra = n % kBatches;
    int64_t idx = 0;
    double total = 0;
    for (int b = 0; b < kBatches; ++b) {
        const int64_t len = base + (b < extra ? 1 : 0);
        double s = 0;
        for (int64_t i = 0; i < len; ++i) s += fn(idx++);
        bm[b] = s / double(len);
        total += s;
    }
    est.value = total / double(n);
    double var = 0;
    for (double m : bm) var += (m - est.value) * (m - est.value);
    var /= (kBatches - 1);
    est.ci = kT975Df19 * std::sqrt(var / kBatches);
    est.batches = kBatches;
    return est;
}

StatEstimate batch_mean(std::span<const double> samples) {
    return batch_mean_fn(static_cast<int64_t>(samples.size()),
                         [&](int64_t i) { return samples[static_cast<size_t>(i)]; });
}

StatEstimate log_estimate(const StatEstimate& e) {
    if (!(e.value > 0)) throw InvalidInput("log_estimate needs a positive value");
    StatEstimate out = e;
    out.value = std::log(e.value);
    out.ci = e.ci / e.value;
    return out;
}

StatEstimate sub_independent(const StatEstimate& a, const StatEstimate& b) {
    StatEstimate out;
    out.value = a.value - b.value;
    out.ci = std::sqrt(a.ci * a.ci + b.ci * b.ci);
    out.count = std::min(a.count, b.count);
    out.batches = std::min(a.batches, b.batches);
    out.low_sample = a.low_sample || b.low_sample;
    return out;
}

StatEstimate scale_estimate(const StatEstimate& e, double factor) {
    StatEstimate out = e;
    out.value = e.value * factor;
    out.ci = std::abs(factor) * e.ci;
    return out;
}

StatEstimate shift_estimate(const StatEstimate& e, double offset) {
    StatEstimate out = e;
    out.value += offset;
    return out;
}

StatEstimate pow_estimate(const StatEstimate& e, double p) {
    StatEstimate out = e;
    out.value = std::pow(e.value, p);
    out.ci = std::abs(p * std::pow(e.value, p - 1)) * e.ci;
    return out;
}

double combined_ci(std::initializer_list<double> cis) {
    double s = 0;
    for (double c : cis) s += c * c;
    return std::sqrt(s);
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidInput("linear_fit needs >= 2 points");
    const double n = double(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        syy += y[i] * y[i];
    }
    const double det = n * sxx - sx * sx;
    if (det == 0) throw InvalidInput("linear_fit: degenerate x values");
    LinearFit fit;
    fit.slope = (n * sxy - sx * sy) / det;
    fit.intercept = (sy - fit.slope * sx) / n;
    double ss_res = 0;
    const double mean_y = sy / n;
    double ss_tot = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double pred = fit.intercept + fit.slope * x[i];
        ss_res += (y[i] - pred) * (y[i] - pred);
        ss_tot += (y[i] - mean_y) * (y[i] - mean_y);
    }
    fit.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

} // namespace mvsde

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace ebmine {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;
inline constexpr double kSqrt2 = 1.4142135623730950488016887;

inline double norm_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

inline double norm_pdf(double x, double mean, double var) {
    double z = (x - mean);
    return kInvSqrt2Pi / std::sqrt(var) * std::exp(-0.5 * z * z / var);
}

inline double norm_log_pdf(double x, double mean, double var) {
    double z = x - mean;
    return -0.5 * z * z / var - 0.5 * std::log(var) + std::log(kInvSqrt2Pi);
}

inline double norm_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

// Two-sided standard normal tail probability Pr(|Z| > h).
inline double two_sided_tail(double h) { return std::erfc(h / kSqrt2); }

inline double log_sum_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::fabs(a - b)));
}

struct MeanVar {
    std::size_t n = 0;
    double mean = 0.0;
    double var = 0.0; // n-1 denominator
};

// Two-pass mean and sample variance (n-1 denominator).
inline MeanVar mean_var(std::span<const double> xs) {
    MeanVar mv;
    mv.n = xs.size();
    if (mv.n == 0) return mv;
    double s = 0.0;
    for (double x : xs) s += x;
    mv.mean = s / static_cast<double>(mv.n);
    if (mv.n < 2) return mv;
    double ss = 0.0;
    for (double x : xs) {
        double d = x - mv.mean;
        ss += d * d;
    }
    mv.var = ss / static_cast<double>(mv.n - 1);
    return mv;
}

// Nearest-rank empirical quantile: the ceil(q*n)-th smallest value, q in (0,1].
inline double quantile_nearest_rank(std::vector<double> xs, double q) {
    if (xs.empty()) throw std::invalid_argument("quantile of empty sample");
    if (q <= 0.0 || q > 1.0) throw std::invalid_argument("quantile level out of (0,1]");
    std::size_t k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(xs.size())));
    if (k == 0) k = 1;
    if (k > xs.size()) k = xs.size();
    std::nth_element(xs.begin(), xs.begin() + (k - 1), xs.end());
    return xs[k - 1];
}

inline double binomial_coefficient(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    k = std::min(k, n - k);
    double c = 1.0;
    for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    return c;
}

} // namespace ebmine

#include "invlab/stats.hpp"

#include <algorithm>
#include <cmath>

#include "invlab/error.hpp"

namespace invlab {

namespace {
constexpr std::size_t kPairwiseBase = 32;
}

double pairwise_sum(const double* x, std::size_t n) {
    if (n <= kPairwiseBase) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

double pairwise_sum(const std::vector<double>& x) {
    return pairwise_sum(x.data(), x.size());
}

double mean(const std::vector<double>& x) {
    if (x.empty()) throw DegenerateStatError("mean of empty vector");
    return pairwise_sum(x) / static_cast<double>(x.size());
}

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z * 0.70710678118654752440084436210485);
}

namespace {

// Acklam's rational approximation to the standard normal quantile.
double acklam_quantile(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - plow) {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw DegenerateStatError("normal_quantile: p must lie in (0, 1)");
    double z = acklam_quantile(p);
    // One step of Halley's method against the exact CDF.
    const double e = normal_cdf(z) - p;
    const double u = e * std::sqrt(6.283185307179586476925286766559) *
                     std::exp(z * z / 2.0);
    z -= u / (1.0 + z * u / 2.0);
    return z;
}

double sorted_quantile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw DegenerateStatError("quantile of empty vector");
    if (sorted.size() == 1) return sorted[0];
    const double h = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double median_inplace(std::vector<double>& x) {
    if (x.empty()) throw DegenerateStatError("median of empty vector");
    const std::size_t n = x.size();
    const std::size_t mid = n / 2;
    std::nth_element(x.begin(), x.begin() + mid, x.end());
    const double upper = x[mid];
    if (n % 2 == 1) return upper;
    std::nth_element(x.begin(), x.begin() + (mid - 1), x.begin() + mid);
    return 0.5 * (x[mid - 1] + upper);
}

}  // namespace invlab

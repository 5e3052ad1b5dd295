#pragma once

#include <cstddef>
#include <vector>

namespace invlab {

// Numeric helpers shared across modules.  All reductions that feed reported
// statistics go through pairwise_sum so the summation tree is a function of
// the length alone: the same values give the same bits no matter how many
// worker threads produced them.

// Pairwise (cascade) summation with a fixed topology.
double pairwise_sum(const double* x, std::size_t n);
double pairwise_sum(const std::vector<double>& x);

double mean(const std::vector<double>& x);

// Standard normal CDF / upper quantile.  normal_quantile(p) is accurate to
// ~1e-15 (rational approximation + one Halley refinement on erfc).
double normal_cdf(double z);
double normal_quantile(double p);

// Linear-interpolation quantile of a sorted vector (R type 7); q in [0, 1].
double sorted_quantile(const std::vector<double>& sorted, double q);

// Median; for even counts the mean of the two middle order statistics.
// Destroys the order of `x` (nth_element based).
double median_inplace(std::vector<double>& x);

}  // namespace invlab

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "invlab/corpus.hpp"

namespace invlab {

// Kernel change-point segmentation of a sentence-embedding sequence.
//
// A segment [a, b] (inclusive sentence indices) costs
//
//   C(a, b) = (b - a + 1) - (1 / (b - a + 1)) * sum_{i,j in [a,b]} G_ij,
//   G_ij    = exp(-||x_i - x_j||^2 / (2 * bandwidth)),
//
// i.e. the within-segment scatter in the RBF feature space.  The segmentation
// minimizes  sum_k C(segment_k) + penalty * (#change points)  subject to a
// minimum segment length, solved exactly by PELT.

struct Segmentation {
    // Exclusive segment ends: strictly increasing, 0 < tau < n.  Sentence i
    // belongs to the segment whose end is the first change point > i.
    std::vector<std::uint32_t> change_points;
    std::uint32_t n = 0;
    double penalty_used = 0.0;
    double objective = 0.0;

    std::size_t num_segments() const { return change_points.size() + 1; }
    std::vector<std::pair<std::uint32_t, std::uint32_t>> segment_bounds() const;
};

// Median of the n*(n-1)/2 pairwise squared Euclidean distances.  Returns 1.0
// for single-sentence documents and for a zero median (all points identical),
// so the kernel stays well defined.
double median_bandwidth(const SentenceEmbeddingSequence& seq);

// Precomputed prefix sums of the Gram matrix; segment_cost is O(1).
class KernelContext {
public:
    KernelContext(const SentenceEmbeddingSequence& seq, double bandwidth);

    // Cost of the inclusive sentence range [a, b], 0 <= a <= b < size().
    double segment_cost(std::size_t a, std::size_t b) const;
    std::size_t size() const { return n_; }
    double bandwidth() const { return bandwidth_; }

private:
    std::size_t n_ = 0;
    double bandwidth_ = 1.0;
    std::vector<double> prefix_;  // (n+1) x (n+1) inclusive-exclusive block sums
};

struct PeltOptions {
    double penalty = 1.0;
    std::size_t min_size = 1;
    // PELT candidate pruning.  Pruning removes only strictly dominated
    // candidates, so the objective and the reported change points are
    // identical with pruning on or off; off exists for verification.
    bool prune = true;
};

struct PeltResult {
    std::vector<std::uint32_t> change_points;
    double objective = 0.0;
};

// Exact penalized optimum.  Ties are broken toward fewer change points, then
// toward the earlier change point.
PeltResult pelt_segment(const KernelContext& ctx, const PeltOptions& opt);

struct SegmenterParams {
    double penalty = 1.0;
    // Used instead of `penalty` when the first pass returns zero change
    // points; penalty_used records whichever produced the final result.
    double fallback_penalty = 0.5;
    // Minimum segment length as a fraction of n: min_size = max(1, floor(n * min_frac)).
    double min_frac = 1.0 / 20.0;
};

Segmentation segment_document(const SentenceEmbeddingSequence& seq,
                              const SegmenterParams& params = {});

}  // namespace invlab

// Independent reference implementations used to verify the production code.
// Every oracle recomputes its quantity from the mathematical definition with
// a different algorithm (exhaustive search, dense iteration, two-pass sums),
// sharing no code with the library.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "invlab/corpus.hpp"
#include "invlab/inference.hpp"
#include "invlab/pooler.hpp"

namespace oracle {

// --- segmentation -----------------------------------------------------------

struct SegmentationResult {
    std::vector<std::uint32_t> change_points;
    double objective = 0.0;
    // Objective gap to the best segmentation with different change points;
    // large gap means the optimum is unique and its change points comparable.
    double runner_up_gap = 0.0;
};

// Exhaustive minimum of  sum_k cost(segment_k) + penalty * (#change points)
// over all segmentations with segments of at least min_size sentences.
// Ties prefer fewer change points, then the lexicographically smaller vector.
SegmentationResult exhaustive_segment(const invlab::SentenceEmbeddingSequence& seq,
                                      double bandwidth, double penalty,
                                      std::size_t min_size);

// Direct double-loop kernel segment cost of inclusive range [a, b].
double direct_segment_cost(const invlab::SentenceEmbeddingSequence& seq,
                           double bandwidth, std::size_t a, std::size_t b);

// --- alignment ---------------------------------------------------------------

// Maximum score over every monotone path (recursive enumeration, no DP).
double exhaustive_alignment_score(const invlab::SentenceEmbeddingSequence& source,
                                  const invlab::SentenceEmbeddingSequence& target,
                                  double gap_penalty);

// --- centrality --------------------------------------------------------------

// Dense power iteration in long double until L1 change < 1e-14.
std::vector<double> dense_pagerank(const invlab::SentenceGraph& graph,
                                   double damping);

// --- similarity / correlation ------------------------------------------------

double naive_cosine(std::span<const float> a, std::span<const float> b);
double two_pass_pearson(const std::vector<double>& x, const std::vector<double>& y);

// --- inference ---------------------------------------------------------------

// Step-up false-discovery-rate rejection flags straight from the definition.
std::vector<bool> brute_force_bh(const std::vector<double>& p, double q);

// Restricted (REML) log-likelihood of the crossed random-effects model
//   y = X beta + Z u + eps,  var(u) = s2_cfg I,  var(eps) = s2_resid I,
// evaluated with dense Cholesky factorizations; X has one indicator column
// per family, Z one column per configuration with two ones per row.
double dense_reml_loglik(const std::vector<invlab::FamilyObservation>& obs,
                         double s2_cfg, double s2_resid);

// --- downstream --------------------------------------------------------------

double contingency_ari(const std::vector<int>& a, const std::vector<int>& b);
double confusion_macro_f1(const std::vector<std::string>& gold,
                          const std::vector<std::string>& pred);
double confusion_mcc(const std::vector<std::string>& gold,
                     const std::vector<std::string>& pred);

// Spherical clustering objective of an assignment: sum over clusters of the
// norm of the member-vector sum (equals sum_i cos(x_i, centroid_i) for unit
// rows and normalized mean centroids).
double assignment_objective(const invlab::SentenceEmbeddingSequence& pts,
                            const std::vector<int>& assignment, int k);

// Best objective over all k^n assignments with no empty cluster.
double exhaustive_kmeans_objective(const invlab::SentenceEmbeddingSequence& pts,
                                   int k);

// --- fixtures ----------------------------------------------------------------

// Synthetic language pair table generated from the crossed random-effects
// model value = mean(pair_type) + u_a + u_b + eps.  Configurations are n_o
// original-model configs, n_t translated-text configs and n_m multilingual
// twin pairs (same model on both text versions, same_model = true).
struct PairTableSpec {
    int n_o = 6;
    int n_t = 7;
    int n_m = 0;
    double mean_oo = 0.70;
    double mean_ot = 0.70;
    double mean_om = 0.70;
    double mean_mm = 0.70;
    double mean_mx = 0.70;
    double mean_other = 0.65;
    double sigma_cfg = 0.10;
    double sigma_resid = 0.05;
};

std::vector<invlab::PairObservation> synthetic_pair_table(std::uint64_t seed,
                                                          const PairTableSpec& spec);

// Deterministic random unit-row matrix.
invlab::SentenceEmbeddingSequence random_unit_sequence(std::uint64_t seed,
                                                       std::uint32_t n,
                                                       std::uint32_t d);

// Scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

}  // namespace oracle

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "invlab/corpus.hpp"
#include "invlab/simcorr.hpp"

namespace invlab {

// Downstream-task agreement analysis: cluster each configuration's paragraph
// embeddings, compare the partitions across configurations with the adjusted
// Rand index, and feed the agreement observations into the same hypothesis
// machinery used for the triangle correlations.

struct KMeansOptions {
    int k = 20;
    int restarts = 8;             // independent seeded restarts, best objective kept
    int max_iterations = 100;     // Lloyd iterations per restart
    std::uint64_t seed = 0;
    int threads = 1;              // restarts run in parallel
};

// Spherical k-means: points and centroids live on the unit sphere, assignment
// maximizes cosine similarity, centroids are normalized member means.
// Seeding is k-means++ adapted to cosine distance (weights (1 - max cos)^2);
// empty clusters are re-seeded from the point farthest from its centroid.
// Deterministic given (seed, restarts, threads ignored for the result).
// Throws InputError on fewer points than k or a zero-norm row.
Partition spherical_kmeans(const SentenceEmbeddingSequence& vectors,
                           const std::vector<std::string>& item_ids,
                           const KMeansOptions& opt = {});

// Hubert-Arabie adjusted Rand index.  When both partitions carry item ids the
// second is aligned to the first by id; otherwise items pair up by position.
// A zero adjustment denominator (e.g. both partitions are single clusters)
// returns 1.  Throws InputError on size/id mismatch or fewer than 2 items.
double adjusted_rand_index(const Partition& a, const Partition& b);

// Unweighted mean of per-class F1 over the classes present in `gold`;
// a class never predicted contributes 0.  Throws InputError on length
// mismatch or empty input.
double macro_f1(const std::vector<std::string>& gold,
                const std::vector<std::string>& pred);

// Multiclass Matthews correlation coefficient; 0 when the denominator is 0.
double mcc(const std::vector<std::string>& gold,
           const std::vector<std::string>& pred);

// Reorders `pred` to the item order of `gold` (by item id) and returns the
// aligned label vectors.  Throws InputError when an id is missing.
std::pair<std::vector<std::string>, std::vector<std::string>> align_labels(
    const LabeledItems& gold, const LabeledItems& pred);

// One ARI observation per unordered configuration pair, labelled exactly like
// the correlation table (pair_type, same_model, lexicographic order).
// `value` holds the ARI and n_entries the common item count.
std::vector<PairObservation> agreement_table(
    const std::string& language,
    const std::vector<std::pair<const ConfigEntry*, const Partition*>>& partitions);

}  // namespace invlab

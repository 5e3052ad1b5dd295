#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "invlab/corpus.hpp"
#include "invlab/pooler.hpp"

namespace invlab {

// Paragraph similarity matrices and their second-order comparison: the
// Pearson correlation between the upper triangles of two configurations'
// matrices, which measures how well the pairwise similarity structure agrees.

// Cosine similarity accumulated in double and clamped to [-1, 1].
double cosine_similarity(std::span<const float> a, std::span<const float> b);

// Full pairwise cosine matrix of the rows; float32 storage, float64
// accumulation.  Rows are distributed over `threads` workers; each entry
// depends only on its own pair of rows, so the result is bit-identical for
// any thread count or blocking.
SimilarityMatrix similarity_matrix(const SentenceEmbeddingSequence& vectors,
                                   int threads = 1);
SimilarityMatrix similarity_matrix(const ParagraphEmbeddingSet& paragraphs,
                                   int threads = 1);

// Pearson correlation of the two flattened upper triangles.  All sums use
// fixed-topology pairwise summation in double, so the value does not depend
// on how the triangles were produced.  Throws InputError on shape mismatch
// and DegenerateStatError when either triangle is constant.
double upper_triangle_pearson(const SimilarityMatrix& a, const SimilarityMatrix& b);

// One unordered configuration pair within a language.  `value` holds the
// triangle correlation r (or, for downstream partitions, an agreement score).
struct PairObservation {
    std::string language;
    std::string config_a;  // lexicographically smaller config_id
    std::string config_b;
    std::string pair_type;  // OO OM OX OT MM MX MT XX XT TT
    bool same_model = false;
    double value = 0.0;
    std::uint32_t n_entries = 0;

    // Set for observations whose configs matter to hypothesis predicates.
    PipelineType type_a = PipelineType::O;
    PipelineType type_b = PipelineType::O;
};

// All unordered config pairs of one language, in lexicographic (config_a,
// config_b) order.  Pairs with a constant triangle are skipped and reported
// through `warn`.
std::vector<PairObservation> correlation_table(
    const std::string& language,
    const std::vector<std::pair<const ConfigEntry*, const SimilarityMatrix*>>& matrices,
    int threads = 1,
    const std::function<void(const std::string&)>& warn = {});

// Mean observation value per pair-type label (types with no observations are
// absent from the map).
std::map<std::string, double> pair_type_means(
    const std::vector<PairObservation>& observations);

}  // namespace invlab

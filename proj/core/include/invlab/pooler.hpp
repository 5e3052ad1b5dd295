#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "invlab/corpus.hpp"
#include "invlab/segmenter.hpp"

namespace invlab {

// Centrality-weighted pooling of sentence embeddings into paragraph
// (segment) embeddings.  Edge weights are negative-truncated cosines over the
// whole document; PageRank scores on that graph weight each sentence inside
// its segment.

struct SentenceGraph {
    std::uint32_t n = 0;
    std::vector<double> weights;  // row-major n x n, diagonal zero, entries >= 0

    double at(std::size_t i, std::size_t j) const { return weights[i * n + j]; }
};

// (i, j) = max(0, cosine(x_i, x_j)) for i != j; diagonal 0.
SentenceGraph sentence_graph(const SentenceEmbeddingSequence& seq);

struct PageRankOptions {
    double damping = 0.85;
    double tol = 1e-9;      // L1 change between iterations
    int max_iterations = 1000;
};

// Row-stochastic PageRank with uniform teleportation; rows with zero total
// weight distribute uniformly (dangling).  Throws Error when the iteration
// fails to reach `tol` within max_iterations.  The returned weights sum to 1.
std::vector<double> pagerank(const SentenceGraph& graph,
                             const PageRankOptions& opt = {});

struct ParagraphEmbeddingSet {
    std::string document_id;
    std::string config_id;
    std::uint32_t n_paragraphs = 0;
    std::uint32_t d = 0;
    std::vector<float> vectors;  // row-major n_paragraphs x d
    Segmentation source_segmentation;

    SentenceEmbeddingSequence as_sequence() const {
        return SentenceEmbeddingSequence{n_paragraphs, d, vectors};
    }
};

// Weighted mean per segment: sum_i w_i x_i / sum_i w_i over the segment's
// sentences, accumulated in double.  A segment whose weights sum to zero
// falls back to the unweighted mean.
ParagraphEmbeddingSet pool_document(const SentenceEmbeddingSequence& seq,
                                    const Segmentation& segmentation,
                                    const std::vector<double>& weights);

}  // namespace invlab

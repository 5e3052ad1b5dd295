#pragma once

#include <cstdint>
#include <vector>

#include "invlab/corpus.hpp"
#include "invlab/segmenter.hpp"

namespace invlab {

// Monotone sentence alignment between an original document and its
// translation, via Needleman-Wunsch on cosine similarities of row-normalized
// embeddings from a shared bilingual space.  Diagonal moves score the cosine
// of the linked pair; horizontal/vertical moves score gap_penalty each.

struct AlignmentLink {
    // Half-open contiguous index runs.  Exactly one side may have length > 1
    // (1-to-1, 1-to-many or many-to-1; never many-to-many).
    std::uint32_t src_begin = 0, src_end = 0;
    std::uint32_t tgt_begin = 0, tgt_end = 0;

    std::uint32_t src_len() const { return src_end - src_begin; }
    std::uint32_t tgt_len() const { return tgt_end - tgt_begin; }
};

struct AlignmentMap {
    std::vector<AlignmentLink> links;  // ordered; jointly cover both sides
    double total_score = 0.0;
    std::uint32_t n_source = 0;
    std::uint32_t n_target = 0;
};

// Copy with unit-norm rows (norms computed in double precision).
SentenceEmbeddingSequence normalize_rows(const SentenceEmbeddingSequence& seq);

// Optimal monotone alignment.  DP ties prefer diagonal, then vertical
// (source-consuming), then horizontal moves.  Gap runs are folded into a
// neighbouring link so every index on both sides is covered.
AlignmentMap monotone_align(const SentenceEmbeddingSequence& source,
                            const SentenceEmbeddingSequence& target,
                            double gap_penalty = -0.2);

// First target index of the link containing source index `src_index`.
// Throws InputError when the index lies outside the alignment.
std::uint32_t project_source_index(const AlignmentMap& alignment,
                                   std::uint32_t src_index);

// Carries source change points across the alignment: each source change point
// tau maps to the first target index of the link containing source index tau.
// Duplicate or out-of-order images are merged; the result satisfies the
// Segmentation invariants with min_size relaxed to 1.
Segmentation project_segmentation(const Segmentation& source_segmentation,
                                  const AlignmentMap& alignment);

}  // namespace invlab

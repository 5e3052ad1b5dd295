#include "invlab/aligner.hpp"

#include <algorithm>
#include <cmath>

#include "invlab/error.hpp"

namespace invlab {

SentenceEmbeddingSequence normalize_rows(const SentenceEmbeddingSequence& seq) {
    SentenceEmbeddingSequence out = seq;
    for (std::uint32_t i = 0; i < seq.n; ++i) {
        double ss = 0.0;
        const auto row = seq.row(i);
        for (const float v : row) ss += static_cast<double>(v) * v;
        if (ss <= 0.0)
            throw InputError("normalize_rows: zero-norm row " + std::to_string(i));
        const double inv = 1.0 / std::sqrt(ss);
        for (std::uint32_t k = 0; k < seq.d; ++k)
            out.data[static_cast<std::size_t>(i) * seq.d + k] =
                static_cast<float>(row[k] * inv);
    }
    return out;
}

namespace {

enum Move : std::uint8_t { kDiag = 0, kVert = 1, kHorz = 2 };

double dot(std::span<const float> a, std::span<const float> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
        s += static_cast<double>(a[k]) * static_cast<double>(b[k]);
    return s;
}

// Folds the move sequence into covering links.  Each source index is first
// attributed to a target index (diagonal moves pair directly; a vertical move
// joins the most recently consumed target), which yields ordered many-to-1
// links.  Target indices consumed by horizontal runs are then folded into a
// neighbouring link: a single-source neighbour simply widens, a multi-source
// neighbour donates its boundary source to a new 1-to-many link.
std::vector<AlignmentLink> extract_links(const std::vector<Move>& moves,
                                         std::uint32_t n, std::uint32_t m) {
    std::vector<std::uint32_t> assigned_tgt(n, 0);
    {
        std::uint32_t si = 0, tj = 0;
        for (const Move mv : moves) {
            switch (mv) {
                case kDiag:
                    assigned_tgt[si++] = tj++;
                    break;
                case kVert:
                    assigned_tgt[si++] = tj > 0 ? tj - 1 : 0;
                    break;
                case kHorz:
                    ++tj;
                    break;
            }
        }
    }

    std::vector<AlignmentLink> links;
    for (std::uint32_t i = 0; i < n;) {
        std::uint32_t j = i + 1;
        while (j < n && assigned_tgt[j] == assigned_tgt[i]) ++j;
        AlignmentLink link;
        link.src_begin = i;
        link.src_end = j;
        link.tgt_begin = assigned_tgt[i];
        link.tgt_end = assigned_tgt[i] + 1;
        links.push_back(link);
        i = j;
    }

    // Fold target gaps [gap_begin, gap_end) between consecutive links (or at
    // either margin) into a neighbouring link.
    std::vector<AlignmentLink> out;
    out.reserve(links.size());
    for (std::size_t idx = 0; idx < links.size(); ++idx) {
        AlignmentLink cur = links[idx];
        const std::uint32_t gap_begin = out.empty() ? 0 : out.back().tgt_end;
        if (gap_begin < cur.tgt_begin) {
            if (!out.empty() && out.back().src_len() == 1) {
                out.back().tgt_end = cur.tgt_begin;  // widen 1-to-many
            } else if (!out.empty() && out.back().tgt_len() == 1) {
                AlignmentLink& prev = out.back();
                AlignmentLink bridge;  // donate prev's last source
                bridge.src_begin = --prev.src_end;
                bridge.src_end = bridge.src_begin + 1;
                bridge.tgt_begin = gap_begin;
                bridge.tgt_end = cur.tgt_begin;
                out.push_back(bridge);
            } else if (cur.src_len() == 1) {
                cur.tgt_begin = gap_begin;  // widen the right neighbour
            } else {
                AlignmentLink bridge;  // donate cur's first source
                bridge.src_begin = cur.src_begin++;
                bridge.src_end = bridge.src_begin + 1;
                bridge.tgt_begin = gap_begin;
                bridge.tgt_end = cur.tgt_begin;
                out.push_back(bridge);
            }
        }
        out.push_back(cur);
    }
    if (out.back().tgt_end < m) {  // trailing gap
        AlignmentLink& last = out.back();
        if (last.src_len() == 1) {
            last.tgt_end = m;
        } else {
            AlignmentLink bridge;
            bridge.src_begin = --last.src_end;
            bridge.src_end = bridge.src_begin + 1;
            bridge.tgt_begin = last.tgt_end;
            bridge.tgt_end = m;
            out.push_back(bridge);
        }
    }
    return out;
}

}  // namespace

AlignmentMap monotone_align(const SentenceEmbeddingSequence& source,
                            const SentenceEmbeddingSequence& target,
                            double gap_penalty) {
    if (source.d != target.d)
        throw InputError("monotone_align: dimension mismatch (" +
                         std::to_string(source.d) + " vs " + std::to_string(target.d) +
                         ")");
    const std::uint32_t n = source.n, m = target.n;

    // Cosine similarities in double precision straight from the input rows;
    // renormalizing into float first would quantize the scores.
    const auto inv_norms = [](const SentenceEmbeddingSequence& seq) {
        std::vector<double> inv(seq.n);
        for (std::uint32_t i = 0; i < seq.n; ++i) {
            const double ss = dot(seq.row(i), seq.row(i));
            if (ss <= 0.0)
                throw InputError("monotone_align: zero-norm row " + std::to_string(i));
            inv[i] = 1.0 / std::sqrt(ss);
        }
        return inv;
    };
    const std::vector<double> inv_src = inv_norms(source);
    const std::vector<double> inv_tgt = inv_norms(target);
    std::vector<double> sim(static_cast<std::size_t>(n) * m);
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = 0; j < m; ++j)
            sim[static_cast<std::size_t>(i) * m + j] =
                dot(source.row(i), target.row(j)) * inv_src[i] * inv_tgt[j];

    // H[(i, j)] = best score covering the first i source and j target
    // sentences; back[(i, j)] remembers the winning move (ties: diagonal,
    // then vertical, then horizontal).
    const std::size_t stride = m + 1;
    std::vector<double> H((n + 1) * stride);
    std::vector<std::uint8_t> back((n + 1) * stride, kDiag);
    for (std::uint32_t j = 1; j <= m; ++j) {
        H[j] = H[j - 1] + gap_penalty;
        back[j] = kHorz;
    }
    for (std::uint32_t i = 1; i <= n; ++i) {
        H[i * stride] = H[(i - 1) * stride] + gap_penalty;
        back[i * stride] = kVert;
        for (std::uint32_t j = 1; j <= m; ++j) {
            const double diag = H[(i - 1) * stride + (j - 1)] +
                                sim[static_cast<std::size_t>(i - 1) * m + (j - 1)];
            const double vert = H[(i - 1) * stride + j] + gap_penalty;
            const double horz = H[i * stride + (j - 1)] + gap_penalty;
            double best = diag;
            std::uint8_t mv = kDiag;
            if (vert > best) {
                best = vert;
                mv = kVert;
            }
            if (horz > best) {
                best = horz;
                mv = kHorz;
            }
            H[i * stride + j] = best;
            back[i * stride + j] = mv;
        }
    }

    std::vector<Move> moves;
    moves.reserve(n + m);
    {
        std::uint32_t i = n, j = m;
        while (i > 0 || j > 0) {
            const Move mv = static_cast<Move>(back[i * stride + j]);
            moves.push_back(mv);
            if (mv == kDiag) {
                --i;
                --j;
            } else if (mv == kVert) {
                --i;
            } else {
                --j;
            }
        }
        std::reverse(moves.begin(), moves.end());
    }

    AlignmentMap map;
    map.total_score = H[n * stride + m];
    map.n_source = n;
    map.n_target = m;
    map.links = extract_links(moves, n, m);
    return map;
}

std::uint32_t project_source_index(const AlignmentMap& alignment,
                                   std::uint32_t src_index) {
    for (const AlignmentLink& link : alignment.links)
        if (src_index >= link.src_begin && src_index < link.src_end)
            return link.tgt_begin;
    throw InputError("project_source_index: source index " +
                     std::to_string(src_index) + " outside the alignment");
}

Segmentation project_segmentation(const Segmentation& source_segmentation,
                                  const AlignmentMap& alignment) {
    if (source_segmentation.n != alignment.n_source)
        throw InputError("project_segmentation: segmentation covers " +
                         std::to_string(source_segmentation.n) +
                         " sentences but the alignment covers " +
                         std::to_string(alignment.n_source));
    Segmentation out;
    out.n = alignment.n_target;
    out.penalty_used = source_segmentation.penalty_used;
    for (const std::uint32_t tau : source_segmentation.change_points) {
        const std::uint32_t image = project_source_index(alignment, tau);
        if (image > 0 && image < out.n &&
            (out.change_points.empty() || image > out.change_points.back()))
            out.change_points.push_back(image);
    }
    return out;
}

}  // namespace invlab

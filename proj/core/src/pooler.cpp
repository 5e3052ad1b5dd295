#include "invlab/pooler.hpp"

#include <cmath>

#include "invlab/error.hpp"
#include "invlab/simcorr.hpp"

namespace invlab {

SentenceGraph sentence_graph(const SentenceEmbeddingSequence& seq) {
    SentenceGraph g;
    g.n = seq.n;
    g.weights.assign(static_cast<std::size_t>(seq.n) * seq.n, 0.0);
    for (std::uint32_t i = 0; i < seq.n; ++i)
        for (std::uint32_t j = i + 1; j < seq.n; ++j) {
            const double w =
                std::max(0.0, cosine_similarity(seq.row(i), seq.row(j)));
            g.weights[static_cast<std::size_t>(i) * seq.n + j] = w;
            g.weights[static_cast<std::size_t>(j) * seq.n + i] = w;
        }
    return g;
}

std::vector<double> pagerank(const SentenceGraph& graph, const PageRankOptions& opt) {
    const std::size_t n = graph.n;
    if (n == 0) throw Error("pagerank: empty graph");
    if (!(opt.damping >= 0.0 && opt.damping < 1.0))
        throw Error("pagerank: damping must lie in [0, 1)");

    std::vector<double> out_degree(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += graph.at(i, j);
        out_degree[i] = s;
    }

    const double uniform = 1.0 / static_cast<double>(n);
    std::vector<double> p(n, uniform), next(n);
    for (int it = 0; it < opt.max_iterations; ++it) {
        double dangling = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (out_degree[i] == 0.0) dangling += p[i];
        const double base = (1.0 - opt.damping) * uniform +
                            opt.damping * dangling * uniform;
        std::fill(next.begin(), next.end(), base);
        for (std::size_t i = 0; i < n; ++i) {
            if (out_degree[i] == 0.0) continue;
            const double share = opt.damping * p[i] / out_degree[i];
            for (std::size_t j = 0; j < n; ++j) {
                const double w = graph.at(i, j);
                if (w != 0.0) next[j] += share * w;
            }
        }
        double delta = 0.0;
        for (std::size_t i = 0; i < n; ++i) delta += std::abs(next[i] - p[i]);
        p.swap(next);
        if (delta < opt.tol) {
            // Exact renormalization absorbs accumulated round-off drift.
            double total = 0.0;
            for (const double v : p) total += v;
            for (double& v : p) v /= total;
            return p;
        }
    }
    throw Error("pagerank: no convergence to " + std::to_string(opt.tol) + " within " +
                std::to_string(opt.max_iterations) + " iterations");
}

ParagraphEmbeddingSet pool_document(const SentenceEmbeddingSequence& seq,
                                    const Segmentation& segmentation,
                                    const std::vector<double>& weights) {
    if (segmentation.n != seq.n)
        throw InputError("pool_document: segmentation covers " +
                         std::to_string(segmentation.n) + " sentences, sequence has " +
                         std::to_string(seq.n));
    if (weights.size() != seq.n)
        throw InputError("pool_document: weight count mismatch");

    const auto bounds = segmentation.segment_bounds();
    ParagraphEmbeddingSet out;
    out.n_paragraphs = static_cast<std::uint32_t>(bounds.size());
    out.d = seq.d;
    out.vectors.assign(static_cast<std::size_t>(out.n_paragraphs) * seq.d, 0.0f);
    out.source_segmentation = segmentation;

    std::vector<double> acc(seq.d);
    for (std::size_t s = 0; s < bounds.size(); ++s) {
        const auto [begin, end] = bounds[s];
        double wsum = 0.0;
        for (std::uint32_t i = begin; i < end; ++i) wsum += weights[i];
        std::fill(acc.begin(), acc.end(), 0.0);
        if (wsum > 0.0) {
            for (std::uint32_t i = begin; i < end; ++i) {
                const auto row = seq.row(i);
                for (std::uint32_t k = 0; k < seq.d; ++k)
                    acc[k] += weights[i] * static_cast<double>(row[k]);
            }
            for (std::uint32_t k = 0; k < seq.d; ++k) acc[k] /= wsum;
        } else {
            // Zero total centrality: fall back to the unweighted mean.
            const double len = static_cast<double>(end - begin);
            for (std::uint32_t i = begin; i < end; ++i) {
                const auto row = seq.row(i);
                for (std::uint32_t k = 0; k < seq.d; ++k)
                    acc[k] += static_cast<double>(row[k]);
            }
            for (std::uint32_t k = 0; k < seq.d; ++k) acc[k] /= len;
        }
        for (std::uint32_t k = 0; k < seq.d; ++k)
            out.vectors[s * seq.d + k] = static_cast<float>(acc[k]);
    }
    return out;
}

}  // namespace invlab

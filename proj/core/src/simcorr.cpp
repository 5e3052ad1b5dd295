#include "invlab/simcorr.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "invlab/error.hpp"
#include "invlab/parallel.hpp"
#include "invlab/stats.hpp"

namespace invlab {

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw InputError("cosine: dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double x = a[k], y = b[k];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na <= 0.0 || nb <= 0.0)
        throw DegenerateStatError("cosine of a zero vector is undefined");
    return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

SimilarityMatrix similarity_matrix(const SentenceEmbeddingSequence& vectors,
                                   int threads) {
    const std::uint32_t n = vectors.n;
    SimilarityMatrix m;
    m.n_paragraphs = n;
    m.upper.assign(SimilarityMatrix::tri_size(n), 0.0f);
    if (n < 2) return m;
    parallel_for(n - 1, threads, [&](std::size_t i) {
        std::size_t idx = m.tri_index(i, i + 1);
        for (std::uint32_t j = static_cast<std::uint32_t>(i) + 1; j < n; ++j, ++idx)
            m.upper[idx] =
                static_cast<float>(cosine_similarity(vectors.row(i), vectors.row(j)));
    });
    return m;
}

SimilarityMatrix similarity_matrix(const ParagraphEmbeddingSet& paragraphs,
                                   int threads) {
    return similarity_matrix(paragraphs.as_sequence(), threads);
}

double upper_triangle_pearson(const SimilarityMatrix& a, const SimilarityMatrix& b) {
    if (a.n_paragraphs != b.n_paragraphs)
        throw InputError("upper_triangle_pearson: matrices cover " +
                         std::to_string(a.n_paragraphs) + " vs " +
                         std::to_string(b.n_paragraphs) + " paragraphs");
    const std::size_t n = a.upper.size();
    if (n < 3)
        throw InputError(
            "upper_triangle_pearson: need at least 3 paragraph pairs, have " +
            std::to_string(n));

    std::vector<double> buf(n);
    for (std::size_t i = 0; i < n; ++i) buf[i] = a.upper[i];
    const double mean_a = pairwise_sum(buf) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) buf[i] = b.upper[i];
    const double mean_b = pairwise_sum(buf) / static_cast<double>(n);

    std::vector<double> xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = static_cast<double>(a.upper[i]) - mean_a;
        const double dy = static_cast<double>(b.upper[i]) - mean_b;
        xx[i] = dx * dx;
        yy[i] = dy * dy;
        xy[i] = dx * dy;
    }
    const double sxx = pairwise_sum(xx);
    const double syy = pairwise_sum(yy);
    if (sxx <= 0.0 || syy <= 0.0)
        throw DegenerateStatError(
            "upper_triangle_pearson: constant triangle, correlation undefined");
    return std::clamp(pairwise_sum(xy) / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<PairObservation> correlation_table(
    const std::string& language,
    const std::vector<std::pair<const ConfigEntry*, const SimilarityMatrix*>>& matrices,
    int threads, const std::function<void(const std::string&)>& warn) {
    auto report = [&](const std::string& msg) {
        if (warn)
            warn(msg);
        else
            std::cerr << "warning: " << msg << "\n";
    };

    auto sorted = matrices;
    std::sort(sorted.begin(), sorted.end(), [](const auto& x, const auto& y) {
        return x.first->config_id < y.first->config_id;
    });

    struct Slot {
        PairObservation obs;
        bool ok = false;
        std::string error;
    };
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < sorted.size(); ++i)
        for (std::size_t j = i + 1; j < sorted.size(); ++j) pairs.emplace_back(i, j);

    std::vector<Slot> slots(pairs.size());
    parallel_for(pairs.size(), threads, [&](std::size_t p) {
        const auto [i, j] = pairs[p];
        const ConfigEntry& ca = *sorted[i].first;
        const ConfigEntry& cb = *sorted[j].first;
        Slot& slot = slots[p];
        slot.obs.language = language;
        slot.obs.config_a = ca.config_id;
        slot.obs.config_b = cb.config_id;
        slot.obs.type_a = ca.pipeline_type();
        slot.obs.type_b = cb.pipeline_type();
        slot.obs.pair_type = pair_type_label(slot.obs.type_a, slot.obs.type_b);
        slot.obs.same_model =
            ca.model_id == cb.model_id && ca.applied_to != cb.applied_to;
        slot.obs.n_entries = static_cast<std::uint32_t>(sorted[i].second->upper.size());
        try {
            slot.obs.value =
                upper_triangle_pearson(*sorted[i].second, *sorted[j].second);
            slot.ok = true;
        } catch (const DegenerateStatError& e) {
            slot.error = e.what();
        }
    });

    std::vector<PairObservation> out;
    out.reserve(slots.size());
    for (const Slot& slot : slots) {
        if (slot.ok)
            out.push_back(slot.obs);
        else
            report(language + ": dropped pair (" + slot.obs.config_a + ", " +
                   slot.obs.config_b + "): " + slot.error);
    }
    return out;
}

std::map<std::string, double> pair_type_means(
    const std::vector<PairObservation>& observations) {
    std::map<std::string, std::vector<double>> groups;
    for (const auto& o : observations) groups[o.pair_type].push_back(o.value);
    std::map<std::string, double> out;
    for (const auto& [label, values] : groups)
        out[label] = pairwise_sum(values) / static_cast<double>(values.size());
    return out;
}

}  // namespace invlab

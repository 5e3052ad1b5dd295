#include "invlab/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "invlab/error.hpp"
#include "invlab/stats.hpp"

namespace invlab {

std::vector<std::pair<std::uint32_t, std::uint32_t>> Segmentation::segment_bounds()
    const {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> bounds;
    std::uint32_t begin = 0;
    for (const std::uint32_t tau : change_points) {
        bounds.emplace_back(begin, tau);
        begin = tau;
    }
    bounds.emplace_back(begin, n);
    return bounds;
}

namespace {

double squared_distance(std::span<const float> a, std::span<const float> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double diff = static_cast<double>(a[k]) - static_cast<double>(b[k]);
        s += diff * diff;
    }
    return s;
}

}  // namespace

double median_bandwidth(const SentenceEmbeddingSequence& seq) {
    if (seq.n <= 1) return 1.0;
    std::vector<double> d2;
    d2.reserve(static_cast<std::size_t>(seq.n) * (seq.n - 1) / 2);
    for (std::uint32_t i = 0; i + 1 < seq.n; ++i)
        for (std::uint32_t j = i + 1; j < seq.n; ++j)
            d2.push_back(squared_distance(seq.row(i), seq.row(j)));
    const double med = median_inplace(d2);
    return med > 0.0 ? med : 1.0;
}

KernelContext::KernelContext(const SentenceEmbeddingSequence& seq, double bandwidth)
    : n_(seq.n), bandwidth_(bandwidth) {
    if (!(bandwidth > 0.0)) throw Error("kernel bandwidth must be positive");
    const double inv = 1.0 / (2.0 * bandwidth);
    // Gram matrix, then 2-D prefix sums P[i][j] = sum over rows < i, cols < j.
    std::vector<double> gram(n_ * n_);
    for (std::size_t i = 0; i < n_; ++i) {
        gram[i * n_ + i] = 1.0;
        for (std::size_t j = i + 1; j < n_; ++j) {
            const double g = std::exp(-squared_distance(seq.row(i), seq.row(j)) * inv);
            gram[i * n_ + j] = g;
            gram[j * n_ + i] = g;
        }
    }
    prefix_.assign((n_ + 1) * (n_ + 1), 0.0);
    const std::size_t stride = n_ + 1;
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < n_; ++j)
            prefix_[(i + 1) * stride + (j + 1)] = gram[i * n_ + j] +
                                                  prefix_[i * stride + (j + 1)] +
                                                  prefix_[(i + 1) * stride + j] -
                                                  prefix_[i * stride + j];
}

double KernelContext::segment_cost(std::size_t a, std::size_t b) const {
    if (a > b || b >= n_) throw Error("segment_cost: bad range");
    const std::size_t stride = n_ + 1;
    const double block = prefix_[(b + 1) * stride + (b + 1)] -
                         prefix_[a * stride + (b + 1)] -
                         prefix_[(b + 1) * stride + a] + prefix_[a * stride + a];
    const double len = static_cast<double>(b - a + 1);
    return len - block / len;
}

PeltResult pelt_segment(const KernelContext& ctx, const PeltOptions& opt) {
    const std::size_t n = ctx.size();
    if (n == 0) throw Error("pelt_segment: empty sequence");
    if (!(opt.penalty > 0.0)) throw Error("pelt_segment: penalty must be positive");
    const std::size_t min_size = std::max<std::size_t>(opt.min_size, 1);

    constexpr double kInf = std::numeric_limits<double>::infinity();
    // F[t]: optimal cost of the prefix of length t, counting `penalty` per
    // change point (F[0] = -penalty so that m segments contribute (m-1)
    // penalties).  prev[t] / segs[t] back-track the optimum under the tie
    // rule: fewer change points first, then the earlier last change point.
    std::vector<double> F(n + 1, kInf);
    std::vector<std::size_t> prev(n + 1, 0);
    std::vector<std::size_t> segs(n + 1, 0);
    F[0] = -opt.penalty;

    std::vector<std::size_t> cands;            // admissible previous boundaries
    std::vector<std::pair<std::size_t, std::size_t>> pending;  // (drop_at, s)

    for (std::size_t t = 1; t <= n; ++t) {
        if (t >= min_size && std::isfinite(F[t - min_size]))
            cands.push_back(t - min_size);
        if (opt.prune && !pending.empty()) {
            std::size_t kept = 0;
            for (const auto& [drop_at, s] : pending)
                if (drop_at > t)
                    pending[kept++] = {drop_at, s};
                else
                    cands.erase(std::remove(cands.begin(), cands.end(), s),
                                cands.end());
            pending.resize(kept);
        }

        double best = kInf;
        std::size_t best_s = 0, best_segs = 0;
        for (const std::size_t s : cands) {
            const double total = F[s] + opt.penalty + ctx.segment_cost(s, t - 1);
            const std::size_t m = segs[s] + 1;
            if (total < best ||
                (total == best && (m < best_segs || (m == best_segs && s < best_s)))) {
                best = total;
                best_s = s;
                best_segs = m;
            }
        }
        F[t] = best;
        prev[t] = best_s;
        segs[t] = best_segs;

        // A candidate s strictly dominated at t stays strictly dominated by
        // boundary t at every later time (within-segment cost is subadditive),
        // but t itself only becomes admissible at t + min_size, so the removal
        // is deferred until then.
        if (opt.prune && std::isfinite(F[t])) {
            for (const std::size_t s : cands) {
                const double slack = 1e-10 * (1.0 + std::abs(F[t]));
                if (F[s] + ctx.segment_cost(s, t - 1) > F[t] + slack)
                    pending.emplace_back(t + min_size, s);
            }
            if (!pending.empty()) {
                std::sort(pending.begin(), pending.end());
                pending.erase(std::unique(pending.begin(), pending.end()),
                              pending.end());
            }
        }
    }

    if (!std::isfinite(F[n]))
        throw Error("pelt_segment: no segmentation satisfies min_size " +
                    std::to_string(min_size) + " for n = " + std::to_string(n));

    PeltResult res;
    res.objective = F[n];
    for (std::size_t t = n; t > 0; t = prev[t])
        if (prev[t] > 0) res.change_points.push_back(static_cast<std::uint32_t>(prev[t]));
    std::reverse(res.change_points.begin(), res.change_points.end());
    return res;
}

Segmentation segment_document(const SentenceEmbeddingSequence& seq,
                              const SegmenterParams& params) {
    const KernelContext ctx(seq, median_bandwidth(seq));
    PeltOptions opt;
    opt.penalty = params.penalty;
    opt.min_size = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::floor(params.min_frac * static_cast<double>(seq.n) + 1e-12)));

    PeltResult res = pelt_segment(ctx, opt);
    double penalty_used = params.penalty;
    if (res.change_points.empty() && params.fallback_penalty != params.penalty) {
        opt.penalty = params.fallback_penalty;
        res = pelt_segment(ctx, opt);
        penalty_used = params.fallback_penalty;
    }

    Segmentation seg;
    seg.change_points = std::move(res.change_points);
    seg.n = seq.n;
    seg.penalty_used = penalty_used;
    seg.objective = res.objective;
    return seg;
}

}  // namespace invlab

#include "invlab/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "invlab/error.hpp"
#include "invlab/parallel.hpp"
#include "invlab/rng.hpp"

namespace invlab {

namespace {

// Unit-normalized copy in double precision; rejects zero rows.
std::vector<double> normalized_points(const SentenceEmbeddingSequence& vectors) {
    const std::size_t n = vectors.n, d = vectors.d;
    std::vector<double> pts(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        double sq = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            const double v = vectors.data[i * d + c];
            sq += v * v;
        }
        if (!(sq > 0.0))
            throw InputError("spherical_kmeans: row " + std::to_string(i) +
                             " has zero norm");
        const double inv = 1.0 / std::sqrt(sq);
        for (std::size_t c = 0; c < d; ++c)
            pts[i * d + c] = vectors.data[i * d + c] * inv;
    }
    return pts;
}

double dot(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += a[c] * b[c];
    return s;
}

struct RestartOutcome {
    std::vector<int> assignment;
    double objective = -std::numeric_limits<double>::infinity();
};

RestartOutcome run_restart(const std::vector<double>& pts, std::size_t n,
                           std::size_t d, int k, std::uint64_t seed,
                           std::uint64_t restart, int max_iterations) {
    Rng rng(seed, restart);
    const std::size_t kk = static_cast<std::size_t>(k);

    // k-means++ seeding on the sphere: squared cosine distance weights.
    std::vector<std::size_t> centers;
    centers.push_back(rng.bounded(n));
    std::vector<double> best_sim(n, -1.0);
    while (centers.size() < kk) {
        const double* c = &pts[centers.back() * d];
        std::vector<double> weight(n);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            best_sim[i] = std::max(best_sim[i], dot(&pts[i * d], c, d));
            const double dist = std::max(0.0, 1.0 - best_sim[i]);
            weight[i] = dist * dist;
            total += weight[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double r = rng.uniform() * total, acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += weight[i];
                if (r < acc) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.bounded(n);
        }
        centers.push_back(pick);
    }

    std::vector<double> centroids(kk * d);
    for (std::size_t j = 0; j < kk; ++j)
        std::copy_n(&pts[centers[j] * d], d, &centroids[j * d]);

    std::vector<int> assignment(n, -1);
    std::vector<double> sim_to_own(n, 0.0);
    for (int it = 0; it < max_iterations; ++it) {
        // Assignment step; ties break toward the lowest centroid index.
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_s = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < kk; ++j) {
                const double s = dot(&pts[i * d], &centroids[j * d], d);
                if (s > best_s) {
                    best_s = s;
                    best = static_cast<int>(j);
                }
            }
            if (assignment[i] != best) {
                assignment[i] = best;
                changed = true;
            }
            sim_to_own[i] = best_s;
        }

        // Empty clusters steal the point farthest from its centroid.
        std::vector<std::size_t> count(kk, 0);
        for (const int a : assignment) ++count[static_cast<std::size_t>(a)];
        bool reseeded = false;
        for (std::size_t j = 0; j < kk; ++j) {
            if (count[j] > 0) continue;
            std::size_t far = n;
            double far_sim = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < n; ++i) {
                if (count[static_cast<std::size_t>(assignment[i])] <= 1) continue;
                if (sim_to_own[i] < far_sim) {
                    far_sim = sim_to_own[i];
                    far = i;
                }
            }
            if (far == n) break;  // no donor cluster with > 1 member
            --count[static_cast<std::size_t>(assignment[far])];
            assignment[far] = static_cast<int>(j);
            count[j] = 1;
            sim_to_own[far] = 1.0;  // becomes its own centroid below
            reseeded = true;
        }

        if (!changed && !reseeded && it > 0) break;

        // Update step: normalized member means.
        std::fill(centroids.begin(), centroids.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double* c = &centroids[static_cast<std::size_t>(assignment[i]) * d];
            for (std::size_t col = 0; col < d; ++col) c[col] += pts[i * d + col];
        }
        for (std::size_t j = 0; j < kk; ++j) {
            double* c = &centroids[j * d];
            const double norm = std::sqrt(dot(c, c, d));
            if (norm > 0.0) {
                for (std::size_t col = 0; col < d; ++col) c[col] /= norm;
            } else if (count[j] > 0) {
                // Cancelled-out mean: fall back to the first member.
                for (std::size_t i = 0; i < n; ++i)
                    if (assignment[i] == static_cast<int>(j)) {
                        std::copy_n(&pts[i * d], d, c);
                        break;
                    }
            }
        }
    }

    RestartOutcome out;
    out.assignment = std::move(assignment);
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        obj += dot(&pts[i * d],
                   &centroids[static_cast<std::size_t>(out.assignment[i]) * d], d);
    out.objective = obj;
    return out;
}

}  // namespace

Partition spherical_kmeans(const SentenceEmbeddingSequence& vectors,
                           const std::vector<std::string>& item_ids,
                           const KMeansOptions& opt) {
    const std::size_t n = vectors.n, d = vectors.d;
    if (opt.k < 1) throw InputError("spherical_kmeans: k must be >= 1");
    if (opt.restarts < 1) throw InputError("spherical_kmeans: restarts must be >= 1");
    if (n < static_cast<std::size_t>(opt.k))
        throw InputError("spherical_kmeans: " + std::to_string(n) +
                         " points but k = " + std::to_string(opt.k));
    if (!item_ids.empty() && item_ids.size() != n)
        throw InputError("spherical_kmeans: item id count mismatch");

    const std::vector<double> pts = normalized_points(vectors);

    std::vector<RestartOutcome> outcomes(static_cast<std::size_t>(opt.restarts));
    parallel_for(outcomes.size(), opt.threads, [&](std::size_t r) {
        outcomes[r] = run_restart(pts, n, d, opt.k, opt.seed, r, opt.max_iterations);
    });
    std::size_t best = 0;
    for (std::size_t r = 1; r < outcomes.size(); ++r)
        if (outcomes[r].objective > outcomes[best].objective) best = r;

    // Relabel clusters by first appearance for a canonical result.
    Partition part;
    part.item_ids = item_ids;
    if (part.item_ids.empty()) {
        part.item_ids.reserve(n);
        for (std::size_t i = 0; i < n; ++i) part.item_ids.push_back(std::to_string(i));
    }
    std::map<int, int> relabel;
    part.assignments.reserve(n);
    for (const int a : outcomes[best].assignment) {
        const auto [it, inserted] =
            relabel.emplace(a, static_cast<int>(relabel.size()));
        part.assignments.push_back(it->second);
        (void)inserted;
    }
    part.k = static_cast<int>(relabel.size());
    return part;
}

namespace {
double choose2(double x) { return x * (x - 1.0) / 2.0; }
}  // namespace

double adjusted_rand_index(const Partition& a, const Partition& b) {
    const std::size_t n = a.assignments.size();
    if (n != b.assignments.size())
        throw InputError("adjusted_rand_index: partitions cover " +
                         std::to_string(n) + " vs " +
                         std::to_string(b.assignments.size()) + " items");
    if (n < 2) throw InputError("adjusted_rand_index: need at least 2 items");

    // Align b to a's item order when both carry ids.
    std::vector<int> b_assign = b.assignments;
    if (!a.item_ids.empty() && !b.item_ids.empty() && a.item_ids != b.item_ids) {
        std::map<std::string, int> index;
        for (std::size_t i = 0; i < n; ++i)
            if (!index.emplace(b.item_ids[i], b.assignments[i]).second)
                throw InputError("adjusted_rand_index: duplicate item id \"" +
                                 b.item_ids[i] + "\"");
        for (std::size_t i = 0; i < n; ++i) {
            const auto it = index.find(a.item_ids[i]);
            if (it == index.end())
                throw InputError("adjusted_rand_index: item \"" + a.item_ids[i] +
                                 "\" missing from the second partition");
            b_assign[i] = it->second;
        }
    }

    std::map<std::pair<int, int>, std::size_t> contingency;
    std::map<int, std::size_t> row_sum, col_sum;
    for (std::size_t i = 0; i < n; ++i) {
        ++contingency[{a.assignments[i], b_assign[i]}];
        ++row_sum[a.assignments[i]];
        ++col_sum[b_assign[i]];
    }
    double index = 0.0, rows = 0.0, cols = 0.0;
    for (const auto& [key, cnt] : contingency)
        index += choose2(static_cast<double>(cnt));
    for (const auto& [key, cnt] : row_sum) rows += choose2(static_cast<double>(cnt));
    for (const auto& [key, cnt] : col_sum) cols += choose2(static_cast<double>(cnt));
    const double total = choose2(static_cast<double>(n));
    const double expected = rows * cols / total;
    const double maximum = (rows + cols) / 2.0;
    if (maximum == expected) return 1.0;
    return (index - expected) / (maximum - expected);
}

double macro_f1(const std::vector<std::string>& gold,
                const std::vector<std::string>& pred) {
    if (gold.size() != pred.size())
        throw InputError("macro_f1: label vectors differ in length");
    if (gold.empty()) throw InputError("macro_f1: empty input");

    std::set<std::string> classes(gold.begin(), gold.end());
    double sum = 0.0;
    for (const auto& cls : classes) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < gold.size(); ++i) {
            const bool g = gold[i] == cls, p = pred[i] == cls;
            tp += g && p;
            fp += !g && p;
            fn += g && !p;
        }
        const double prec = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        const double rec = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        sum += prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    }
    return sum / static_cast<double>(classes.size());
}

double mcc(const std::vector<std::string>& gold,
           const std::vector<std::string>& pred) {
    if (gold.size() != pred.size())
        throw InputError("mcc: label vectors differ in length");
    if (gold.empty()) throw InputError("mcc: empty input");

    std::map<std::string, std::size_t> cls_index;
    for (const auto& l : gold) cls_index.emplace(l, cls_index.size());
    for (const auto& l : pred) cls_index.emplace(l, cls_index.size());
    const std::size_t k = cls_index.size(), n = gold.size();
    std::vector<double> confusion(k * k, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        confusion[cls_index[gold[i]] * k + cls_index[pred[i]]] += 1.0;

    double trace = 0.0;
    std::vector<double> t(k, 0.0), p(k, 0.0);  // gold / predicted counts
    for (std::size_t r = 0; r < k; ++r)
        for (std::size_t c = 0; c < k; ++c) {
            t[r] += confusion[r * k + c];
            p[c] += confusion[r * k + c];
            if (r == c) trace += confusion[r * k + c];
        }
    const double s = static_cast<double>(n);
    double tp_sum = 0.0, tt = 0.0, pp = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        tp_sum += t[i] * p[i];
        tt += t[i] * t[i];
        pp += p[i] * p[i];
    }
    const double numerator = trace * s - tp_sum;
    const double denominator = std::sqrt((s * s - pp) * (s * s - tt));
    if (denominator == 0.0) return 0.0;
    return numerator / denominator;
}

std::pair<std::vector<std::string>, std::vector<std::string>> align_labels(
    const LabeledItems& gold, const LabeledItems& pred) {
    std::map<std::string, std::string> by_id;
    for (std::size_t i = 0; i < pred.item_ids.size(); ++i)
        by_id[pred.item_ids[i]] = pred.labels[i];
    std::vector<std::string> g, p;
    g.reserve(gold.item_ids.size());
    p.reserve(gold.item_ids.size());
    for (std::size_t i = 0; i < gold.item_ids.size(); ++i) {
        const auto it = by_id.find(gold.item_ids[i]);
        if (it == by_id.end())
            throw InputError("align_labels: no prediction for item \"" +
                             gold.item_ids[i] + "\"");
        g.push_back(gold.labels[i]);
        p.push_back(it->second);
    }
    return {std::move(g), std::move(p)};
}

std::vector<PairObservation> agreement_table(
    const std::string& language,
    const std::vector<std::pair<const ConfigEntry*, const Partition*>>& partitions) {
    auto sorted = partitions;
    std::sort(sorted.begin(), sorted.end(), [](const auto& x, const auto& y) {
        return x.first->config_id < y.first->config_id;
    });

    std::vector<PairObservation> out;
    for (std::size_t i = 0; i < sorted.size(); ++i)
        for (std::size_t j = i + 1; j < sorted.size(); ++j) {
            const ConfigEntry& ca = *sorted[i].first;
            const ConfigEntry& cb = *sorted[j].first;
            PairObservation obs;
            obs.language = language;
            obs.config_a = ca.config_id;
            obs.config_b = cb.config_id;
            obs.type_a = ca.pipeline_type();
            obs.type_b = cb.pipeline_type();
            obs.pair_type = pair_type_label(obs.type_a, obs.type_b);
            obs.same_model = ca.model_id == cb.model_id && ca.applied_to != cb.applied_to;
            obs.n_entries =
                static_cast<std::uint32_t>(sorted[i].second->assignments.size());
            obs.value = adjusted_rand_index(*sorted[i].second, *sorted[j].second);
            out.push_back(std::move(obs));
        }
    return out;
}

}  // namespace invlab

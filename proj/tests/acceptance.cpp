// Acceptance gate: one pass/fail line per release criterion, exit status 0
// only when every criterion holds.  Each check verifies production code
// against an independent oracle, a planted ground truth, or a structural
// invariant; nothing here reuses library internals to compute expectations.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "invlab/aligner.hpp"
#include "invlab/corpus.hpp"
#include "invlab/downstream.hpp"
#include "invlab/inference.hpp"
#include "invlab/pipeline.hpp"
#include "invlab/pooler.hpp"
#include "invlab/report.hpp"
#include "invlab/rng.hpp"
#include "invlab/segmenter.hpp"
#include "invlab/simcorr.hpp"
#include "invlab/synth.hpp"
#include "oracles.hpp"

using namespace invlab;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct CheckResult {
    bool ok = true;
    std::string detail;
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), pattern, v);
    return buf;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

// ---------------------------------------------------------------------------
// 1. segmentation
// ---------------------------------------------------------------------------

CheckResult check_segmentation() {
    const auto start = Clock::now();
    Rng rng(101);
    double worst = 0.0;
    int cp_mismatches = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::uint32_t n = 2 + static_cast<std::uint32_t>(rng.bounded(11));
        const std::uint32_t d = 1 + static_cast<std::uint32_t>(rng.bounded(4));
        const auto seq = oracle::random_unit_sequence(rng.next(), n, d);
        const double penalty = 0.1 + 4.9 * rng.uniform();
        const std::size_t min_size = 1 + rng.bounded(2);
        const double bandwidth = median_bandwidth(seq);
        const KernelContext ctx(seq, bandwidth);

        PeltOptions opt;
        opt.penalty = penalty;
        opt.min_size = min_size;
        const PeltResult got = pelt_segment(ctx, opt);
        const auto want =
            oracle::exhaustive_segment(seq, bandwidth, penalty, min_size);
        worst = std::max(worst, std::fabs(got.objective - want.objective));
        if (want.runner_up_gap > 1e-6 && got.change_points != want.change_points)
            ++cp_mismatches;

        opt.prune = false;
        const PeltResult unpruned = pelt_segment(ctx, opt);
        if (unpruned.change_points != got.change_points ||
            unpruned.objective != got.objective)
            ++cp_mismatches;
    }
    const double elapsed = seconds_since(start);
    CheckResult r;
    r.ok = worst <= 1e-9 && cp_mismatches == 0 && elapsed < 30.0;
    r.detail = "200 sequences, max objective gap " + fmt("%.2e", worst) + ", " +
               fmt("%.1f", elapsed) + "s";
    return r;
}

// ---------------------------------------------------------------------------
// 2. alignment
// ---------------------------------------------------------------------------

CheckResult check_alignment() {
    Rng rng(202);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::uint32_t na = 1 + static_cast<std::uint32_t>(rng.bounded(8));
        const std::uint32_t nb = 1 + static_cast<std::uint32_t>(rng.bounded(8));
        const std::uint32_t d = 2 + static_cast<std::uint32_t>(rng.bounded(4));
        const auto a = oracle::random_unit_sequence(rng.next(), na, d);
        const auto b = oracle::random_unit_sequence(rng.next(), nb, d);
        const double gap = -0.5 + 0.45 * rng.uniform();
        const AlignmentMap got = monotone_align(a, b, gap);
        const double want = oracle::exhaustive_alignment_score(a, b, gap);
        worst = std::max(worst, std::fabs(got.total_score - want));
    }
    CheckResult r;
    r.ok = worst <= 1e-9;
    r.detail = "200 pairs, max score gap " + fmt("%.2e", worst);
    return r;
}

// ---------------------------------------------------------------------------
// 3. centrality
// ---------------------------------------------------------------------------

CheckResult check_pagerank() {
    Rng rng(303);
    double worst = 0.0, worst_sum = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::uint32_t n = 2 + static_cast<std::uint32_t>(rng.bounded(9));
        const std::uint32_t d = 2 + static_cast<std::uint32_t>(rng.bounded(5));
        const auto seq = oracle::random_unit_sequence(rng.next(), n, d);
        const SentenceGraph graph = sentence_graph(seq);
        const std::vector<double> got = pagerank(graph);
        const std::vector<double> want = oracle::dense_pagerank(graph, 0.85);
        double sum = 0.0;
        for (std::size_t i = 0; i < got.size(); ++i) {
            worst = std::max(worst, std::fabs(got[i] - want[i]));
            sum += got[i];
        }
        worst_sum = std::max(worst_sum, std::fabs(sum - 1.0));
    }
    CheckResult r;
    r.ok = worst <= 1e-8 && worst_sum <= 1e-9;
    r.detail = "100 graphs, max weight gap " + fmt("%.2e", worst) +
               ", max sum gap " + fmt("%.2e", worst_sum);
    return r;
}

// ---------------------------------------------------------------------------
// 4. similarity / correlation
// ---------------------------------------------------------------------------

CheckResult check_similarity() {
    const auto seq = oracle::random_unit_sequence(404, 40, 9);
    const SimilarityMatrix base = similarity_matrix(seq, 1);
    double worst = 0.0;
    for (std::size_t i = 0; i < seq.n; ++i)
        for (std::size_t j = i + 1; j < seq.n; ++j)
            worst = std::max(worst, std::fabs(static_cast<double>(base.at(i, j)) -
                                              oracle::naive_cosine(seq.row(i),
                                                                   seq.row(j))));

    bool bit_exact = true;
    for (int threads : {2, 3, 5, 8}) {
        const SimilarityMatrix other = similarity_matrix(seq, threads);
        if (other.upper.size() != base.upper.size() ||
            std::memcmp(other.upper.data(), base.upper.data(),
                        base.upper.size() * sizeof(float)) != 0)
            bit_exact = false;
    }

    Rng rng(405);
    double worst_r = 0.0;
    for (int trial = 0; trial < 60; ++trial) {
        const std::uint32_t n = 4 + static_cast<std::uint32_t>(rng.bounded(22));
        const auto pa = oracle::random_unit_sequence(rng.next(), n, 6);
        const auto pb = oracle::random_unit_sequence(rng.next(), n, 6);
        const SimilarityMatrix ma = similarity_matrix(pa, 1);
        const SimilarityMatrix mb = similarity_matrix(pb, 1);
        const double got = upper_triangle_pearson(ma, mb);
        std::vector<double> x(ma.upper.begin(), ma.upper.end());
        std::vector<double> y(mb.upper.begin(), mb.upper.end());
        worst_r = std::max(worst_r,
                           std::fabs(got - oracle::two_pass_pearson(x, y)));
    }

    // Correlation tables across thread counts must agree bit for bit.
    ConfigEntry c1, c2, c3;
    c1.config_id = "a";
    c2.config_id = "b";
    c3.config_id = "c";
    const auto m1 = similarity_matrix(oracle::random_unit_sequence(9, 18, 5), 1);
    const auto m2 = similarity_matrix(oracle::random_unit_sequence(10, 18, 5), 1);
    const auto m3 = similarity_matrix(oracle::random_unit_sequence(11, 18, 5), 1);
    const std::vector<std::pair<const ConfigEntry*, const SimilarityMatrix*>>
        input = {{&c1, &m1}, {&c2, &m2}, {&c3, &m3}};
    const auto table1 = correlation_table("lang", input, 1);
    for (int threads : {2, 4, 7}) {
        const auto tableN = correlation_table("lang", input, threads);
        if (tableN.size() != table1.size()) bit_exact = false;
        for (std::size_t i = 0; i < table1.size(); ++i)
            if (std::memcmp(&table1[i].value, &tableN[i].value,
                            sizeof(double)) != 0)
                bit_exact = false;
    }

    CheckResult r;
    r.ok = worst <= 1e-6 && worst_r <= 1e-12 && bit_exact;
    r.detail = "cosine gap " + fmt("%.2e", worst) + ", correlation gap " +
               fmt("%.2e", worst_r) +
               (bit_exact ? ", thread-invariant" : ", THREAD-DEPENDENT");
    return r;
}

// ---------------------------------------------------------------------------
// 5. variance-component recovery
// ---------------------------------------------------------------------------

CheckResult check_recovery() {
    std::vector<double> err_cfg, err_resid;
    int failures = 0;
    for (int seed = 0; seed < 200; ++seed) {
        oracle::PairTableSpec spec;
        spec.n_o = 40;
        spec.n_t = 0;
        const auto table = oracle::synthetic_pair_table(20000 + seed, spec);
        std::vector<FamilyObservation> obs;
        obs.reserve(table.size());
        for (const auto& row : table)
            obs.push_back({row.value, row.config_a, row.config_b, row.pair_type});
        const VarianceComponentsFit fit = fit_variance_components(obs);
        if (!fit.converged) {
            ++failures;
            continue;
        }
        err_cfg.push_back(std::fabs(fit.sigma2_cfg - 0.01) / 0.01);
        err_resid.push_back(std::fabs(fit.sigma2_resid - 0.0025) / 0.0025);
    }

    VarianceComponentsFit formula;
    formula.sigma2_cfg = 0.04;
    formula.sigma2_resid = 0.01;
    const bool sigma_exact = marginal_sigma(formula) == 0.3;

    CheckResult r;
    const double med_cfg = median_of(err_cfg);
    const double med_resid = median_of(err_resid);
    r.ok = failures <= 5 && med_cfg < 0.15 && med_resid < 0.15 && sigma_exact;
    r.detail = "200 seeds, median rel err cfg " + fmt("%.3f", med_cfg) +
               " resid " + fmt("%.3f", med_resid) + ", marginal scale " +
               (sigma_exact ? "exact" : "INEXACT");
    return r;
}

// ---------------------------------------------------------------------------
// 6 + 7. planted verdicts and margin-sweep monotonicity
// ---------------------------------------------------------------------------

struct PlantedOutcome {
    int invariant = 0, distorted = 0, equivalent = 0, inferior = 0, superior = 0;
    std::vector<HypothesisResult> all_results;  // full sweeps, for monotonicity
};

PlantedOutcome run_planted(int seeds) {
    PlantedOutcome out;
    const double shift = 3.0 * 0.15;  // 3 * sqrt(2*0.10^2 + 0.05^2)
    for (int seed = 0; seed < seeds; ++seed) {
        oracle::PairTableSpec null_spec;
        null_spec.n_o = 20;
        null_spec.n_t = 20;

        auto spec_distorted = null_spec;
        spec_distorted.mean_ot = spec_distorted.mean_oo - shift;

        auto spec_two = null_spec;
        spec_two.n_m = 20;

        auto spec_inferior = spec_two;
        spec_inferior.mean_ot = spec_inferior.mean_om - shift;
        auto spec_superior = spec_two;
        spec_superior.mean_ot = spec_superior.mean_om + shift;

        const auto run = [&](const char* tag, const oracle::PairTableSpec& spec,
                             Hypothesis hyp, std::uint64_t salt) {
            const auto table =
                oracle::synthetic_pair_table(30000 + 10 * seed + salt, spec);
            HypothesisOptions opt;
            opt.seed = 40000 + 10 * static_cast<std::uint64_t>(seed) + salt;
            const auto res =
                run_hypothesis(tag + std::to_string(seed), table, hyp, opt);
            Decision at_kappa1 = Decision::indeterminate;
            for (const auto& row : res)
                if (row.kappa == 1.0) at_kappa1 = row.decision;
            out.all_results.insert(out.all_results.end(), res.begin(), res.end());
            return at_kappa1;
        };

        if (run("null", null_spec, Hypothesis::baseline, 0) == Decision::invariant)
            ++out.invariant;
        if (run("shift", spec_distorted, Hypothesis::baseline, 1) ==
            Decision::distorted)
            ++out.distorted;
        if (run("same", spec_two, Hypothesis::om_ot_equivalence, 2) ==
            Decision::equivalent)
            ++out.equivalent;
        if (run("worse", spec_inferior, Hypothesis::om_ot_equivalence, 3) ==
            Decision::inferior)
            ++out.inferior;
        if (run("better", spec_superior, Hypothesis::om_ot_equivalence, 4) ==
            Decision::superior)
            ++out.superior;
    }
    return out;
}

CheckResult check_planted(const PlantedOutcome& out, int seeds) {
    CheckResult r;
    const int need = (seeds * 9) / 10;
    r.ok = out.invariant >= need && out.distorted >= need &&
           out.equivalent >= need && out.inferior >= need && out.superior >= need;
    std::ostringstream detail;
    detail << "of " << seeds << " seeds: invariant " << out.invariant
           << ", distorted " << out.distorted << ", equivalent " << out.equivalent
           << ", inferior " << out.inferior << ", superior " << out.superior;
    r.detail = detail.str();
    return r;
}

bool upward_closed(const std::vector<std::pair<double, bool>>& flags) {
    // Once true at some kappa, true at every larger kappa.
    for (std::size_t i = 1; i < flags.size(); ++i)
        if (flags[i - 1].second && !flags[i].second) return false;
    return true;
}

CheckResult check_monotonicity(std::vector<HypothesisResult> results) {
    apply_bh_adjustment(results, 0.05);

    // Per (language, hypothesis) sweep: positive verdicts are upward-closed
    // and negative verdicts downward-closed in kappa, for both the raw and
    // the FDR-adjusted decisions.
    std::map<std::pair<std::string, int>, std::vector<const HypothesisResult*>>
        sweeps;
    for (const auto& r : results)
        sweeps[{r.language, static_cast<int>(r.hypothesis)}].push_back(&r);

    int violations = 0;
    for (auto& [key, rows] : sweeps) {
        std::sort(rows.begin(), rows.end(),
                  [](const HypothesisResult* a, const HypothesisResult* b) {
                      return a->kappa < b->kappa;
                  });
        const auto check_one = [&](auto decision_of) {
            std::vector<std::pair<double, bool>> positive, negative, negative2;
            for (const auto* row : rows) {
                const Decision d = decision_of(row);
                positive.emplace_back(row->kappa, d == Decision::invariant ||
                                                      d == Decision::equivalent);
                negative.emplace_back(row->kappa, d == Decision::distorted ||
                                                      d == Decision::inferior);
                negative2.emplace_back(row->kappa, d == Decision::superior);
            }
            std::reverse(negative.begin(), negative.end());
            std::reverse(negative2.begin(), negative2.end());
            if (!upward_closed(positive)) ++violations;    // grows with kappa
            if (!upward_closed(negative)) ++violations;    // shrinks with kappa
            if (!upward_closed(negative2)) ++violations;
        };
        check_one([](const HypothesisResult* r) { return r->decision; });
        check_one([](const HypothesisResult* r) { return r->bh_decision; });
    }

    // Aggregate decision counts must be monotone across the sweep as well.
    int count_violations = 0;
    for (const bool adjusted : {false, true}) {
        const auto counts = sweep_counts(results, adjusted);
        std::map<int, std::vector<SweepCounts>> per_hyp;
        for (const auto& c : counts)
            per_hyp[static_cast<int>(c.hypothesis)].push_back(c);
        for (auto& [hyp, rows] : per_hyp) {
            std::sort(rows.begin(), rows.end(),
                      [](const SweepCounts& a, const SweepCounts& b) {
                          return a.kappa < b.kappa;
                      });
            for (std::size_t i = 1; i < rows.size(); ++i) {
                if (rows[i].invariant < rows[i - 1].invariant) ++count_violations;
                if (rows[i].distorted > rows[i - 1].distorted) ++count_violations;
                if (rows[i].superior > rows[i - 1].superior) ++count_violations;
            }
        }
    }

    CheckResult r;
    r.ok = violations == 0 && count_violations == 0;
    std::ostringstream detail;
    detail << sweeps.size() << " sweeps, " << violations
           << " per-language violations, " << count_violations
           << " count violations";
    r.detail = detail.str();
    return r;
}

// ---------------------------------------------------------------------------
// 8. false-discovery control
// ---------------------------------------------------------------------------

CheckResult check_bh() {
    Rng rng(808);
    int mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t m = 1 + rng.bounded(12);
        std::vector<double> p(m);
        const double scale = trial % 4 == 0 ? 0.08 : 1.0;
        for (auto& v : p) v = rng.uniform() * scale;
        if (bh_adjust(p, 0.05) != oracle::brute_force_bh(p, 0.05)) ++mismatches;
    }
    const std::vector<double> worked = {0.001, 0.011, 0.021, 0.031, 0.041};
    const auto flags = bh_adjust(worked, 0.05);
    const bool all_five =
        std::count(flags.begin(), flags.end(), true) == 5;
    CheckResult r;
    r.ok = mismatches == 0 && all_five;
    std::ostringstream detail;
    detail << "1000 vectors, " << mismatches << " mismatches, worked example "
           << (all_five ? "rejects all five" : "WRONG");
    r.detail = detail.str();
    return r;
}

// ---------------------------------------------------------------------------
// 9. agreement metrics and clustering
// ---------------------------------------------------------------------------

CheckResult check_downstream() {
    Rng rng(909);
    double worst_ari = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 2 + rng.bounded(11);
        const int ka = 1 + static_cast<int>(rng.bounded(4));
        const int kb = 1 + static_cast<int>(rng.bounded(4));
        Partition a, b;
        for (std::size_t i = 0; i < n; ++i) {
            a.item_ids.push_back(std::to_string(i));
            b.item_ids.push_back(std::to_string(i));
            a.assignments.push_back(
                static_cast<int>(rng.bounded(static_cast<std::uint64_t>(ka))));
            b.assignments.push_back(
                static_cast<int>(rng.bounded(static_cast<std::uint64_t>(kb))));
        }
        a.k = ka;
        b.k = kb;
        worst_ari = std::max(
            worst_ari, std::fabs(adjusted_rand_index(a, b) -
                                 oracle::contingency_ari(a.assignments,
                                                         b.assignments)));
    }

    double worst_cls = 0.0;
    const std::vector<std::string> alphabet = {"a", "b", "c", "d"};
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 3 + rng.bounded(30);
        std::vector<std::string> gold(n), pred(n);
        for (std::size_t i = 0; i < n; ++i) {
            gold[i] = alphabet[rng.bounded(alphabet.size())];
            pred[i] = rng.uniform() < 0.5 ? gold[i]
                                          : alphabet[rng.bounded(alphabet.size())];
        }
        worst_cls = std::max(worst_cls,
                             std::fabs(macro_f1(gold, pred) -
                                       oracle::confusion_macro_f1(gold, pred)));
        worst_cls = std::max(
            worst_cls, std::fabs(mcc(gold, pred) -
                                 oracle::confusion_mcc(gold, pred)));
    }

    double worst_obj = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng noise(7000 + seed);
        SentenceEmbeddingSequence pts;
        pts.d = 4;
        pts.n = 8;
        for (std::size_t i = 0; i < 8; ++i)
            for (std::size_t j = 0; j < 4; ++j) {
                const double center = (i < 4 ? j == 0 : j == 1) ? 1.0 : 0.0;
                pts.data.push_back(static_cast<float>(
                    center + 0.08 * noise.gaussian()));
            }
        KMeansOptions opt;
        opt.k = 2;
        opt.seed = seed;
        const Partition part =
            spherical_kmeans(pts, std::vector<std::string>{}, opt);
        const double got = oracle::assignment_objective(pts, part.assignments, 2);
        const double best = oracle::exhaustive_kmeans_objective(pts, 2);
        worst_obj = std::max(worst_obj, best - got);
    }

    CheckResult r;
    r.ok = worst_ari <= 1e-12 && worst_cls <= 1e-12 && worst_obj <= 1e-9;
    r.detail = "ARI gap " + fmt("%.2e", worst_ari) + ", F1/MCC gap " +
               fmt("%.2e", worst_cls) + ", clustering objective gap " +
               fmt("%.2e", worst_obj);
    return r;
}

// ---------------------------------------------------------------------------
// 10. reported pair counts
// ---------------------------------------------------------------------------

CheckResult check_pair_counts() {
    const oracle::PairTableSpec spec;  // 6 original and 7 translated configs
    const auto table = oracle::synthetic_pair_table(1234, spec);
    HypothesisOptions opt;
    opt.seed = 99;
    const auto results =
        run_hypothesis("fixture", table, Hypothesis::baseline, opt);

    bool counts_ok = !results.empty();
    for (const auto& row : results)
        counts_ok = counts_ok && row.n_ordered_pairs == 114 &&
                    row.n_o_configs == 6 && row.n_t_configs == 7;

    oracle::TempDir dir("acc-parity");
    const fs::path path = dir.path / "verdicts.csv";
    std::vector<VerdictRow> rows;
    for (const auto& row : results) rows.push_back(to_verdict_row(row));
    write_verdict_table(path, rows);
    const auto emitted = read_verdict_table(path);
    bool table_ok = emitted.size() == results.size();
    for (const auto& row : emitted)
        table_ok = table_ok && row.n == 114 && row.n_o == 6 && row.n_t == 7;

    CheckResult r;
    r.ok = counts_ok && table_ok;
    r.detail = std::string("in-memory counts ") + (counts_ok ? "ok" : "WRONG") +
               ", emitted table " + (table_ok ? "reports n=114, n_O=6, n_T=7"
                                              : "WRONG");
    return r;
}

// ---------------------------------------------------------------------------
// 11. end-to-end determinism
// ---------------------------------------------------------------------------

std::map<std::string, std::string> tree_snapshot(const fs::path& root) {
    std::map<std::string, std::string> snap;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        std::ifstream in(entry.path(), std::ios::binary);
        snap[fs::relative(entry.path(), root).generic_string()] =
            std::string((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    }
    return snap;
}

CheckResult check_end_to_end() {
    oracle::TempDir dir("acc-e2e");

    SynthOptions synth;
    synth.seed = 2026;
    synth.languages = 2;
    synth.documents_per_language = 5;  // ten documents including translations
    synth.dimension = 16;
    const fs::path manifest = write_synthetic_corpus(dir.path / "corpus", synth);

    const auto run = [&](const std::string& name, int threads) {
        RunConfig config;
        config.manifest_path = manifest;
        config.out_dir = dir.path / name;
        config.seed = 11;
        config.kmeans.k = 4;
        config.threads = threads;
        config.log = [](const std::string&) {};
        run_pipeline(config);
        return tree_snapshot(config.out_dir);
    };

    const auto start = Clock::now();
    const auto base = run("t1", 1);
    const double first_run = seconds_since(start);

    const auto four = run("t4", 4);
    const auto eight = run("t8", 8);
    const auto again = run("t1b", 1);

    const bool identical = base == four && base == eight && base == again;
    CheckResult r;
    r.ok = first_run < 60.0 && identical && base.count("report/summary.json") == 1;
    r.detail = "single-thread run " + fmt("%.1f", first_run) + "s, " +
               std::to_string(base.size()) + " files, reruns at 1/4/8 threads " +
               (identical ? "byte-identical" : "DIFFER");
    return r;
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        CheckResult result;
    };

    const PlantedOutcome planted = run_planted(100);

    const std::vector<Criterion> criteria = {
        {"segmentation optimum matches exhaustive search", check_segmentation()},
        {"alignment score matches exhaustive monotone paths", check_alignment()},
        {"centrality weights match dense power iteration", check_pagerank()},
        {"similarity and correlation match oracles, thread-stable",
         check_similarity()},
        {"variance components recovered from simulated tables", check_recovery()},
        {"planted effects yield the intended verdicts",
         check_planted(planted, 100)},
        {"verdicts sweep monotonically in the margin multiplier",
         check_monotonicity(planted.all_results)},
        {"false-discovery step-up matches the brute-force rule", check_bh()},
        {"agreement metrics and clustering match exhaustive oracles",
         check_downstream()},
        {"verdict tables report ordered-pair and config counts",
         check_pair_counts()},
        {"end-to-end pipeline is fast and byte-identical", check_end_to_end()},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto& c = criteria[i];
        if (!c.result.ok) ++failures;
        std::printf("[%2zu] %s  %s (%s)\n", i + 1,
                    c.result.ok ? "PASS" : "FAIL", c.name,
                    c.result.detail.c_str());
    }
    if (failures)
        std::printf("%d of %zu criteria FAILED\n", failures, criteria.size());
    else
        std::printf("all %zu criteria passed\n", criteria.size());
    return failures == 0 ? 0 : 1;
}

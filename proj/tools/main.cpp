// Command line front end: runs the full measurement pipeline or any single
// stage on persisted intermediates, plus a synthetic-corpus generator.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "invlab/aligner.hpp"
#include "invlab/corpus.hpp"
#include "invlab/error.hpp"
#include "invlab/inference.hpp"
#include "invlab/pipeline.hpp"
#include "invlab/report.hpp"
#include "invlab/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw invlab::InputError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

json result_to_json(const invlab::HypothesisResult& r) {
    json j;
    j["language"] = r.language;
    j["hypothesis"] = invlab::to_string(r.hypothesis);
    j["kappa"] = r.kappa;
    j["sigma_marginal"] = r.sigma_marginal;
    j["delta"] = r.delta;
    j["d_hat"] = r.d_hat;
    j["se"] = r.se;
    j["ci_lo"] = r.ci_lo;
    j["ci_hi"] = r.ci_hi;
    j["p_inv"] = r.p_inv;
    j["p_dist"] = r.p_dist;
    j["decision"] = invlab::to_string(r.decision);
    j["bh_decision"] = invlab::to_string(r.bh_decision);
    j["backend"] = invlab::to_string(r.backend);
    j["fit_converged"] = r.fit_converged;
    j["n_observations"] = r.n_observations;
    j["n_ordered_pairs"] = r.n_ordered_pairs;
    j["n_ref_configs"] = r.n_ref_configs;
    j["n_cand_configs"] = r.n_cand_configs;
    j["n_o_configs"] = r.n_o_configs;
    j["n_t_configs"] = r.n_t_configs;
    j["best_candidate_config"] = r.best_candidate_config;
    return j;
}

void write_results_json(const fs::path& path,
                        const std::vector<invlab::HypothesisResult>& results) {
    json j = json::array();
    for (const auto& r : results) j.push_back(result_to_json(r));
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw invlab::InputError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

// Emits one observation source's worth of results for the standalone `test`
// subcommand when a hypothesis subset was requested.
std::vector<invlab::HypothesisResult> run_filtered_test(
    const invlab::CorpusManifest& m, const invlab::RunConfig& config,
    const std::vector<invlab::Hypothesis>& hypotheses, const fs::path& source_dir) {
    std::vector<invlab::HypothesisResult> all;
    for (const std::string& language : m.languages) {
        const fs::path path = source_dir / (language + ".csv");
        if (!fs::exists(path))
            throw invlab::InputError("missing observation table " + path.string() +
                                     "; run the earlier stages first");
        const auto observations = invlab::read_observations(path);
        for (const invlab::Hypothesis hyp : hypotheses) {
            invlab::HypothesisOptions opt;
            opt.kappas = config.kappas;
            opt.alpha = config.alpha;
            opt.bootstrap_replicates = config.bootstrap_replicates;
            opt.seed = invlab::derive_seed(config.seed, language, hyp);
            opt.threads = config.threads;
            try {
                auto rows = invlab::run_hypothesis(language, observations, hyp, opt);
                all.insert(all.end(), rows.begin(), rows.end());
            } catch (const invlab::DegenerateStatError& e) {
                std::cerr << "note: skipping hypothesis: " << e.what() << "\n";
            }
        }
    }
    invlab::apply_bh_adjustment(all, config.q);
    return all;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "invariance-lab: measures whether pairwise semantic-similarity structure "
        "of embedded documents survives machine translation"};
    app.require_subcommand(1);

    invlab::RunConfig config;
    std::string manifest, out;
    std::string hypothesis_arg = "all";
    std::vector<double> test_kappas = {1.0};
    invlab::SynthOptions synth;
    std::string synth_out;
    bool synth_no_labels = false;
    std::string align_source, align_target;

    const auto add_common = [&](CLI::App* cmd, bool manifest_required = true) {
        auto* mo = cmd->add_option("--manifest", manifest, "corpus manifest (JSON)")
                       ->check(CLI::ExistingFile);
        auto* oo = cmd->add_option("--out", out, "output directory");
        if (manifest_required) {
            mo->required();
            oo->required();
        }
        cmd->add_option("--threads", config.threads, "worker threads")
            ->check(CLI::PositiveNumber);
        cmd->add_flag("--force", config.force,
                      "recompute even when cached outputs are fresh");
    };
    const auto add_segment_opts = [&](CLI::App* cmd) {
        cmd->add_option("--penalty", config.segmenter.penalty,
                        "segmentation penalty per change point");
        cmd->add_option("--fallback-penalty", config.segmenter.fallback_penalty,
                        "penalty retried when no change point is found");
        cmd->add_option("--min-frac", config.segmenter.min_frac,
                        "minimum segment length as a fraction of the document");
    };
    const auto add_align_opts = [&](CLI::App* cmd) {
        cmd->add_option("--gap-penalty", config.gap_penalty,
                        "alignment gap penalty");
    };
    const auto add_pool_opts = [&](CLI::App* cmd) {
        cmd->add_option("--damping", config.pagerank.damping,
                        "centrality damping factor");
        cmd->add_option("--pr-tol", config.pagerank.tol,
                        "centrality convergence tolerance (L1)");
    };
    const auto add_cluster_opts = [&](CLI::App* cmd) {
        cmd->add_option("--k", config.kmeans.k, "number of clusters");
        cmd->add_option("--restarts", config.kmeans.restarts,
                        "independent clustering restarts");
    };
    const auto add_test_opts = [&](CLI::App* cmd, std::vector<double>& kappas,
                                   bool seed_required) {
        cmd->add_option("--kappa", kappas,
                        "margin multiples of the marginal scale (comma separated)")
            ->delimiter(',');
        cmd->add_option("--alpha", config.alpha, "test level");
        cmd->add_option("--q", config.q, "false-discovery-rate level");
        auto* so = cmd->add_option("--seed", config.seed, "random seed");
        if (seed_required) so->required();
        cmd->add_option("--bootstrap-reps", config.bootstrap_replicates,
                        "bootstrap replicates")
            ->check(CLI::PositiveNumber);
    };

    auto* cmd_run = app.add_subcommand(
        "run", "run every stage: segment, align, pool, simmat, correlate, "
               "cluster, agree, test, report");
    add_common(cmd_run);
    add_segment_opts(cmd_run);
    add_align_opts(cmd_run);
    add_pool_opts(cmd_run);
    add_cluster_opts(cmd_run);
    add_test_opts(cmd_run, config.kappas, /*seed_required=*/true);

    auto* cmd_segment =
        app.add_subcommand("segment", "detect topic boundaries per document");
    add_common(cmd_segment);
    add_segment_opts(cmd_segment);

    auto* cmd_align = app.add_subcommand(
        "align", "align original and translated sentences (manifest mode, or "
                 "--source/--target for two embedding files)");
    add_common(cmd_align, /*manifest_required=*/false);
    add_align_opts(cmd_align);
    cmd_align->add_option("--source", align_source, "source embedding file")
        ->check(CLI::ExistingFile);
    cmd_align->add_option("--target", align_target, "target embedding file")
        ->check(CLI::ExistingFile);

    auto* cmd_pool = app.add_subcommand(
        "pool", "pool sentence embeddings into centrality-weighted paragraphs");
    add_common(cmd_pool);
    add_pool_opts(cmd_pool);

    auto* cmd_simmat = app.add_subcommand(
        "simmat", "build paragraph similarity matrices per configuration");
    add_common(cmd_simmat);

    auto* cmd_correlate = app.add_subcommand(
        "correlate", "correlate similarity matrices across configurations");
    add_common(cmd_correlate);

    auto* cmd_cluster =
        app.add_subcommand("cluster", "cluster paragraphs per configuration");
    add_common(cmd_cluster);
    add_cluster_opts(cmd_cluster);
    cmd_cluster->add_option("--seed", config.seed, "random seed")->required();

    auto* cmd_agree = app.add_subcommand(
        "agree", "score partition agreement across configurations");
    add_common(cmd_agree);

    auto* cmd_test = app.add_subcommand(
        "test", "fit variance components and decide invariance per language");
    add_common(cmd_test);
    cmd_test
        ->add_option("--hypothesis", hypothesis_arg,
                     "baseline|best|multilingual|omot|all")
        ->check(CLI::IsMember(
            {"baseline", "best", "best_model", "multilingual", "omot",
             "om_ot_equivalence", "all"}));
    add_test_opts(cmd_test, test_kappas, /*seed_required=*/true);

    auto* cmd_report =
        app.add_subcommand("report", "render tables and summaries from results");
    add_common(cmd_report);

    auto* cmd_synth = app.add_subcommand(
        "synth", "generate a synthetic corpus with a known planted structure");
    cmd_synth->add_option("--out", synth_out, "corpus directory")->required();
    cmd_synth->add_option("--seed", synth.seed, "random seed");
    cmd_synth->add_option("--languages", synth.languages, "number of languages")
        ->check(CLI::PositiveNumber);
    cmd_synth
        ->add_option("--docs", synth.documents_per_language,
                     "documents per language")
        ->check(CLI::PositiveNumber);
    cmd_synth->add_option("--dim", synth.dimension, "embedding dimension")
        ->check(CLI::PositiveNumber);
    cmd_synth->add_option("--o-configs", synth.o_configs,
                          "original-language configurations");
    cmd_synth->add_option("--t-configs", synth.t_configs,
                          "translated-text configurations");
    cmd_synth->add_option("--m-configs", synth.m_configs,
                          "multilingual configuration pairs");
    cmd_synth->add_option("--distortion", synth.translation_distortion,
                          "translation distortion level");
    cmd_synth->add_flag("--no-labels", synth_no_labels,
                        "skip the labeled classification fixture");

    CLI11_PARSE(app, argc, argv);

    try {
        config.manifest_path = manifest;
        config.out_dir = out;

        if (cmd_synth->parsed()) {
            synth.emit_labels = !synth_no_labels;
            const fs::path path = invlab::write_synthetic_corpus(synth_out, synth);
            std::cout << path.string() << "\n";
            return 0;
        }

        if (cmd_align->parsed() && (!align_source.empty() || !align_target.empty())) {
            if (align_source.empty() || align_target.empty())
                throw invlab::InputError(
                    "--source and --target must be given together");
            const auto src = invlab::read_embeddings(align_source);
            const auto tgt = invlab::read_embeddings(align_target);
            const invlab::AlignmentMap map =
                invlab::monotone_align(src, tgt, config.gap_penalty);
            json j;
            j["n_source"] = map.n_source;
            j["n_target"] = map.n_target;
            j["total_score"] = map.total_score;
            j["links"] = json::array();
            for (const auto& link : map.links)
                j["links"].push_back({{"src_begin", link.src_begin},
                                      {"src_end", link.src_end},
                                      {"tgt_begin", link.tgt_begin},
                                      {"tgt_end", link.tgt_end}});
            std::cout << j.dump(2) << "\n";
            return 0;
        }
        if (manifest.empty() || out.empty())
            throw invlab::InputError("--manifest and --out are required");

        if (cmd_run->parsed()) {
            const invlab::RunOutcome outcome = invlab::run_pipeline(config);
            write_results_json(config.out_dir / "results" / "correlation_results.json",
                               outcome.correlation_results);
            if (!outcome.agreement_results.empty())
                write_results_json(
                    config.out_dir / "results" / "agreement_results.json",
                    outcome.agreement_results);
            std::cout << "languages: " << outcome.correlations.size() << "\n"
                      << "hypothesis rows (correlation): "
                      << outcome.correlation_results.size() << "\n"
                      << "hypothesis rows (agreement): "
                      << outcome.agreement_results.size() << "\n"
                      << "warnings: " << outcome.warnings.size() << "\n"
                      << "report: " << (config.out_dir / "report").string() << "\n";
            return 0;
        }

        const invlab::CorpusManifest m = invlab::load_manifest(config.manifest_path);
        fs::create_directories(config.out_dir);
        if (cmd_segment->parsed()) {
            invlab::stage_segment(m, config);
        } else if (cmd_align->parsed()) {
            invlab::stage_align(m, config);
        } else if (cmd_pool->parsed()) {
            invlab::stage_pool(m, config);
        } else if (cmd_simmat->parsed()) {
            invlab::stage_simmat(m, config);
        } else if (cmd_correlate->parsed()) {
            invlab::stage_correlate(m, config);
        } else if (cmd_cluster->parsed()) {
            invlab::stage_cluster(m, config);
        } else if (cmd_agree->parsed()) {
            invlab::stage_agree(m, config);
        } else if (cmd_test->parsed()) {
            config.kappas = test_kappas;
            const fs::path results_dir = config.out_dir / "results";
            fs::create_directories(results_dir);
            if (hypothesis_arg == "all") {
                invlab::stage_test(m, config);
                const fs::path corr = results_dir / "correlation_results.csv";
                write_results_json(results_dir / "correlation_results.json",
                                   invlab::read_results(corr));
                const fs::path agree = results_dir / "agreement_results.csv";
                if (fs::exists(agree))
                    write_results_json(results_dir / "agreement_results.json",
                                       invlab::read_results(agree));
                std::cout << slurp(corr);
            } else {
                const invlab::Hypothesis hyp =
                    invlab::parse_hypothesis(hypothesis_arg);
                const std::string name = invlab::to_string(hyp);
                const auto rows = run_filtered_test(
                    m, config, {hyp}, config.out_dir / "correlations");
                const fs::path csv = results_dir / ("test_" + name + ".csv");
                invlab::write_results(csv, rows);
                write_results_json(results_dir / ("test_" + name + ".json"), rows);
                bool have_agreements = true;
                for (const auto& language : m.languages)
                    have_agreements =
                        have_agreements &&
                        fs::exists(config.out_dir / "agreements" /
                                   (language + ".csv"));
                if (have_agreements) {
                    const auto agree_rows = run_filtered_test(
                        m, config, {hyp}, config.out_dir / "agreements");
                    invlab::write_results(
                        results_dir / ("test_" + name + "_agreement.csv"),
                        agree_rows);
                    write_results_json(
                        results_dir / ("test_" + name + "_agreement.json"),
                        agree_rows);
                }
                std::cout << slurp(csv);
            }
        } else if (cmd_report->parsed()) {
            invlab::stage_report(m, config);
            std::cout << "report: " << (config.out_dir / "report").string() << "\n";
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

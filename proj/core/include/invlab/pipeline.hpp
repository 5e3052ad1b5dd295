#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "invlab/corpus.hpp"
#include "invlab/downstream.hpp"
#include "invlab/inference.hpp"
#include "invlab/pooler.hpp"
#include "invlab/report.hpp"
#include "invlab/segmenter.hpp"

namespace invlab {

// End-to-end orchestration: segment -> align -> pool -> simmat -> correlate
// -> cluster -> agree -> test -> report, with every intermediate persisted
// under the output directory and re-used when its inputs and parameters are
// unchanged (content-hash stamps).  Stages are independently invokable on the
// persisted intermediates; run_pipeline chains them all.
//
// Output layout (under RunConfig::out_dir):
//   stamps/         one content-hash stamp per cached unit of work
//   segments/       <doc>.json change points of each original document
//   alignments/     <doc>.json sentence alignment of each translated document
//   paragraphs/     <doc>/<config>.emb pooled paragraph embeddings
//   simmat/         <language>/<config>.sim paragraph similarity matrices
//   correlations/   <language>.csv triangle-correlation observations
//   partitions/     <language>/<config>.csv clustering partitions
//   agreements/     <language>.csv partition-agreement (ARI) observations
//   warnings/       <language>.txt dropped-pair notes from the correlate stage
//   results/        hypothesis results and classification metrics
//   report/         verdict tables, sweep counts, heatmap, summary.json

struct RunConfig {
    std::filesystem::path manifest_path;
    std::filesystem::path out_dir;

    SegmenterParams segmenter;
    double gap_penalty = -0.2;
    PageRankOptions pagerank;

    std::vector<double> kappas = {0.5, 1.0, 1.5, 2.0};
    double alpha = 0.05;
    double q = 0.05;  // BH false-discovery level
    std::uint64_t seed = 0;
    int bootstrap_replicates = 2000;

    KMeansOptions kmeans;  // seed/threads fields here are ignored; see below

    int threads = 1;
    bool force = false;  // recompute even when cached outputs are fresh
    // Progress / warning sink; defaults to stderr when empty.
    std::function<void(const std::string&)> log;
};

struct RunOutcome {
    std::filesystem::path out_dir;
    std::vector<std::string> warnings;
    std::map<std::string, std::vector<PairObservation>> correlations;
    std::map<std::string, std::vector<PairObservation>> agreements;
    std::vector<HypothesisResult> correlation_results;
    std::vector<HypothesisResult> agreement_results;
    std::vector<ClassificationMetric> classification;
};

// Individual stages (each loads what it needs from out_dir).
// Deterministic per-(language, hypothesis) seed derived from the base seed,
// shared by run_pipeline and the standalone test entry point.
std::uint64_t derive_seed(std::uint64_t base, const std::string& language,
                          Hypothesis hypothesis);

void stage_segment(const CorpusManifest& m, const RunConfig& config);
void stage_align(const CorpusManifest& m, const RunConfig& config);
void stage_pool(const CorpusManifest& m, const RunConfig& config);
void stage_simmat(const CorpusManifest& m, const RunConfig& config);
void stage_correlate(const CorpusManifest& m, const RunConfig& config);
void stage_cluster(const CorpusManifest& m, const RunConfig& config);
void stage_agree(const CorpusManifest& m, const RunConfig& config);
void stage_test(const CorpusManifest& m, const RunConfig& config);
void stage_report(const CorpusManifest& m, const RunConfig& config);

// Runs every stage in order and collects the persisted outputs.
RunOutcome run_pipeline(const RunConfig& config);

// Reads a run's persisted outputs without recomputing anything.
RunOutcome collect_outcome(const CorpusManifest& m, const RunConfig& config);

}  // namespace invlab

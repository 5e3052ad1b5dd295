#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "invlab/inference.hpp"
#include "invlab/simcorr.hpp"

namespace invlab {

// CSV / JSON emission of the analysis outputs: per-hypothesis verdict tables,
// kappa-sweep decision counts, the language x pair-type heatmap matrix, and a
// machine-readable summary.  All numbers are written in shortest round-trip
// decimal form, so parse(emit(x)) == x and reports are byte-stable.

// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);
double parse_double(const std::string& s);

// ---------------------------------------------------------------------------
// verdict tables
// ---------------------------------------------------------------------------

// One row of a per-hypothesis verdict table: the fixed column set
// language, n, n_O, n_T, d_hat, ci_lo, ci_hi, p, decision, backend plus the
// FDR-adjusted bh_decision.  `p` is the invariance/equivalence p-value.
struct VerdictRow {
    std::string language;
    std::uint32_t n = 0;    // ordered pair count
    std::uint32_t n_o = 0;  // distinct O configs in the language
    std::uint32_t n_t = 0;  // distinct T configs in the language
    double d_hat = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double p = 1.0;
    Decision decision = Decision::indeterminate;
    Backend backend = Backend::mixed_model;
    Decision bh_decision = Decision::indeterminate;

    bool operator==(const VerdictRow&) const = default;
};

VerdictRow to_verdict_row(const HypothesisResult& r);

void write_verdict_table(const std::filesystem::path& path,
                         const std::vector<VerdictRow>& rows);
std::vector<VerdictRow> read_verdict_table(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// kappa-sweep decision counts
// ---------------------------------------------------------------------------

// One row per (hypothesis, kappa).  For the two-sided hypothesis the
// `invariant` column counts equivalent verdicts and `distorted` counts
// inferior ones; `superior` is only populated there.
struct SweepCounts {
    Hypothesis hypothesis = Hypothesis::baseline;
    double kappa = 1.0;
    std::uint32_t invariant = 0;
    std::uint32_t indeterminate = 0;
    std::uint32_t distorted = 0;
    std::uint32_t superior = 0;

    bool operator==(const SweepCounts&) const = default;
};

// `adjusted` selects bh_decision instead of decision.
std::vector<SweepCounts> sweep_counts(const std::vector<HypothesisResult>& results,
                                      bool adjusted);
void write_sweep_counts(const std::filesystem::path& path,
                        const std::vector<SweepCounts>& rows);
std::vector<SweepCounts> read_sweep_counts(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// observations, results, heatmap
// ---------------------------------------------------------------------------

void write_observations(const std::filesystem::path& path,
                        const std::vector<PairObservation>& observations);
std::vector<PairObservation> read_observations(const std::filesystem::path& path);

// Full-fidelity persistence of hypothesis results (every field).
void write_results(const std::filesystem::path& path,
                   const std::vector<HypothesisResult>& results);
std::vector<HypothesisResult> read_results(const std::filesystem::path& path);

// language -> pair-type -> mean observation value, written as a matrix with
// one language per row and the ten pair types as columns (blank when absent).
void write_heatmap(const std::filesystem::path& path,
                   const std::map<std::string, std::map<std::string, double>>&
                       means_by_language);

// Per-configuration classification agreement with the gold labels.
struct ClassificationMetric {
    std::string language;
    std::string config_id;
    char pipeline_type = 'O';
    double f1 = 0.0;
    double mcc = 0.0;
};
void write_classification_metrics(const std::filesystem::path& path,
                                  const std::vector<ClassificationMetric>& rows);
std::vector<ClassificationMetric> read_classification_metrics(
    const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// full report
// ---------------------------------------------------------------------------

struct ReportInputs {
    std::vector<std::string> languages;
    std::map<std::string, std::string> parameters;  // echoed into the summary
    std::map<std::string, std::vector<PairObservation>> correlations;
    std::map<std::string, std::vector<PairObservation>> agreements;
    std::vector<HypothesisResult> correlation_results;
    std::vector<HypothesisResult> agreement_results;
    std::vector<ClassificationMetric> classification;
    std::vector<std::string> warnings;
};

// Writes verdict tables (per hypothesis and kappa), sweep-count tables (raw
// and FDR-adjusted), the heatmap matrix and summary.json under `report_dir`.
void emit_report(const std::filesystem::path& report_dir, const ReportInputs& in);

}  // namespace invlab

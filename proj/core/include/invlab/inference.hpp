#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "invlab/simcorr.hpp"

namespace invlab {

// Calibrated non-inferiority / equivalence testing of pair-family means.
//
// Observations (triangle correlations or agreement scores) follow a crossed
// multi-membership random-effects model
//
//   value_p = mu_family(p) + u_{cfg1(p)} + u_{cfg2(p)} + eps_p,
//   u ~ (0, sigma2_cfg) per configuration,  eps ~ (0, sigma2_resid),
//
// fitted by REML.  The margin is calibrated per language from the reference
// family: sigma_L = sqrt(2*sigma2_cfg + sigma2_resid) and delta = kappa *
// sigma_L.  Decisions compare the (1 - 2*alpha) confidence interval for
// D = mu_reference - mu_candidate against the margin.

// ---------------------------------------------------------------------------
// variance components
// ---------------------------------------------------------------------------

struct FamilyObservation {
    double value = 0.0;
    std::string config_a;
    std::string config_b;
    std::string family;
};

struct FitOptions {
    double variance_floor = 1e-12;
    double variance_cap = 16.0;
    double rel_tol = 1e-8;   // relative REML log-likelihood change
    int max_iterations = 500;
    // Test hook: pin sigma2_cfg (e.g. to 0) and profile only sigma2_resid.
    std::optional<double> fix_sigma2_cfg;
};

struct VarianceComponentsFit {
    std::vector<std::string> families;      // column order of mu / cov
    std::vector<double> mu;                 // GLS family means
    std::vector<double> cov_mu;             // row-major q x q covariance of mu
    double sigma2_cfg = 0.0;
    double sigma2_resid = 0.0;
    double reml_loglik = 0.0;
    int iterations = 0;
    bool converged = false;
    // Convenience: se of mu[0] - mu[1] when exactly two families are present.
    double se_of_difference = 0.0;

    double mu_of(const std::string& family) const;
    double se_of(const std::string& family_a, const std::string& family_b) const;
};

VarianceComponentsFit fit_variance_components(
    const std::vector<FamilyObservation>& observations, const FitOptions& opt = {});

// sqrt(2*sigma2_cfg + sigma2_resid): the model-implied marginal standard
// deviation of a single observation around its family mean.
double marginal_sigma(const VarianceComponentsFit& fit);

// ---------------------------------------------------------------------------
// estimates, p-values, decisions
// ---------------------------------------------------------------------------

enum class Sidedness { one_sided, two_sided };

struct DifferenceEstimate {
    double d_hat = 0.0;
    double se = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};

// D = mu[family_a] - mu[family_b] with a normal (1 - 2*alpha) interval.
DifferenceEstimate estimate_difference(const VarianceComponentsFit& fit,
                                       const std::string& family_a,
                                       const std::string& family_b,
                                       double alpha = 0.05);

enum class Decision {
    invariant,
    indeterminate,
    distorted,
    equivalent,
    inferior,
    superior,
};
const char* to_string(Decision d);
Decision parse_decision(const std::string& s);

// One-sided: invariant iff ci_hi < delta, distorted iff ci_lo > delta.
// Two-sided: equivalent iff (-delta, delta) contains the interval, inferior
// iff ci_lo > delta, superior iff ci_hi < -delta; otherwise indeterminate.
Decision decide(double ci_lo, double ci_hi, double delta, Sidedness sidedness);

struct PValuePair {
    double p_inv = 1.0;   // evidence for D < delta (equivalence: TOST max)
    double p_dist = 1.0;  // evidence for D > delta (two-sided: nearer margin)
};

PValuePair normal_p_values(double d_hat, double se, double delta,
                           Sidedness sidedness);

// Benjamini-Hochberg step-up at level q; returns per-test rejection flags.
std::vector<bool> bh_adjust(const std::vector<double>& p_values, double q);

// ---------------------------------------------------------------------------
// configuration-level bootstrap
// ---------------------------------------------------------------------------

struct BootstrapOptions {
    int replicates = 2000;
    std::uint64_t seed = 0;
    double alpha = 0.05;
    int max_redraws = 1000;  // bound on redrawing degenerate replicates
    int threads = 1;
};

struct BootstrapSummary {
    double d_hat = 0.0;                // observed family-mean difference
    double ci_lo = 0.0, ci_hi = 0.0;   // percentile interval
    std::vector<double> replicate_d;   // one D per replicate, replicate order
};

// Add-one-smoothed tail probabilities of the replicate distribution.
PValuePair bootstrap_p_values(const BootstrapSummary& s, double delta,
                              Sidedness sidedness);

// Resamples configurations (with replacement, within each pipeline-type
// family) and rebuilds both observation families per replicate from the pairs
// that survive.  Replicates where either family comes back empty are redrawn.
// With `reselect_best_candidate` the strongest candidate configuration is
// re-chosen inside every replicate (and for the observed d_hat).
BootstrapSummary cluster_bootstrap(const std::vector<PairObservation>& reference,
                                   const std::vector<PairObservation>& candidate,
                                   bool reselect_best_candidate,
                                   const BootstrapOptions& opt);

// ---------------------------------------------------------------------------
// hypotheses
// ---------------------------------------------------------------------------

enum class Hypothesis { baseline, best_model, multilingual, om_ot_equivalence };
const char* to_string(Hypothesis h);
Hypothesis parse_hypothesis(const std::string& s);

struct HypothesisSpec {
    Hypothesis id = Hypothesis::baseline;
    std::string reference_pair_type;
    std::string candidate_pair_type;
    bool candidate_same_model_only = false;
    bool restrict_to_best_candidate_config = false;
    Sidedness sidedness = Sidedness::one_sided;
    bool always_bootstrap = false;
};
HypothesisSpec hypothesis_spec(Hypothesis h);

// Candidate configuration with the highest mean candidate-family value; ties
// break toward the lexicographically smallest config_id.  For best_model the
// candidate configurations are the T configs of the OT family.
std::string select_best_candidate_config(
    const std::vector<PairObservation>& candidate_observations);

enum class Backend { mixed_model, bootstrap };
const char* to_string(Backend b);

struct HypothesisOptions {
    std::vector<double> kappas = {0.5, 1.0, 1.5, 2.0};
    double alpha = 0.05;
    int bootstrap_replicates = 2000;
    std::uint64_t seed = 0;
    int threads = 1;
    FitOptions fit;
};

struct HypothesisResult {
    std::string language;
    Hypothesis hypothesis = Hypothesis::baseline;
    double kappa = 1.0;
    double sigma_marginal = 0.0;  // sigma_L
    double delta = 0.0;           // kappa * sigma_L
    double d_hat = 0.0;
    double se = 0.0;  // 0 for the bootstrap backend
    double ci_lo = 0.0, ci_hi = 0.0;
    double p_inv = 1.0, p_dist = 1.0;
    Decision decision = Decision::indeterminate;
    // Filled by apply_bh_adjustment; starts equal to `decision`.
    Decision bh_decision = Decision::indeterminate;
    Backend backend = Backend::mixed_model;
    bool fit_converged = false;
    std::uint32_t n_observations = 0;   // unordered reference + candidate pairs
    std::uint32_t n_ordered_pairs = 0;  // 2 * n_observations (reported as n)
    std::uint32_t n_ref_configs = 0;    // distinct configs in the reference family
    std::uint32_t n_cand_configs = 0;   // distinct candidate-only configs
    std::uint32_t n_o_configs = 0;      // distinct O / T configs in the language
    std::uint32_t n_t_configs = 0;      //   (the n_O / n_T verdict-table columns)
    std::string best_candidate_config;  // best_model only
};

// Evaluates one hypothesis for one language at every kappa, reusing a single
// model fit (or a single replicate set) across the sweep.  `observations` is
// the language's full pair table.
std::vector<HypothesisResult> run_hypothesis(
    const std::string& language, const std::vector<PairObservation>& observations,
    Hypothesis hypothesis, const HypothesisOptions& opt);

// BH across languages, separately per (hypothesis, kappa) group and
// separately for invariance and distortion p-values.  Failing adjustment only
// downgrades a verdict to indeterminate; it never flips its direction.
void apply_bh_adjustment(std::vector<HypothesisResult>& results, double q);

}  // namespace invlab

#include "invlab/inference.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "invlab/error.hpp"
#include "invlab/parallel.hpp"
#include "invlab/rng.hpp"
#include "invlab/stats.hpp"

namespace invlab {

// ---------------------------------------------------------------------------
// REML for the crossed multi-membership model
// ---------------------------------------------------------------------------
//
// V = sigma2_resid * I + sigma2_cfg * Z Z^T with Z the n x c membership
// matrix (two ones per row).  With the one-time eigendecomposition
// Z^T Z = Q diag(d) Q^T, every REML evaluation reduces to O(c) work via
// Woodbury:  V^{-1} = (I - W diag(g) W^T) / s2r  with  W = Z Q  and
// g_j = s2c / (s2r + s2c * d_j),  log|V| = (n - c) log s2r +
// sum_j log(s2r + s2c * d_j).  Only the projections W^T X, W^T y are kept.

namespace {

struct RemlEval {
    double neg_loglik = std::numeric_limits<double>::infinity();
    Eigen::VectorXd beta;
    Eigen::MatrixXd cov;
    bool ok = false;
};

struct RemlWorkspace {
    std::size_t n = 0, c = 0, q = 0;
    Eigen::VectorXd d;    // eigenvalues of Z^T Z, clamped to >= 0
    Eigen::MatrixXd Wx;   // (Z Q)^T X : c x q
    Eigen::VectorXd Wy;   // (Z Q)^T y : c
    Eigen::MatrixXd XtX;  // q x q
    Eigen::VectorXd Xty;  // q
    double yty = 0.0;

    RemlEval evaluate(double s2c, double s2r) const {
        RemlEval ev;
        if (!(s2r > 0.0) || s2c < 0.0) return ev;
        Eigen::VectorXd g(c), logterm(c);
        for (std::size_t j = 0; j < c; ++j) {
            const double denom = s2r + s2c * d[j];
            if (!(denom > 0.0)) return ev;
            g[j] = s2c / denom;
            logterm[j] = std::log(denom);
        }
        const double logdet_v =
            static_cast<double>(n - c) * std::log(s2r) + logterm.sum();

        const Eigen::MatrixXd xtvix =
            (XtX - Wx.transpose() * g.asDiagonal() * Wx) / s2r;
        const Eigen::VectorXd xtviy =
            (Xty - Wx.transpose() * (g.asDiagonal() * Wy)) / s2r;
        const double ytviy = (yty - (g.array() * Wy.array().square()).sum()) / s2r;

        Eigen::LDLT<Eigen::MatrixXd> ldlt(xtvix);
        if (ldlt.info() != Eigen::Success) return ev;
        const Eigen::VectorXd dd = ldlt.vectorD();
        if ((dd.array() <= 0.0).any()) return ev;  // X'V^-1X must be SPD
        ev.beta = ldlt.solve(xtviy);
        const double logdet_xtvix = dd.array().log().sum();
        const double ytpy = ytviy - xtviy.dot(ev.beta);
        const double nll = 0.5 * (logdet_v + logdet_xtvix + ytpy);
        if (!std::isfinite(nll)) return ev;
        ev.neg_loglik = nll;
        ev.cov = ldlt.solve(Eigen::MatrixXd::Identity(
            static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q)));
        ev.ok = true;
        return ev;
    }
};

RemlWorkspace build_workspace(const std::vector<FamilyObservation>& obs,
                              const std::vector<std::string>& families,
                              const std::vector<std::string>& configs) {
    const std::size_t n = obs.size(), c = configs.size(), q = families.size();
    std::map<std::string, std::size_t> cfg_index, fam_index;
    for (std::size_t k = 0; k < c; ++k) cfg_index[configs[k]] = k;
    for (std::size_t f = 0; f < q; ++f) fam_index[families[f]] = f;

    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(c, c);    // Z^T Z
    Eigen::MatrixXd ZtX = Eigen::MatrixXd::Zero(c, q);  // Z^T X
    Eigen::VectorXd Zty = Eigen::VectorXd::Zero(c);
    RemlWorkspace ws;
    ws.n = n;
    ws.c = c;
    ws.q = q;
    ws.XtX = Eigen::MatrixXd::Zero(q, q);
    ws.Xty = Eigen::VectorXd::Zero(q);
    for (const auto& o : obs) {
        const std::size_t a = cfg_index.at(o.config_a);
        const std::size_t b = cfg_index.at(o.config_b);
        const std::size_t f = fam_index.at(o.family);
        M(a, a) += 1.0;
        M(b, b) += 1.0;
        M(a, b) += 1.0;
        M(b, a) += 1.0;
        ZtX(a, f) += 1.0;
        ZtX(b, f) += 1.0;
        Zty[a] += o.value;
        Zty[b] += o.value;
        ws.XtX(f, f) += 1.0;
        ws.Xty[f] += o.value;
        ws.yty += o.value * o.value;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
    if (eig.info() != Eigen::Success)
        throw Error("fit_variance_components: eigendecomposition failed");
    ws.d = eig.eigenvalues().cwiseMax(0.0);
    ws.Wx = eig.eigenvectors().transpose() * ZtX;
    ws.Wy = eig.eigenvectors().transpose() * Zty;
    return ws;
}

// Method-of-moments starting values: the covariance of two observations that
// share exactly one configuration estimates sigma2_cfg; the marginal variance
// around the family means is 2*sigma2_cfg + sigma2_resid.
std::pair<double, double> moment_start(const std::vector<FamilyObservation>& obs,
                                       const std::vector<std::string>& families) {
    std::map<std::string, std::pair<double, double>> fam_sum;  // sum, count
    for (const auto& o : obs) {
        fam_sum[o.family].first += o.value;
        fam_sum[o.family].second += 1.0;
    }
    std::vector<double> res(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const auto& [sum, count] = fam_sum.at(obs[i].family);
        res[i] = obs[i].value - sum / count;
    }
    double s2 = 0.0;
    for (const double r : res) s2 += r * r;
    s2 /= std::max<std::size_t>(obs.size() > families.size()
                                    ? obs.size() - families.size()
                                    : 1,
                                1);
    double cross = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < obs.size(); ++i)
        for (std::size_t j = i + 1; j < obs.size(); ++j) {
            const int shared = (obs[i].config_a == obs[j].config_a) +
                               (obs[i].config_a == obs[j].config_b) +
                               (obs[i].config_b == obs[j].config_a) +
                               (obs[i].config_b == obs[j].config_b);
            if (shared == 1) {
                cross += res[i] * res[j];
                ++pairs;
            }
        }
    const double s2c = pairs > 0 ? std::max(cross / static_cast<double>(pairs), 0.0)
                                 : s2 / 4.0;
    const double s2r = std::max(s2 - 2.0 * s2c, s2 / 100.0);
    return {s2c, s2r};
}

struct SearchResult {
    double s2c = 0.0, s2r = 0.0;
    RemlEval eval;
    int iterations = 0;
    bool hit_limit = false;
};

// Nelder-Mead on (log s2c, log s2r), clamped to [lo, hi] per coordinate.
SearchResult nelder_mead(const RemlWorkspace& ws, double lo, double hi,
                         std::array<double, 2> start, double rel_tol,
                         int max_iterations) {
    auto clamp_u = [&](std::array<double, 2> u) {
        u[0] = std::clamp(u[0], lo, hi);
        u[1] = std::clamp(u[1], lo, hi);
        return u;
    };
    auto f = [&](const std::array<double, 2>& u) {
        return ws.evaluate(std::exp(u[0]), std::exp(u[1])).neg_loglik;
    };

    std::array<std::array<double, 2>, 3> simplex;
    simplex[0] = clamp_u(start);
    simplex[1] = clamp_u({start[0] + 0.7, start[1]});
    simplex[2] = clamp_u({start[0], start[1] + 0.7});
    std::array<double, 3> fv = {f(simplex[0]), f(simplex[1]), f(simplex[2])};

    SearchResult res;
    int it = 0;
    for (; it < max_iterations; ++it) {
        // order best..worst
        std::array<int, 3> ord = {0, 1, 2};
        std::sort(ord.begin(), ord.end(), [&](int a, int b) { return fv[a] < fv[b]; });
        const int b = ord[0], m = ord[1], w = ord[2];
        if (std::isfinite(fv[b]) &&
            fv[w] - fv[b] <= rel_tol * (1.0 + std::abs(fv[b])))
            break;
        const std::array<double, 2> centroid = {
            (simplex[b][0] + simplex[m][0]) / 2.0,
            (simplex[b][1] + simplex[m][1]) / 2.0};
        auto blend = [&](double t) {
            return clamp_u({centroid[0] + t * (centroid[0] - simplex[w][0]),
                            centroid[1] + t * (centroid[1] - simplex[w][1])});
        };
        const auto refl = blend(1.0);
        const double f_refl = f(refl);
        if (f_refl < fv[b]) {
            const auto expand = blend(2.0);
            const double f_exp = f(expand);
            if (f_exp < f_refl) {
                simplex[w] = expand;
                fv[w] = f_exp;
            } else {
                simplex[w] = refl;
                fv[w] = f_refl;
            }
        } else if (f_refl < fv[m]) {
            simplex[w] = refl;
            fv[w] = f_refl;
        } else {
            const auto contract = blend(f_refl < fv[w] ? 0.5 : -0.5);
            const double f_con = f(contract);
            if (f_con < std::min(f_refl, fv[w])) {
                simplex[w] = contract;
                fv[w] = f_con;
            } else {  // shrink toward the best vertex
                for (const int k : {m, w}) {
                    simplex[k] = clamp_u(
                        {(simplex[k][0] + simplex[b][0]) / 2.0,
                         (simplex[k][1] + simplex[b][1]) / 2.0});
                    fv[k] = f(simplex[k]);
                }
            }
        }
    }
    res.hit_limit = (it >= max_iterations);
    res.iterations = it;
    const int best = static_cast<int>(
        std::min_element(fv.begin(), fv.end()) - fv.begin());
    res.s2c = std::exp(simplex[best][0]);
    res.s2r = std::exp(simplex[best][1]);
    res.eval = ws.evaluate(res.s2c, res.s2r);
    return res;
}

// Golden-section search over log sigma2_resid with sigma2_cfg pinned.
SearchResult golden_fixed_cfg(const RemlWorkspace& ws, double s2c_fixed, double lo,
                              double hi, double rel_tol, int max_iterations) {
    auto f = [&](double u) {
        return ws.evaluate(s2c_fixed, std::exp(u)).neg_loglik;
    };
    const double gr = 0.61803398874989484820458683436564;
    double a = lo, b = hi;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = f(x1), f2 = f(x2);
    int it = 0;
    for (; it < max_iterations && (b - a) > 1e-12; ++it) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = f(x2);
        }
        if (std::isfinite(f1) && std::isfinite(f2) &&
            std::abs(f1 - f2) <= rel_tol * (1.0 + std::min(std::abs(f1), std::abs(f2))) &&
            (b - a) < 1e-6)
            break;
    }
    SearchResult res;
    res.iterations = it;
    res.hit_limit = (it >= max_iterations);
    res.s2c = s2c_fixed;
    res.s2r = std::exp((a + b) / 2.0);
    res.eval = ws.evaluate(res.s2c, res.s2r);
    return res;
}

}  // namespace

double VarianceComponentsFit::mu_of(const std::string& family) const {
    for (std::size_t f = 0; f < families.size(); ++f)
        if (families[f] == family) return mu[f];
    throw Error("no family \"" + family + "\" in fit");
}

double VarianceComponentsFit::se_of(const std::string& family_a,
                                    const std::string& family_b) const {
    std::size_t ia = families.size(), ib = families.size();
    for (std::size_t f = 0; f < families.size(); ++f) {
        if (families[f] == family_a) ia = f;
        if (families[f] == family_b) ib = f;
    }
    if (ia >= families.size() || ib >= families.size())
        throw Error("se_of: unknown family");
    const std::size_t q = families.size();
    const double var = cov_mu[ia * q + ia] + cov_mu[ib * q + ib] -
                       2.0 * cov_mu[ia * q + ib];
    return std::sqrt(std::max(var, 0.0));
}

VarianceComponentsFit fit_variance_components(
    const std::vector<FamilyObservation>& observations, const FitOptions& opt) {
    if (observations.empty())
        throw DegenerateStatError("fit_variance_components: no observations");

    std::vector<std::string> families;  // first-appearance order
    std::set<std::string> seen_fam, seen_cfg;
    for (const auto& o : observations) {
        if (o.config_a == o.config_b)
            throw InputError("fit_variance_components: self-pair for config \"" +
                             o.config_a + "\"");
        if (seen_fam.insert(o.family).second) families.push_back(o.family);
        seen_cfg.insert(o.config_a);
        seen_cfg.insert(o.config_b);
    }
    std::vector<std::string> configs(seen_cfg.begin(), seen_cfg.end());
    if (observations.size() < families.size() + 1)
        throw DegenerateStatError(
            "fit_variance_components: need more observations than families");

    const RemlWorkspace ws = build_workspace(observations, families, configs);
    const double lo = std::log(opt.variance_floor);
    const double hi = std::log(opt.variance_cap);

    SearchResult best;
    if (opt.fix_sigma2_cfg.has_value()) {
        best = golden_fixed_cfg(ws, *opt.fix_sigma2_cfg, lo, hi, opt.rel_tol,
                                opt.max_iterations);
    } else {
        const auto [s2c0, s2r0] = moment_start(observations, families);
        const std::array<std::array<double, 2>, 2> starts = {
            std::array<double, 2>{
                std::clamp(std::log(std::max(s2c0, opt.variance_floor)), lo, hi),
                std::clamp(std::log(std::max(s2r0, opt.variance_floor)), lo, hi)},
            std::array<double, 2>{std::log(1e-2), std::log(1e-2)}};
        bool have = false;
        for (const auto& start : starts) {
            SearchResult r =
                nelder_mead(ws, lo, hi, start, opt.rel_tol, opt.max_iterations);
            if (!have || r.eval.neg_loglik < best.eval.neg_loglik) {
                best = r;
                have = true;
            }
        }
    }

    VarianceComponentsFit fit;
    fit.families = families;
    fit.sigma2_cfg = std::max(best.s2c, opt.variance_floor);
    if (opt.fix_sigma2_cfg.has_value()) fit.sigma2_cfg = *opt.fix_sigma2_cfg;
    fit.sigma2_resid = std::max(best.s2r, opt.variance_floor);
    fit.iterations = best.iterations;
    fit.converged = best.eval.ok && !best.hit_limit;
    if (best.eval.ok) {
        fit.reml_loglik = -best.eval.neg_loglik;
        fit.mu.assign(best.eval.beta.data(), best.eval.beta.data() + families.size());
        fit.cov_mu.assign(best.eval.cov.data(),
                          best.eval.cov.data() + families.size() * families.size());
    } else {
        fit.mu.assign(families.size(), 0.0);
        fit.cov_mu.assign(families.size() * families.size(), 0.0);
        return fit;
    }

    // A minimizer that is a local maximum / saddle along an interior
    // coordinate indicates a degenerate likelihood surface.
    if (fit.converged && !opt.fix_sigma2_cfg.has_value()) {
        const std::array<double, 2> u = {std::log(fit.sigma2_cfg),
                                         std::log(fit.sigma2_resid)};
        const double h = 1e-3;
        const double f0 = best.eval.neg_loglik;
        for (int k = 0; k < 2; ++k) {
            if (u[k] <= lo + 2.0 * h || u[k] >= hi - 2.0 * h) continue;
            std::array<double, 2> up = u, dn = u;
            up[k] += h;
            dn[k] -= h;
            const double fp = ws.evaluate(std::exp(up[0]), std::exp(up[1])).neg_loglik;
            const double fm = ws.evaluate(std::exp(dn[0]), std::exp(dn[1])).neg_loglik;
            if (!std::isfinite(fp) || !std::isfinite(fm) ||
                fp + fm - 2.0 * f0 < -1e-6 * (1.0 + std::abs(f0))) {
                fit.converged = false;
                break;
            }
        }
    }

    if (families.size() == 2)
        fit.se_of_difference = fit.se_of(families[0], families[1]);
    return fit;
}

double marginal_sigma(const VarianceComponentsFit& fit) {
    return std::sqrt(2.0 * fit.sigma2_cfg + fit.sigma2_resid);
}

// ---------------------------------------------------------------------------
// estimates, p-values, decisions
// ---------------------------------------------------------------------------

DifferenceEstimate estimate_difference(const VarianceComponentsFit& fit,
                                       const std::string& family_a,
                                       const std::string& family_b, double alpha) {
    if (!(alpha > 0.0 && alpha < 0.5))
        throw Error("estimate_difference: alpha must lie in (0, 0.5)");
    DifferenceEstimate est;
    est.d_hat = fit.mu_of(family_a) - fit.mu_of(family_b);
    est.se = fit.se_of(family_a, family_b);
    const double z = normal_quantile(1.0 - alpha);
    est.ci_lo = est.d_hat - z * est.se;
    est.ci_hi = est.d_hat + z * est.se;
    return est;
}

const char* to_string(Decision d) {
    switch (d) {
        case Decision::invariant: return "invariant";
        case Decision::indeterminate: return "indeterminate";
        case Decision::distorted: return "distorted";
        case Decision::equivalent: return "equivalent";
        case Decision::inferior: return "inferior";
        case Decision::superior: return "superior";
    }
    return "?";
}

Decision parse_decision(const std::string& s) {
    for (const Decision d :
         {Decision::invariant, Decision::indeterminate, Decision::distorted,
          Decision::equivalent, Decision::inferior, Decision::superior})
        if (s == to_string(d)) return d;
    throw InputError("unknown decision \"" + s + "\"");
}

Decision decide(double ci_lo, double ci_hi, double delta, Sidedness sidedness) {
    if (!(delta > 0.0)) throw Error("decide: delta must be positive");
    if (sidedness == Sidedness::one_sided) {
        if (ci_hi < delta) return Decision::invariant;
        if (ci_lo > delta) return Decision::distorted;
        return Decision::indeterminate;
    }
    if (ci_lo > delta) return Decision::inferior;
    if (ci_hi < -delta) return Decision::superior;
    if (-delta < ci_lo && ci_hi < delta) return Decision::equivalent;
    return Decision::indeterminate;
}

namespace {
double safe_cdf(double num, double se) {
    if (se > 0.0) return normal_cdf(num / se);
    if (num < 0.0) return 0.0;
    if (num > 0.0) return 1.0;
    return 0.5;
}
}  // namespace

PValuePair normal_p_values(double d_hat, double se, double delta,
                           Sidedness sidedness) {
    PValuePair p;
    if (sidedness == Sidedness::one_sided) {
        p.p_inv = safe_cdf(d_hat - delta, se);
        p.p_dist = 1.0 - p.p_inv;
        return p;
    }
    const double p_below_upper = safe_cdf(d_hat - delta, se);        // H0: D >= delta
    const double p_above_lower = 1.0 - safe_cdf(d_hat + delta, se);  // H0: D <= -delta
    p.p_inv = std::max(p_below_upper, p_above_lower);
    p.p_dist = std::min(1.0 - p_below_upper, 1.0 - p_above_lower);
    return p;
}

std::vector<bool> bh_adjust(const std::vector<double>& p_values, double q) {
    const std::size_t m = p_values.size();
    std::vector<bool> reject(m, false);
    if (m == 0) return reject;
    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
    std::size_t cutoff = 0;  // number of rejections
    for (std::size_t k = m; k >= 1; --k) {
        if (p_values[order[k - 1]] <=
            static_cast<double>(k) * q / static_cast<double>(m)) {
            cutoff = k;
            break;
        }
    }
    for (std::size_t k = 0; k < cutoff; ++k) reject[order[k]] = true;
    return reject;
}

// ---------------------------------------------------------------------------
// bootstrap
// ---------------------------------------------------------------------------

PValuePair bootstrap_p_values(const BootstrapSummary& s, double delta,
                              Sidedness sidedness) {
    const double b = static_cast<double>(s.replicate_d.size());
    auto smoothed = [&](std::size_t count) {
        return (1.0 + static_cast<double>(count)) / (b + 1.0);
    };
    std::size_t ge_pos = 0, le_pos = 0, ge_neg = 0, le_neg = 0;
    for (const double d : s.replicate_d) {
        if (d >= delta) ++ge_pos;
        if (d <= delta) ++le_pos;
        if (d >= -delta) ++ge_neg;
        if (d <= -delta) ++le_neg;
    }
    PValuePair p;
    if (sidedness == Sidedness::one_sided) {
        p.p_inv = smoothed(ge_pos);
        p.p_dist = smoothed(le_pos);
        return p;
    }
    p.p_inv = std::max(smoothed(ge_pos), smoothed(le_neg));
    p.p_dist = std::min(smoothed(le_pos), smoothed(ge_neg));
    return p;
}

namespace {

using PairKey = std::pair<std::string, std::string>;

PairKey make_key(const std::string& a, const std::string& b) {
    return a <= b ? PairKey{a, b} : PairKey{b, a};
}

struct BootstrapDesign {
    // Configuration families, keyed by pipeline type letter.
    std::map<char, std::vector<std::string>> families;
    std::map<PairKey, double> ref_values, cand_values;
    char ref_a = 'O', ref_b = 'O';    // pipeline types of the two reference sides
    char cand_a = 'O', cand_b = 'T';  // same for the candidate family
    bool reselect_best = false;
    // For re-selection: candidate values grouped by candidate-side config.
    std::map<std::string, std::map<std::string, double>> cand_by_tconfig;
};

void register_config(std::map<char, std::vector<std::string>>& families, char type,
                     const std::string& id) {
    auto& v = families[type];
    if (std::find(v.begin(), v.end(), id) == v.end()) v.push_back(id);
}

double replicate_difference(const BootstrapDesign& dsn, Rng& rng, int max_redraws) {
    // Per-type resampled configuration multisets.
    for (int attempt = 0; attempt < max_redraws; ++attempt) {
        std::map<char, std::vector<const std::string*>> draws;
        for (const auto& [type, configs] : dsn.families) {
            auto& out = draws[type];
            out.reserve(configs.size());
            for (std::size_t i = 0; i < configs.size(); ++i)
                out.push_back(&configs[rng.bounded(configs.size())]);
        }
        auto collect = [&](char ta, char tb, const std::map<PairKey, double>& values,
                           std::vector<double>& out) {
            const auto& da = draws.at(ta);
            if (ta == tb) {
                for (std::size_t i = 0; i < da.size(); ++i)
                    for (std::size_t j = i + 1; j < da.size(); ++j) {
                        if (*da[i] == *da[j]) continue;
                        const auto it = values.find(make_key(*da[i], *da[j]));
                        if (it != values.end()) out.push_back(it->second);
                    }
            } else {
                const auto& db = draws.at(tb);
                for (const auto* a : da)
                    for (const auto* b : db) {
                        const auto it = values.find(make_key(*a, *b));
                        if (it != values.end()) out.push_back(it->second);
                    }
            }
        };

        std::vector<double> ref;
        collect(dsn.ref_a, dsn.ref_b, dsn.ref_values, ref);

        std::vector<double> cand;
        if (dsn.reselect_best) {
            // Re-select the strongest candidate config within this replicate.
            const auto& t_draws = draws.at(dsn.cand_b);
            const auto& o_draws = draws.at(dsn.cand_a);
            std::string best;
            double best_mean = -std::numeric_limits<double>::infinity();
            std::set<std::string> distinct;
            for (const auto* t : t_draws) distinct.insert(*t);
            for (const auto& t : distinct) {
                const auto git = dsn.cand_by_tconfig.find(t);
                if (git == dsn.cand_by_tconfig.end()) continue;
                double sum = 0.0;
                std::size_t cnt = 0;
                for (const auto* o : o_draws) {
                    const auto it = git->second.find(*o);
                    if (it != git->second.end()) {
                        sum += it->second;
                        ++cnt;
                    }
                }
                if (cnt == 0) continue;
                const double m = sum / static_cast<double>(cnt);
                if (m > best_mean || (m == best_mean && t < best)) {
                    best_mean = m;
                    best = t;
                }
            }
            if (!best.empty()) {
                const auto& by_o = dsn.cand_by_tconfig.at(best);
                for (const auto* o : o_draws) {
                    const auto it = by_o.find(*o);
                    if (it != by_o.end()) cand.push_back(it->second);
                }
            }
        } else {
            collect(dsn.cand_a, dsn.cand_b, dsn.cand_values, cand);
        }

        if (ref.empty() || cand.empty()) continue;  // degenerate: redraw
        return pairwise_sum(ref) / static_cast<double>(ref.size()) -
               pairwise_sum(cand) / static_cast<double>(cand.size());
    }
    throw Error("cluster_bootstrap: replicate stayed degenerate after redraws");
}

char type_letter(PipelineType t) { return to_char(t); }

}  // namespace

BootstrapSummary cluster_bootstrap(const std::vector<PairObservation>& reference,
                                   const std::vector<PairObservation>& candidate,
                                   bool reselect_best_candidate,
                                   const BootstrapOptions& opt) {
    if (reference.empty() || candidate.empty())
        throw DegenerateStatError("cluster_bootstrap: empty family");
    if (opt.replicates < 1) throw Error("cluster_bootstrap: replicates must be >= 1");

    BootstrapDesign dsn;
    dsn.reselect_best = reselect_best_candidate;
    auto note_obs = [&](const PairObservation& o, std::map<PairKey, double>& values) {
        register_config(dsn.families, type_letter(o.type_a), o.config_a);
        register_config(dsn.families, type_letter(o.type_b), o.config_b);
        values[make_key(o.config_a, o.config_b)] = o.value;
    };
    for (const auto& o : reference) note_obs(o, dsn.ref_values);
    for (const auto& o : candidate) note_obs(o, dsn.cand_values);
    {
        const auto& r0 = reference.front();
        dsn.ref_a = type_letter(r0.type_a);
        dsn.ref_b = type_letter(r0.type_b);
        const auto& c0 = candidate.front();
        // Orient so that cand_b is the candidate-specific (non-reference) side.
        dsn.cand_a = type_letter(c0.type_a);
        dsn.cand_b = type_letter(c0.type_b);
        if (dsn.cand_a != dsn.ref_a && dsn.cand_a != dsn.ref_b &&
            (dsn.cand_b == dsn.ref_a || dsn.cand_b == dsn.ref_b))
            std::swap(dsn.cand_a, dsn.cand_b);
    }
    if (reselect_best_candidate) {
        for (const auto& o : candidate) {
            const bool a_is_t = type_letter(o.type_a) == dsn.cand_b;
            const std::string& t_cfg = a_is_t ? o.config_a : o.config_b;
            const std::string& o_cfg = a_is_t ? o.config_b : o.config_a;
            dsn.cand_by_tconfig[t_cfg][o_cfg] = o.value;
        }
    }

    BootstrapSummary summary;
    {
        std::vector<double> ref_vals, cand_vals;
        for (const auto& o : reference) ref_vals.push_back(o.value);
        if (reselect_best_candidate) {
            const std::string best = select_best_candidate_config(candidate);
            for (const auto& o : candidate) {
                const bool a_is_t = type_letter(o.type_a) == dsn.cand_b;
                if ((a_is_t ? o.config_a : o.config_b) == best)
                    cand_vals.push_back(o.value);
            }
        } else {
            for (const auto& o : candidate) cand_vals.push_back(o.value);
        }
        summary.d_hat = pairwise_sum(ref_vals) / static_cast<double>(ref_vals.size()) -
                        pairwise_sum(cand_vals) / static_cast<double>(cand_vals.size());
    }

    summary.replicate_d.assign(static_cast<std::size_t>(opt.replicates), 0.0);
    parallel_for(summary.replicate_d.size(), opt.threads, [&](std::size_t r) {
        Rng rng(opt.seed, r);
        summary.replicate_d[r] = replicate_difference(dsn, rng, opt.max_redraws);
    });

    std::vector<double> sorted = summary.replicate_d;
    std::sort(sorted.begin(), sorted.end());
    summary.ci_lo = sorted_quantile(sorted, opt.alpha);
    summary.ci_hi = sorted_quantile(sorted, 1.0 - opt.alpha);
    return summary;
}

// ---------------------------------------------------------------------------
// hypotheses
// ---------------------------------------------------------------------------

const char* to_string(Hypothesis h) {
    switch (h) {
        case Hypothesis::baseline: return "baseline";
        case Hypothesis::best_model: return "best_model";
        case Hypothesis::multilingual: return "multilingual";
        case Hypothesis::om_ot_equivalence: return "om_ot_equivalence";
    }
    return "?";
}

Hypothesis parse_hypothesis(const std::string& s) {
    if (s == "baseline") return Hypothesis::baseline;
    if (s == "best_model" || s == "best") return Hypothesis::best_model;
    if (s == "multilingual") return Hypothesis::multilingual;
    if (s == "om_ot_equivalence" || s == "omot") return Hypothesis::om_ot_equivalence;
    throw InputError("unknown hypothesis \"" + s + "\"");
}

const char* to_string(Backend b) {
    return b == Backend::mixed_model ? "mixed_model" : "bootstrap";
}

HypothesisSpec hypothesis_spec(Hypothesis h) {
    HypothesisSpec s;
    s.id = h;
    switch (h) {
        case Hypothesis::baseline:
            s.reference_pair_type = "OO";
            s.candidate_pair_type = "OT";
            break;
        case Hypothesis::best_model:
            s.reference_pair_type = "OO";
            s.candidate_pair_type = "OT";
            s.restrict_to_best_candidate_config = true;
            s.always_bootstrap = true;
            break;
        case Hypothesis::multilingual:
            s.reference_pair_type = "MM";
            s.candidate_pair_type = "MX";
            s.candidate_same_model_only = true;
            break;
        case Hypothesis::om_ot_equivalence:
            s.reference_pair_type = "OM";
            s.candidate_pair_type = "OT";
            s.sidedness = Sidedness::two_sided;
            break;
    }
    return s;
}

std::string select_best_candidate_config(
    const std::vector<PairObservation>& candidate_observations) {
    std::map<std::string, std::pair<double, std::size_t>> agg;  // sum, count
    for (const auto& o : candidate_observations) {
        const std::string* t_cfg = nullptr;
        if (o.type_a == PipelineType::T)
            t_cfg = &o.config_a;
        else if (o.type_b == PipelineType::T)
            t_cfg = &o.config_b;
        else
            throw Error("select_best_candidate_config: observation without a T side");
        auto& slot = agg[*t_cfg];
        slot.first += o.value;
        slot.second += 1;
    }
    if (agg.empty())
        throw DegenerateStatError("select_best_candidate_config: no observations");
    std::string best;
    double best_mean = -std::numeric_limits<double>::infinity();
    for (const auto& [cfg, slot] : agg) {  // map order = lexicographic tie-break
        const double m = slot.first / static_cast<double>(slot.second);
        if (m > best_mean) {
            best_mean = m;
            best = cfg;
        }
    }
    return best;
}

namespace {

std::vector<FamilyObservation> to_family(const std::vector<PairObservation>& obs,
                                         const std::string& family) {
    std::vector<FamilyObservation> out;
    out.reserve(obs.size());
    for (const auto& o : obs)
        out.push_back(FamilyObservation{o.value, o.config_a, o.config_b, family});
    return out;
}

double fallback_marginal_sd(const std::vector<PairObservation>& obs) {
    if (obs.size() < 2)
        throw DegenerateStatError(
            "cannot calibrate margin: fewer than two reference observations");
    std::vector<double> v;
    v.reserve(obs.size());
    for (const auto& o : obs) v.push_back(o.value);
    const double m = pairwise_sum(v) / static_cast<double>(v.size());
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - m) * (v[i] - m);
    return std::sqrt(pairwise_sum(sq) / static_cast<double>(v.size() - 1));
}

}  // namespace

std::vector<HypothesisResult> run_hypothesis(
    const std::string& language, const std::vector<PairObservation>& observations,
    Hypothesis hypothesis, const HypothesisOptions& opt) {
    const HypothesisSpec spec = hypothesis_spec(hypothesis);

    std::vector<PairObservation> ref_obs, cand_all;
    for (const auto& o : observations) {
        if (o.pair_type == spec.reference_pair_type) ref_obs.push_back(o);
        if (o.pair_type == spec.candidate_pair_type &&
            (!spec.candidate_same_model_only || o.same_model))
            cand_all.push_back(o);
    }
    if (ref_obs.empty())
        throw DegenerateStatError(language + "/" + to_string(hypothesis) +
                                  ": no reference (" + spec.reference_pair_type +
                                  ") observations");
    if (cand_all.empty())
        throw DegenerateStatError(language + "/" + to_string(hypothesis) +
                                  ": no candidate (" + spec.candidate_pair_type +
                                  ") observations");

    std::string best_cfg;
    std::vector<PairObservation> cand_obs;
    if (spec.restrict_to_best_candidate_config) {
        best_cfg = select_best_candidate_config(cand_all);
        for (const auto& o : cand_all) {
            const std::string& t_cfg =
                o.type_a == PipelineType::T ? o.config_a : o.config_b;
            if (t_cfg == best_cfg) cand_obs.push_back(o);
        }
    } else {
        cand_obs = cand_all;
    }

    // Margin calibration from the reference family alone.
    double sigma_marginal;
    {
        FitOptions fo = opt.fit;
        bool used_fit = false;
        try {
            const VarianceComponentsFit ref_fit =
                fit_variance_components(to_family(ref_obs, spec.reference_pair_type), fo);
            if (ref_fit.converged) {
                sigma_marginal = marginal_sigma(ref_fit);
                used_fit = true;
            }
        } catch (const DegenerateStatError&) {
        }
        if (!used_fit) sigma_marginal = fallback_marginal_sd(ref_obs);
    }
    if (!(sigma_marginal > 0.0))
        throw DegenerateStatError(language + "/" + to_string(hypothesis) +
                                  ": zero marginal sigma, margin undefined");

    // Difference estimate: mixed model unless the hypothesis demands the
    // bootstrap or the joint fit fails to converge.
    Backend backend = Backend::bootstrap;
    bool joint_converged = false;
    DifferenceEstimate est;
    BootstrapSummary boot;
    if (!spec.always_bootstrap) {
        std::vector<FamilyObservation> joint =
            to_family(ref_obs, spec.reference_pair_type);
        const auto cand_fam = to_family(cand_obs, spec.candidate_pair_type);
        joint.insert(joint.end(), cand_fam.begin(), cand_fam.end());
        try {
            const VarianceComponentsFit fit = fit_variance_components(joint, opt.fit);
            if (fit.converged) {
                est = estimate_difference(fit, spec.reference_pair_type,
                                          spec.candidate_pair_type, opt.alpha);
                backend = Backend::mixed_model;
                joint_converged = true;
            }
        } catch (const DegenerateStatError&) {
        }
    }
    if (backend == Backend::bootstrap) {
        BootstrapOptions bo;
        bo.replicates = opt.bootstrap_replicates;
        bo.seed = opt.seed;
        bo.alpha = opt.alpha;
        bo.threads = opt.threads;
        boot = cluster_bootstrap(ref_obs,
                                 spec.restrict_to_best_candidate_config ? cand_all
                                                                        : cand_obs,
                                 spec.restrict_to_best_candidate_config, bo);
        est.d_hat = boot.d_hat;
        est.se = 0.0;
        est.ci_lo = boot.ci_lo;
        est.ci_hi = boot.ci_hi;
    }

    // Corpus descriptors for the verdict table.
    std::set<std::string> ref_cfgs, cand_cfgs, o_cfgs, t_cfgs;
    for (const auto& o : ref_obs) {
        ref_cfgs.insert(o.config_a);
        ref_cfgs.insert(o.config_b);
    }
    for (const auto& o : cand_obs) {
        if (!ref_cfgs.count(o.config_a)) cand_cfgs.insert(o.config_a);
        if (!ref_cfgs.count(o.config_b)) cand_cfgs.insert(o.config_b);
    }
    for (const auto& o : observations) {
        if (o.type_a == PipelineType::O) o_cfgs.insert(o.config_a);
        if (o.type_b == PipelineType::O) o_cfgs.insert(o.config_b);
        if (o.type_a == PipelineType::T) t_cfgs.insert(o.config_a);
        if (o.type_b == PipelineType::T) t_cfgs.insert(o.config_b);
    }

    std::vector<HypothesisResult> results;
    results.reserve(opt.kappas.size());
    for (const double kappa : opt.kappas) {
        HypothesisResult r;
        r.language = language;
        r.hypothesis = hypothesis;
        r.kappa = kappa;
        r.sigma_marginal = sigma_marginal;
        r.delta = kappa * sigma_marginal;
        r.d_hat = est.d_hat;
        r.se = est.se;
        r.ci_lo = est.ci_lo;
        r.ci_hi = est.ci_hi;
        const PValuePair p =
            backend == Backend::mixed_model
                ? normal_p_values(est.d_hat, est.se, r.delta, spec.sidedness)
                : bootstrap_p_values(boot, r.delta, spec.sidedness);
        r.p_inv = p.p_inv;
        r.p_dist = p.p_dist;
        r.decision = decide(est.ci_lo, est.ci_hi, r.delta, spec.sidedness);
        r.bh_decision = r.decision;
        r.backend = backend;
        r.fit_converged = joint_converged;
        r.n_observations = static_cast<std::uint32_t>(ref_obs.size() + cand_obs.size());
        r.n_ordered_pairs = 2 * r.n_observations;
        r.n_ref_configs = static_cast<std::uint32_t>(ref_cfgs.size());
        r.n_cand_configs = static_cast<std::uint32_t>(cand_cfgs.size());
        r.n_o_configs = static_cast<std::uint32_t>(o_cfgs.size());
        r.n_t_configs = static_cast<std::uint32_t>(t_cfgs.size());
        r.best_candidate_config = best_cfg;
        results.push_back(std::move(r));
    }
    return results;
}

void apply_bh_adjustment(std::vector<HypothesisResult>& results, double q) {
    std::map<std::pair<int, double>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < results.size(); ++i)
        groups[{static_cast<int>(results[i].hypothesis), results[i].kappa}].push_back(i);

    for (const auto& [key, idx] : groups) {
        std::vector<double> p_inv, p_dist;
        p_inv.reserve(idx.size());
        p_dist.reserve(idx.size());
        for (const std::size_t i : idx) {
            p_inv.push_back(results[i].p_inv);
            p_dist.push_back(results[i].p_dist);
        }
        const std::vector<bool> keep_inv = bh_adjust(p_inv, q);
        const std::vector<bool> keep_dist = bh_adjust(p_dist, q);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            HypothesisResult& r = results[idx[k]];
            switch (r.decision) {
                case Decision::invariant:
                case Decision::equivalent:
                    r.bh_decision = keep_inv[k] ? r.decision : Decision::indeterminate;
                    break;
                case Decision::distorted:
                case Decision::inferior:
                case Decision::superior:
                    r.bh_decision = keep_dist[k] ? r.decision : Decision::indeterminate;
                    break;
                case Decision::indeterminate:
                    r.bh_decision = Decision::indeterminate;
                    break;
            }
        }
    }
}

}  // namespace invlab

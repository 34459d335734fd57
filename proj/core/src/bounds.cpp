#include "nflab/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nflab {

namespace {

double mean(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

CheckOutcome make_check(std::string name, double lhs, double rhs,
                        double eps_stat, std::string note = "") {
  CheckOutcome c;
  c.name = std::move(name);
  c.lhs = lhs;
  c.rhs = rhs;
  c.slack = rhs - lhs;
  c.eps_stat = eps_stat;
  c.pass = c.slack >= -eps_stat;
  c.note = std::move(note);
  return c;
}

CheckOutcome skipped_check(std::string name, std::string note) {
  CheckOutcome c;
  c.name = std::move(name);
  c.skipped = true;
  c.pass = false;
  c.note = std::move(note);
  return c;
}

}  // namespace

double TradeoffReport::mean_sqrt_js_afo() const {
  double s = 0.0;
  for (double v : js_afo_k) s += std::sqrt(std::max(0.0, v));
  return js_afo_k.empty() ? 0.0 : s / static_cast<double>(js_afo_k.size());
}

double TradeoffReport::mean_tv() const { return mean(tv_k); }

NflCheckResult check_nfl(const TradeoffReport& r) {
  NflCheckResult out;
  const double expm_2xi = std::expm1(2.0 * r.xi_hat);
  out.eq4 = make_check("nfl-eq4", r.c1,
                       r.eps_p + 0.5 * expm_2xi * r.mean_tv(),
                       /*eps_stat=*/0.0);
  if (!r.delta_hat || !r.gamma_appendix) {
    out.eq5 = skipped_check("nfl-eq5", "skipped: Assumption 1 (" +
                                           r.assumption1_note + ")");
    return out;
  }
  const double c2 = *r.gamma_appendix * expm_2xi / (4.0 * *r.delta_hat);
  out.eq5 = make_check("nfl-eq5", r.c1, r.eps_p + c2 * r.eps_u,
                       /*eps_stat=*/3.0 * c2 * r.eps_u_se);
  return out;
}

bool SweepCheckResult::pass() const {
  for (const auto& c : per_report)
    if (!c.skipped && !c.pass) return false;
  for (const auto& c : sequence)
    if (!c.skipped && !c.pass) return false;
  return true;
}

namespace {

// Discretization tolerance for bound checks that compare grid-discretized
// TVs against parametric (quadrature) TVs: the exact belief chain is stated
// on the discretized objects, the Gaussian lemmas on the parametric ones.
double tv_mismatch(const Vec& tv_disc, const Vec& tv_quad) {
  double m = 0.0;
  for (std::size_t i = 0; i < tv_disc.size(); ++i)
    m += std::abs(tv_disc[i] - tv_quad[i]);
  return tv_disc.empty() ? 0.0 : m / static_cast<double>(tv_disc.size());
}

}  // namespace

SweepCheckResult check_randomization(const std::vector<TradeoffReport>& sweep) {
  if (sweep.empty())
    throw std::invalid_argument("check_randomization: empty sweep");
  SweepCheckResult out;
  for (const auto& r : sweep)
    if (!r.randomization)
      throw std::invalid_argument(
          "check_randomization: report lacks the parametric DiagGaussian "
          "path; use the generic NFL check");

  for (const auto& r : sweep) {
    const auto& ex = *r.randomization;
    const double expm_2xi = std::expm1(2.0 * r.xi_hat);
    const double disc_tol =
        0.5 * expm_2xi * tv_mismatch(r.tv_k, ex.tv_quad);
    const std::string tag = "sigma=" + std::to_string(ex.sigma_eps);
    out.per_report.push_back(make_check(
        "randomization-privacy[" + tag + "]", r.c1,
        r.eps_p + 0.75 * expm_2xi * ex.bound_term_avg, disc_tol));
    out.per_report.push_back(make_check(
        "randomization-utility[" + tag + "]", r.eps_u,
        r.c4 * ex.bound_term_avg, 3.0 * r.eps_u_se));
    if (ex.sigma_eps == 0.0) {
      out.sequence.push_back(make_check(
          "randomization-sigma0-eps-u-exact", std::abs(r.eps_u), 0.0, 0.0,
          "sigma=0 must give bitwise eps_u = 0"));
      out.sequence.push_back(make_check("randomization-sigma0-eps-p-floor",
                                        r.c1, r.eps_p + r.mean_sqrt_js_afo(),
                                        0.0,
                                        "eps_p >= C1 within the recorded "
                                        "belief shift"));
    }
  }

  // Monotonicity of the bound formulas, exact given shared constants.  The
  // fitted unprotected variances are seed-identical across the sweep.
  const Vec& base_norm = sweep.front().randomization->inv_quartic_norm;
  bool same_fit = true;
  for (const auto& r : sweep)
    if (r.randomization->inv_quartic_norm != base_norm) same_fit = false;
  if (!same_fit) {
    out.sequence.push_back(
        skipped_check("randomization-bound-monotone",
                      "unprotected fits differ across the sweep"));
  } else {
    bool term_monotone = true;
    bool sigma_sorted = true;
    for (std::size_t i = 1; i < sweep.size(); ++i) {
      if (sweep[i].randomization->sigma_eps <
          sweep[i - 1].randomization->sigma_eps)
        sigma_sorted = false;
      if (sweep[i].randomization->bound_term_avg <
          sweep[i - 1].randomization->bound_term_avg)
        term_monotone = false;
    }
    CheckOutcome mono;
    mono.name = "randomization-bound-monotone";
    mono.pass = sigma_sorted && term_monotone;
    mono.note =
        "utility-bound term non-decreasing and privacy-bound term "
        "non-increasing in sigma";
    out.sequence.push_back(mono);
  }
  return out;
}

SweepCheckResult check_sparsity(const std::vector<TradeoffReport>& sweep) {
  if (sweep.empty()) throw std::invalid_argument("check_sparsity: empty sweep");
  SweepCheckResult out;
  for (const auto& r : sweep)
    if (!r.sparsity)
      throw std::invalid_argument(
          "check_sparsity: report lacks the parametric Gaussian sparsity "
          "setup; use the generic NFL check");

  for (const auto& r : sweep) {
    const auto& ex = *r.sparsity;
    const double expm_2xi = std::expm1(2.0 * r.xi_hat);
    const double c3_sqrt2 = 0.5 * expm_2xi * std::sqrt(2.0);
    const double disc_tol = 0.5 * expm_2xi * tv_mismatch(r.tv_k, ex.tv_quad);
    const std::string tag = "d=" + std::to_string(ex.kept_dims);
    out.per_report.push_back(make_check("sparsity-privacy[" + tag + "]", r.c1,
                                        r.eps_p + c3_sqrt2 * ex.h, disc_tol));
    out.per_report.push_back(make_check(
        "sparsity-utility[" + tag + "]", r.eps_u,
        std::sqrt(2.0) * r.c4 * ex.h, 3.0 * r.eps_u_se));
    if (ex.kept_dims == ex.total_dims) {
      out.sequence.push_back(make_check("sparsity-full-upload-h-zero", ex.h,
                                        0.0, 0.0, "d = n must give h = 0"));
      out.sequence.push_back(make_check("sparsity-full-upload-eps-u-exact",
                                        std::abs(r.eps_u), 0.0, 0.0));
      out.sequence.push_back(make_check("sparsity-full-upload-eps-p-floor",
                                        r.c1, r.eps_p + r.mean_sqrt_js_afo(),
                                        0.0));
    }
  }

  // h(d) non-increasing, exact: rebuild the suffix sequence from the run
  // with the smallest kept count (its substitute tail covers every other
  // run's), then match each report's h bitwise against it.
  std::size_t base_idx = 0;
  for (std::size_t i = 1; i < sweep.size(); ++i)
    if (sweep[i].sparsity->kept_dims < sweep[base_idx].sparsity->kept_dims)
      base_idx = i;
  const auto& base = *sweep[base_idx].sparsity;
  bool consistent = true;
  for (const auto& r : sweep) {
    const auto& ex = *r.sparsity;
    if (ex.mu_o != base.mu_o || ex.var_o != base.var_o ||
        ex.total_dims != base.total_dims)
      consistent = false;
    else
      for (std::size_t j = 0; j < ex.mu_g.size(); ++j) {
        const std::size_t i = ex.kept_dims - base.kept_dims + j;
        if (ex.mu_g[j] != base.mu_g.at(i) || ex.var_g[j] != base.var_g.at(i))
          consistent = false;
      }
  }
  if (!consistent) {
    out.sequence.push_back(skipped_check(
        "sparsity-h-monotone",
        "fitted or substitute parameters differ across the sweep"));
  } else {
    const Vec mu_o_tail(base.mu_o.begin() + base.kept_dims, base.mu_o.end());
    const Vec var_o_tail(base.var_o.begin() + base.kept_dims, base.var_o.end());
    const Vec suffix =
        hellinger_suffix(mu_o_tail, var_o_tail, base.mu_g, base.var_g);
    bool match = true;
    bool monotone = true;
    for (const auto& r : sweep) {
      const auto& ex = *r.sparsity;
      if (suffix.at(ex.kept_dims - base.kept_dims) != ex.h) match = false;
    }
    for (std::size_t d = 1; d < suffix.size(); ++d)
      if (suffix[d] > suffix[d - 1]) monotone = false;
    CheckOutcome mono;
    mono.name = "sparsity-h-monotone";
    mono.pass = match && monotone;
    mono.note = "h suffix sequence non-increasing in kept dimensions";
    out.sequence.push_back(mono);
  }
  return out;
}

bool HeCheckResult::pass() const {
  for (const auto& c : unknown_key)
    if (!c.skipped && !c.pass) return false;
  for (const auto& c : known_key)
    if (!c.skipped && !c.pass) return false;
  return true;
}

HeCheckResult check_he(const TradeoffReport& unknown_key,
                       const TradeoffReport& known_key) {
  if (!unknown_key.toy_he || unknown_key.toy_he->key_known)
    throw std::invalid_argument("check_he: first report must be unknown-key");
  if (!known_key.toy_he || !known_key.toy_he->key_known)
    throw std::invalid_argument("check_he: second report must be known-key");

  HeCheckResult out;
  out.unknown_key.push_back(make_check("he-unknown-eps-p-zero",
                                       unknown_key.eps_p, 0.0, 0.0,
                                       "semantic security: posterior equals "
                                       "prior exactly"));
  if (unknown_key.delta_hat && unknown_key.gamma_appendix) {
    const double c2 = *unknown_key.gamma_appendix *
                      std::expm1(2.0 * unknown_key.xi_hat) /
                      (4.0 * *unknown_key.delta_hat);
    out.unknown_key.push_back(make_check("he-unknown-eps-u-floor",
                                         unknown_key.c1 / c2, unknown_key.eps_u,
                                         3.0 * unknown_key.eps_u_se));
  } else {
    out.unknown_key.push_back(skipped_check(
        "he-unknown-eps-u-floor",
        "skipped: Assumption 1 (" + unknown_key.assumption1_note + ")"));
  }

  out.known_key.push_back(make_check("he-known-eps-u-quantization",
                                     known_key.eps_u,
                                     known_key.toy_he->quantization_tol,
                                     3.0 * known_key.eps_u_se));
  out.known_key.push_back(make_check(
      "he-known-eps-p-floor", known_key.c1,
      known_key.eps_p + known_key.mean_sqrt_js_afo(), 0.0,
      "eps_p >= C1 within the recorded quantization-induced belief shift"));
  return out;
}

std::vector<CheckOutcome> check_secret_sharing(const TradeoffReport& r) {
  if (!r.secret_sharing)
    throw std::invalid_argument("check_secret_sharing: not a secret-sharing run");
  std::vector<CheckOutcome> out;
  out.push_back(make_check("secret-sharing-eps-u-exact", std::abs(r.eps_u),
                           0.0, 0.0, "aggregate invariance is bit-exact"));
  const double tv_term = r.secret_sharing->closed_form_tv;
  const double penalty = 0.5 * std::expm1(2.0 * r.xi_hat) * tv_term;
  for (std::size_t k = 0; k < r.eps_p_k.size(); ++k)
    out.push_back(make_check(
        "secret-sharing-leakage-floor[k=" + std::to_string(k) + "]",
        r.c1_k[k] - penalty, r.eps_p_k[k], 0.0));
  return out;
}

TradeoffSolution solve_constrained_tradeoff(
    const std::vector<TradeoffReport>& sweep, double eps_budget) {
  if (sweep.empty())
    throw std::invalid_argument("solve_constrained_tradeoff: empty grid");
  TradeoffSolution best;
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    const auto& r = sweep[i];
    if (r.eps_p > eps_budget) continue;
    const bool better =
        !best.feasible || r.eps_u < best.eps_u ||
        (r.eps_u == best.eps_u && r.eps_p < best.eps_p);
    if (better) best = {true, i, r.eps_p, r.eps_u};
  }
  return best;
}

}  // namespace nflab

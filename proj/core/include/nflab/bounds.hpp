#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nflab/federation.hpp"
#include "nflab/linalg.hpp"
#include "nflab/protection.hpp"

namespace nflab {

/// Outcome of one inequality check.  Both sides are recomputed from raw
/// report fields; slack = rhs - lhs and the check passes when
/// slack >= -eps_stat.
struct CheckOutcome {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  double eps_stat = 0.0;
  bool pass = false;
  bool skipped = false;
  std::string note;
};

/// Parametric extras recorded on randomization runs (DiagGaussian path).
struct RandomizationExtras {
  double sigma_eps = 0.0;
  Vec inv_quartic_norm;  // per client: sqrt(sum_i sigma_i^-4) of fitted P_O
  Vec bound_term;        // per client: min{1, sigma^2 * inv_quartic_norm}
  double bound_term_avg = 0.0;
  Vec tv_quad;           // per-client quadrature TV of the parametric pair
  double tv_a_quad = 0.0;
  double gamma_gauss = 0.0;  // mean tv_quad / tv_a_quad
};

struct SparsityExtras {
  std::size_t kept_dims = 0;
  std::size_t total_dims = 0;
  double h = 0.0;  // Hellinger-h over the withheld tail
  Vec mu_o;        // fitted unprotected mean, full n dims (pooled clients)
  Vec var_o;       // fitted unprotected variance, full n dims
  Vec mu_g;        // substitute tail mean, length n - kept_dims
  Vec var_g;       // substitute tail variance, length n - kept_dims
  Vec tv_quad;
  double tv_a_quad = 0.0;
};

struct SecretSharingExtras {
  Vec delta, a, b;
  double closed_form_tv = 0.0;  // 1 - prod 2 delta / (a + b)
};

struct ToyHeExtras {
  bool key_known = false;
  int fixed_point_bits = 8;
  double quantization_tol = 0.0;  // 2^-bits * dim
};

/// Everything one experiment produces: exact belief quantities, the
/// theorem constants and the measured losses.  This is the persisted unit;
/// every verification recomputes its inequalities from these raw fields.
struct TradeoffReport {
  int schema_version = 1;
  std::string mechanism;
  std::string config_hash;
  std::uint64_t seed = 0;
  int clients = 0;
  std::string dist_path;  // histogram | gaussian

  Vec eps_p_k;   // sqrt JS(F_A_k || F_B_k)
  double eps_p = 0.0;
  Vec c1_k;      // sqrt JS(F_O_k || F_B_k)
  double c1 = 0.0;
  Vec js_afo_k;  // JS(F_A_k || F_O_k), the protection-induced belief shift
  double xi_hat = 0.0;
  double c3 = 0.0;  // (e^{2 xi} - 1) / 2
  double c4 = 1.0;

  Vec tv_k;  // per-client discretized TV(P_O_k || P_S_k)
  double tv_a = 0.0;

  double eps_u = 0.0;
  Vec eps_u_k;
  double eps_u_se = 0.0;

  double dp_max_log_ratio = 0.0;  // max posterior log-ratio over releases

  double u_star = 0.0;
  Vec w_star;
  std::optional<double> delta_hat;  // absent when Assumption 1 fails
  std::string assumption1_note;
  std::optional<double> gamma_appendix;   // mean TV_k / TV_a
  std::optional<double> gamma_maintext;   // sum TV_k / TV_a
  std::optional<double> c2;               // gamma_app (e^{2xi}-1) / (4 delta)

  std::optional<RandomizationExtras> randomization;
  std::optional<SparsityExtras> sparsity;
  std::optional<SecretSharingExtras> secret_sharing;
  std::optional<ToyHeExtras> toy_he;

  double mean_sqrt_js_afo() const;  // (1/K) sum sqrt(js_afo_k)
  double mean_tv() const;
};

struct NflCheckResult {
  CheckOutcome eq4;
  CheckOutcome eq5;
  bool pass() const {
    return eq4.pass && (eq5.skipped || eq5.pass);
  }
};

/// No-free-lunch checks.
///   Eq 4:  C1 <= eps_p + (1/K) sum_k (1/2)(e^{2 xi}-1) TV_k
///   Eq 5:  C1 <= eps_p + C2 eps_u, C2 = gamma (e^{2 xi}-1) / (4 Delta),
/// the second only when Assumption 1 produced a positive Delta.
NflCheckResult check_nfl(const TradeoffReport& report);

struct SweepCheckResult {
  std::vector<CheckOutcome> per_report;
  std::vector<CheckOutcome> sequence;  // monotonicity / endpoint checks
  bool pass() const;
};

/// Randomization corollary over a sigma sweep: appendix-form privacy and
/// utility bounds per point, exact monotonicity of the bound terms, and the
/// sigma = 0 endpoint conditions.
SweepCheckResult check_randomization(const std::vector<TradeoffReport>& sweep);

/// Sparsity corollary over a kept-dimension sweep: bound checks per point,
/// the exactly non-increasing h sequence, and the d = n endpoint.
SweepCheckResult check_sparsity(const std::vector<TradeoffReport>& sweep);

struct HeCheckResult {
  std::vector<CheckOutcome> unknown_key;
  std::vector<CheckOutcome> known_key;
  bool pass() const;
};

/// Encryption theorem: unknown key forces eps_p = 0 with eps_u >= C1/C2;
/// known key forces eps_u below the quantization tolerance with
/// eps_p >= C1 (within the recorded belief wobble).
HeCheckResult check_he(const TradeoffReport& unknown_key,
                       const TradeoffReport& known_key);

/// Secret sharing: eps_u = 0 bit-exact and the per-client leakage lower
/// bound with the closed-form interval TV.
std::vector<CheckOutcome> check_secret_sharing(const TradeoffReport& report);

struct TradeoffSolution {
  bool feasible = false;
  std::size_t grid_index = 0;
  double eps_p = 0.0;
  double eps_u = 0.0;
};

/// Constrained trade-off over an evaluated sweep: among grid points with
/// eps_p <= budget, minimize eps_u; ties prefer smaller eps_p, then the
/// lower grid index.
TradeoffSolution solve_constrained_tradeoff(
    const std::vector<TradeoffReport>& sweep, double eps_budget);

}  // namespace nflab

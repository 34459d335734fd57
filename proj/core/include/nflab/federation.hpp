#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nflab/belief.hpp"
#include "nflab/dataset.hpp"
#include "nflab/divergence.hpp"
#include "nflab/model.hpp"
#include "nflab/protection.hpp"

namespace nflab {

struct FederationConfig {
  int clients = 4;
  int rounds = 50;
  int trials = 64;
  int steps_per_round = 4;
  double lr = 0.1;
  double init_scale = 0.5;
  ModelKind model_kind = ModelKind::kLinearRegression;
  DataGenSpec data;
  std::optional<std::string> csv_path;  // rows split contiguously across clients
  bool resample_per_trial = true;
  int eval_samples = 256;
  MechanismSpec mechanism = NoOpSpec{};
  UtilitySpec utility;
  std::uint64_t seed = 1;
  int jobs = 1;
  bool record_traces = true;

  void validate() const;
};

struct RoundTrace {
  int trial = 0;
  int round = 0;
  double mean_loss = 0.0;  // mean client training loss after the round
  double grad_norm = 0.0;  // mean client gradient norm at the new global
};

/// Model-information samples across trials (one vector per trial).
struct EmpiricalModelDist {
  std::vector<Vec> samples;

  /// Moments fit as a diagonal Gaussian; requires >= 2 samples.
  DiagGaussian fitted(double var_floor = 1e-12) const;
};

struct FederationResult {
  std::vector<RoundTrace> traces;
  std::vector<EmpiricalModelDist> dist_o_clients;  // converged local models
  std::vector<EmpiricalModelDist> dist_s_clients;  // observed releases
  EmpiricalModelDist dist_o_agg;
  EmpiricalModelDist dist_s_agg;
  bool s_is_opaque = false;  // ciphertext releases (unknown-key regime)
  Vec final_grad_norms;      // per trial
  std::vector<ClientDataset> eval_data;  // reference data for utility
};

/// Runs T independent seeded trials of R federated rounds (local training,
/// aggregation, download), then applies the protection mechanism once to
/// each converged local model and aggregates the protected releases.
FederationResult run_federation(const FederationConfig& config);

/// Average model utility over the evaluation datasets: (1/K) sum_k U_k(w).
double mean_utility(const Vec& w, ModelKind kind,
                    const std::vector<ClientDataset>& eval_data,
                    const UtilitySpec& spec);

struct UtilityLossResult {
  double eps_u = 0.0;
  Vec per_client;       // U_k(P_a_O) - U_k(P_a_S)
  double std_error = 0.0;  // propagated Monte-Carlo SE of eps_u
};

/// eps_u = (1/K) sum_k [ mean utility under dist_O - mean under dist_S ].
/// Requires sample counts to match; may be negative and is reported as-is.
UtilityLossResult utility_loss(const EmpiricalModelDist& dist_o_agg,
                               const EmpiricalModelDist& dist_s_agg,
                               ModelKind kind,
                               const std::vector<ClientDataset>& eval_data,
                               const UtilitySpec& spec);

struct UStarResult {
  double u_star = 0.0;
  Vec w_star;
};

/// Optimal-utility estimate: best observed aggregate plus a gradient
/// descent polish on the pooled training objective.
UStarResult estimate_u_star(const EmpiricalModelDist& dist_o_agg,
                            const EmpiricalModelDist& dist_s_agg,
                            ModelKind kind,
                            const std::vector<ClientDataset>& eval_data,
                            const UtilitySpec& spec, double lr,
                            int polish_steps);

class AssumptionViolated : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Largest Delta (bisection to tolerance tol) such that the empirical mass
/// of near-optimal aggregates under dist_S stays below TV/2.  Throws
/// AssumptionViolated when the aggregate TV vanishes or the mass constraint
/// already fails as Delta -> 0+.
double compute_delta(const EmpiricalModelDist& dist_s_agg,
                     const UStarResult& u_star, ModelKind kind,
                     const std::vector<ClientDataset>& eval_data,
                     const UtilitySpec& spec, double tv_a, double tol);

struct GammaResult {
  double appendix_form = 0.0;   // mean_k TV_k / TV_a
  double main_text_form = 0.0;  // sum_k TV_k / TV_a
};

/// Ratio of per-client to aggregate model-information TV; errors when the
/// aggregate TV is zero.
GammaResult compute_gamma(const Vec& tv_clients, double tv_a);

/// Shared-bin histograms of two sample sets (pooled equal-width bins,
/// bins_per_dim per dimension, dims <= 3).  Atom labels are shared so the
/// two released distributions are directly comparable; atom locations are
/// bin centers.
std::pair<ReleasedDist, ReleasedDist> histogram_pair(
    const std::vector<Vec>& o_samples, const std::vector<Vec>& s_samples,
    int bins_per_dim, bool s_opaque = false);

}  // namespace nflab

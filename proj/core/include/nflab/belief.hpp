#pragma once

#include <string>
#include <vector>

#include "nflab/dataset.hpp"
#include "nflab/divergence.hpp"
#include "nflab/linalg.hpp"
#include "nflab/rng.hpp"

namespace nflab {

/// Finite set of candidate private datasets with a strictly positive prior.
/// Keeping the universe finite makes every posterior, marginal and
/// divergence exactly enumerable.
struct CandidateUniverse {
  std::vector<ClientDataset> candidates;
  DiscretePMF prior;

  static constexpr std::size_t kDefaultCap = 64;

  CandidateUniverse(std::vector<ClientDataset> cands, DiscretePMF pr,
                    std::size_t cap = kDefaultCap);

  std::size_t size() const { return candidates.size(); }
};

/// Adversary emission model: a released value is a deterministic map of the
/// candidate dataset plus isotropic Gaussian observation noise sigma_obs.
/// The per-candidate release vectors are precomputed.  A release observed
/// through an opaque channel (semantically secure ciphertext) carries no
/// information: its emission density is constant in the candidate.
struct LikelihoodModel {
  std::vector<Vec> releases;  // one per candidate, equal dimensions
  double sigma_obs = 0.1;

  LikelihoodModel(std::vector<Vec> rel, double sigma);

  double log_emission(std::size_t candidate, std::span<const double> w,
                      bool opaque) const;
};

/// One released-value atom: location, probability mass, channel.
struct ReleaseAtom {
  Vec w;
  double mass = 0.0;
  bool opaque = false;
  std::string label;
};

/// Discrete distribution over released values.  Atom labels key the shared
/// support when two released distributions are compared.
struct ReleasedDist {
  std::vector<ReleaseAtom> atoms;

  DiscretePMF as_pmf() const;
  static ReleasedDist from_samples(const std::vector<Vec>& samples,
                                   bool opaque = false);
};

enum class BeliefProvenance {
  kPrior,
  kPosteriorGivenW,
  kMarginalProtected,
  kMarginalUnprotected,
};

/// A DiscretePMF over a candidate universe tagged with how it was built.
struct BeliefDistribution {
  DiscretePMF pmf;
  BeliefProvenance provenance = BeliefProvenance::kPrior;
  std::size_t sample_count = 0;  // atoms/samples averaged, 0 for priors
};

/// Exact Bayes posterior over the universe given one released value.
/// Arithmetic runs in log space with max-subtraction; throws only if every
/// candidate's log density is -inf.
BeliefDistribution posterior(std::span<const double> w,
                             const CandidateUniverse& universe,
                             const LikelihoodModel& likelihood,
                             bool opaque = false);

/// Marginal belief: the posterior averaged over the released-value
/// distribution, f(d) = sum_atoms mass * posterior(w_atom)(d).
BeliefDistribution marginal_belief(const ReleasedDist& dist,
                                   const CandidateUniverse& universe,
                                   const LikelihoodModel& likelihood,
                                   BeliefProvenance provenance);

/// Convenience overload: draw `samples` released values from a diagonal
/// Gaussian with the given stream, then average posteriors.
BeliefDistribution marginal_belief(const DiagGaussian& dist_over_w,
                                   const CandidateUniverse& universe,
                                   const LikelihoodModel& likelihood,
                                   BeliefProvenance provenance,
                                   std::size_t samples, RngStream stream);

/// Maximum Bayesian privacy over a released-value grid:
///   xi_hat = max over (atoms, candidates) |log posterior(d|w) - log prior(d)|.
/// Monotone non-decreasing under grid refinement.  Throws if the prior has
/// a zero entry (xi undefined).
double compute_xi(const CandidateUniverse& universe,
                  const LikelihoodModel& likelihood,
                  const std::vector<ReleaseAtom>& w_grid);

/// Per-client Bayesian privacy leakage sqrt(JS(F_A || F_B)).
double bayesian_privacy_leakage(const BeliefDistribution& f_a,
                                const BeliefDistribution& f_b);

/// System-level leakage: plain average of the per-client values.
double system_privacy_leakage(const Vec& per_client);

struct DpCheckResult {
  double max_log_ratio = 0.0;
  double bound = 0.0;  // 2 * xi_hat
  bool pass = false;
};

/// Bayesian-privacy-to-differential-privacy check: the largest posterior
/// log-ratio across released values must not exceed 2 * xi_hat.
DpCheckResult dp_epsilon_check(const CandidateUniverse& universe,
                               const LikelihoodModel& likelihood,
                               const std::vector<ReleaseAtom>& w_grid);

/// Deterministic low-discrepancy (Halton) grid over the smallest box
/// containing mean +- 6 sigma of both Gaussians; used as the released-value
/// grid for xi and for discretizing parametric model-information
/// distributions.
std::vector<Vec> low_discrepancy_grid(const DiagGaussian& a,
                                      const DiagGaussian& b, std::size_t size);

/// Weights shared grid points by a Gaussian density (normalized), yielding
/// a discretized released-value distribution whose support is the grid.
ReleasedDist discretize_gaussian(const DiagGaussian& g,
                                 const std::vector<Vec>& grid);

}  // namespace nflab

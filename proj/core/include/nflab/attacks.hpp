#pragma once

#include <optional>
#include <vector>

#include "nflab/belief.hpp"
#include "nflab/model.hpp"
#include "nflab/toyhe.hpp"

namespace nflab {

enum class AttackKind { kGradientInversion, kModelInversion, kBruteForce };
enum class AttackPrior { kNone, kSmoothness, kLabel };

struct AttackConfig {
  AttackKind kind = AttackKind::kGradientInversion;
  AttackPrior prior = AttackPrior::kNone;
  double step_size = 0.25;   // initial backtracking step
  int max_iters = 2000;
  double tolerance = 1e-8;
  double prior_weight = 0.0;  // lambda >= 0
  int restarts = 4;
  std::uint64_t seed = 1;
  std::optional<Vec> init;  // explicit start override (first restart)
};

struct AttackResult {
  Vec recovered;  // data estimate; for brute force, empty
  double final_loss = 0.0;
  int iterations = 0;
  bool converged = false;
  std::optional<std::size_t> found_key_index;  // brute force
  std::size_t decrypt_calls = 0;               // brute force
};

/// Single-sample attack instance: the adversary knows the model weights and
/// optionally the label; the private datum is the feature vector.
struct LinearAttackContext {
  ModelKind model_kind = ModelKind::kLinearRegression;
  Vec weights;
  std::optional<double> label;  // fixed when the label prior is active
};

/// Recovers the input from an observed training gradient by minimizing
/// || grad(x) - G ||^2 + lambda * smoothness(x) with analytic gradients,
/// backtracking line search and seeded restarts.  The first restart starts
/// from the observed gradient itself unless an explicit init is given.
AttackResult gradient_inversion(const Vec& observed_gradient,
                                const LinearAttackContext& ctx,
                                const AttackConfig& cfg);

/// Recovers the input from an observed model output, same optimizer
/// contract; the first restart starts from the least-norm preimage.
AttackResult model_inversion(double observed_output,
                             const LinearAttackContext& ctx,
                             const AttackConfig& cfg);

/// Enumerable key space: keys regenerated from (seed, index) in a fixed,
/// recorded scan order.
struct KeySpace {
  std::size_t count = 0;
  std::uint64_t seed = 0;
  HeParams params;

  SecretKey key_at(std::size_t index) const;
};

/// Tries every key in scan order until decrypt(ciphertext) matches the
/// plaintext; converged=false with |keyspace| decrypt calls when absent.
AttackResult brute_force_key(std::int64_t plaintext, const Ciphertext& c,
                             const KeySpace& keyspace);

struct PosteriorArgmax {
  std::size_t index = 0;
  bool tie = false;  // lowest index returned on ties
};

/// Bayesian-attack cross-check: the arg-max of the exact posterior over an
/// enumerable universe.
PosteriorArgmax attack_as_posterior_argmax(std::span<const double> w_observed,
                                           const CandidateUniverse& universe,
                                           const LikelihoodModel& likelihood);

}  // namespace nflab

#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "nflab/model.hpp"
#include "nflab/rng.hpp"
#include "nflab/toyhe.hpp"

namespace nflab {

struct NoOpSpec {};

struct RandomizationSpec {
  double sigma_eps = 0.0;  // stddev of the per-coordinate Gaussian noise
};

/// Upload the first `kept_dims` coordinates verbatim; the withheld tail is
/// modeled as a draw from the substitute Gaussian N(mu_g, sigma_g_var).
struct SparsitySpec {
  std::size_t kept_dims = 0;
  Vec mu_g;          // length n - kept_dims
  Vec sigma_g_var;   // length n - kept_dims, strictly positive
};

/// Additive secret sharing over the fixed-point lattice.  Each coordinate
/// of each client splits into K shares uniform on the width-(a+b) interval
/// around a public center; masks cancel exactly in integer arithmetic.
struct SecretSharingSpec {
  Vec delta;  // per-coordinate original half-width, delta < a and delta < b
  Vec a;      // per-coordinate lower offset (positive)
  Vec b;      // per-coordinate upper offset (positive)
  int fixed_point_bits = 8;
  std::optional<Vec> centers;  // public reference; defaults to the client mean

  void validate(std::size_t dim) const;
};

struct ToyHeSpec {
  HeParams params;
  bool key_known = false;  // adversary/server key regime
  int fixed_point_bits = 8;
};

using MechanismSpec = std::variant<NoOpSpec, RandomizationSpec, SparsitySpec,
                                   SecretSharingSpec, ToyHeSpec>;

std::string mechanism_id(const MechanismSpec& spec);

/// W_S = W_O + eps, eps ~ N(0, sigma^2 I) from the given stream.  sigma = 0
/// returns the input untouched (no draws consumed).
ModelVector randomize(const ModelVector& w, double sigma_eps, RngStream& rng);

ModelVector sparsify(const ModelVector& w, const SparsitySpec& spec,
                     RngStream& rng);

class SecretShareOverflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SecretShareResult {
  /// shares[k][j] is client k's j-th additive share (model units).
  std::vector<std::vector<Vec>> shares;
  /// Exact sum of the (fixed-point) originals, in model units.
  Vec reconstructed_sum;
};

/// Splits each client vector into K additive shares.  Requires inputs on
/// the fixed-point lattice (use snap_to_lattice at the release boundary);
/// each share's marginal is uniform over [center - a, center + b) and the
/// share sum reconstructs the client value exactly.  Throws
/// SecretShareOverflow when a residual exceeds the interval modulus.
SecretShareResult secret_share(const std::vector<ModelVector>& models,
                               const SecretSharingSpec& spec, RngStream rng);

/// Rounds every coordinate to the 2^-bits lattice.
Vec snap_to_lattice(const Vec& v, int bits);

/// Closed-form single-share marginal total variation for the secret-sharing
/// model: TV = 1 - prod_j (2 delta_j / (a_j + b_j)).
double secret_sharing_marginal_tv(const SecretSharingSpec& spec);

}  // namespace nflab

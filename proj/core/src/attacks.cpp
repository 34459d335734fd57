#include "nflab/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nflab {

namespace {

constexpr double kArmijoC = 1e-4;
constexpr double kSmoothEps = 1e-12;

// Smoothed discrete total variation of the data vector and its gradient.
double smooth_tv(std::span<const double> x, Vec* grad) {
  double tv = 0.0;
  if (grad) std::fill(grad->begin(), grad->end(), 0.0);
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double d = x[i + 1] - x[i];
    const double phi = std::sqrt(d * d + kSmoothEps);
    tv += phi;
    if (grad) {
      (*grad)[i + 1] += d / phi;
      (*grad)[i] -= d / phi;
    }
  }
  return tv;
}

struct Objective {
  // Returns loss; fills grad (same size as u) when non-null.
  virtual double eval(std::span<const double> u, Vec* grad) const = 0;
  virtual ~Objective() = default;
};

// Unknown vector u = x, or [x, y] when the label is free.
struct GradientMatch : Objective {
  const Vec& observed;
  const LinearAttackContext& ctx;
  double lambda;
  AttackPrior prior;

  GradientMatch(const Vec& g, const LinearAttackContext& c, double lam,
                AttackPrior p)
      : observed(g), ctx(c), lambda(lam), prior(p) {}

  double eval(std::span<const double> u, Vec* grad) const override {
    const std::size_t n = ctx.weights.size();
    const bool free_label = !ctx.label.has_value();
    std::span<const double> x = u.subspan(0, n);
    const double y = free_label ? u[n] : *ctx.label;

    const double z = dot(ctx.weights, x);
    const double pred =
        ctx.model_kind == ModelKind::kLinearRegression ? z : sigmoid(z);
    const double resid = pred - y;
    // r_i = resid * x_i - G_i
    double loss = 0.0;
    double rx = 0.0;  // sum_i r_i x_i
    Vec r(n);
    for (std::size_t i = 0; i < n; ++i) {
      r[i] = resid * x[i] - observed[i];
      loss += r[i] * r[i];
      rx += r[i] * x[i];
    }
    if (grad) {
      const double dpred_dz = ctx.model_kind == ModelKind::kLinearRegression
                                  ? 1.0
                                  : pred * (1.0 - pred);
      for (std::size_t i = 0; i < n; ++i)
        (*grad)[i] = 2.0 * (rx * dpred_dz * ctx.weights[i] + resid * r[i]);
      if (free_label) (*grad)[n] = -2.0 * rx;
    }
    if (prior == AttackPrior::kSmoothness && lambda > 0.0) {
      Vec tv_grad(n, 0.0);
      loss += lambda * smooth_tv(x, grad ? &tv_grad : nullptr);
      if (grad)
        for (std::size_t i = 0; i < n; ++i) (*grad)[i] += lambda * tv_grad[i];
    }
    return loss;
  }
};

struct OutputMatch : Objective {
  double observed;
  const LinearAttackContext& ctx;
  double lambda;
  AttackPrior prior;

  OutputMatch(double o, const LinearAttackContext& c, double lam, AttackPrior p)
      : observed(o), ctx(c), lambda(lam), prior(p) {}

  double eval(std::span<const double> u, Vec* grad) const override {
    const std::size_t n = ctx.weights.size();
    const double z = dot(ctx.weights, u.subspan(0, n));
    const double pred =
        ctx.model_kind == ModelKind::kLinearRegression ? z : sigmoid(z);
    const double r = pred - observed;
    double loss = r * r;
    if (grad) {
      const double dpred_dz = ctx.model_kind == ModelKind::kLinearRegression
                                  ? 1.0
                                  : pred * (1.0 - pred);
      for (std::size_t i = 0; i < n; ++i)
        (*grad)[i] = 2.0 * r * dpred_dz * ctx.weights[i];
    }
    if (prior == AttackPrior::kSmoothness && lambda > 0.0) {
      Vec tv_grad(n, 0.0);
      loss += lambda * smooth_tv(u.subspan(0, n), grad ? &tv_grad : nullptr);
      if (grad)
        for (std::size_t i = 0; i < n; ++i) (*grad)[i] += lambda * tv_grad[i];
    }
    return loss;
  }
};

struct DescentRun {
  Vec u;
  double loss = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

// Gradient descent with Armijo backtracking (halving).  Loss is
// non-increasing across accepted iterations by construction.
DescentRun descend(const Objective& obj, Vec u0, const AttackConfig& cfg) {
  DescentRun run;
  run.u = std::move(u0);
  Vec grad(run.u.size());
  run.loss = obj.eval(run.u, &grad);
  for (int it = 0; it < cfg.max_iters; ++it) {
    const double gnorm2 = dot(grad, grad);
    if (std::sqrt(gnorm2) <= cfg.tolerance) {
      run.converged = true;
      break;
    }
    double t = cfg.step_size;
    Vec cand(run.u.size());
    double cand_loss = run.loss;
    bool accepted = false;
    for (int h = 0; h < 48; ++h) {
      for (std::size_t i = 0; i < run.u.size(); ++i)
        cand[i] = run.u[i] - t * grad[i];
      cand_loss = obj.eval(cand, nullptr);
      if (cand_loss <= run.loss - kArmijoC * t * gnorm2) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;  // no admissible step; treat as stationary
    run.u = cand;
    run.loss = obj.eval(run.u, &grad);
    run.iterations = it + 1;
  }
  if (!run.converged) {
    Vec g(run.u.size());
    obj.eval(run.u, &g);
    run.converged = norm2(g) <= cfg.tolerance;
  }
  return run;
}

AttackResult run_restarts(const Objective& obj, const Vec& heuristic_init,
                          std::size_t u_dim, const AttackConfig& cfg) {
  if (!(cfg.tolerance > 0.0))
    throw std::invalid_argument("attack: tolerance must be > 0");
  if (cfg.prior_weight < 0.0)
    throw std::invalid_argument("attack: prior weight must be >= 0");
  RngStream rng(cfg.seed);
  DescentRun best;
  const int n_restarts = std::max(1, cfg.restarts);
  for (int rstart = 0; rstart < n_restarts; ++rstart) {
    Vec u0(u_dim, 0.0);
    if (rstart == 0 && cfg.init) {
      if (cfg.init->size() != u_dim)
        throw std::invalid_argument("attack: init size mismatch");
      u0 = *cfg.init;
    } else if (rstart == 0) {
      u0 = heuristic_init;
    } else {
      RngStream rs = rng.child(rstart);
      for (std::size_t i = 0; i < u_dim; ++i)
        u0[i] = heuristic_init[i] + rs.normal();
    }
    DescentRun run = descend(obj, std::move(u0), cfg);
    if (run.loss < best.loss) best = std::move(run);
  }
  AttackResult res;
  res.recovered = best.u;
  res.final_loss = best.loss;
  res.iterations = best.iterations;
  res.converged = best.converged;
  return res;
}

}  // namespace

AttackResult gradient_inversion(const Vec& observed_gradient,
                                const LinearAttackContext& ctx,
                                const AttackConfig& cfg) {
  const std::size_t n = ctx.weights.size();
  if (observed_gradient.size() != n)
    throw std::invalid_argument("gradient_inversion: gradient dim mismatch");
  if (!all_finite(observed_gradient))
    throw std::invalid_argument("gradient_inversion: non-finite gradient");
  const bool free_label = !ctx.label.has_value();
  const std::size_t u_dim = n + (free_label ? 1 : 0);
  Vec heuristic(u_dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) heuristic[i] = observed_gradient[i];
  GradientMatch obj(observed_gradient, ctx, cfg.prior_weight, cfg.prior);
  return run_restarts(obj, heuristic, u_dim, cfg);
}

AttackResult model_inversion(double observed_output,
                             const LinearAttackContext& ctx,
                             const AttackConfig& cfg) {
  const std::size_t n = ctx.weights.size();
  if (!std::isfinite(observed_output))
    throw std::invalid_argument("model_inversion: non-finite output");
  // Least-norm preimage of the (inverse-linked) output as the first start.
  double z = observed_output;
  if (ctx.model_kind == ModelKind::kLogisticRegression) {
    const double p = std::clamp(observed_output, 1e-9, 1.0 - 1e-9);
    z = std::log(p / (1.0 - p));
  }
  const double wn2 = dot(ctx.weights, ctx.weights);
  Vec heuristic(n, 0.0);
  if (wn2 > 0.0)
    for (std::size_t i = 0; i < n; ++i) heuristic[i] = z * ctx.weights[i] / wn2;
  OutputMatch obj(observed_output, ctx, cfg.prior_weight, cfg.prior);
  return run_restarts(obj, heuristic, n, cfg);
}

SecretKey KeySpace::key_at(std::size_t index) const {
  return he_keygen(params, RngStream(seed).child(index));
}

AttackResult brute_force_key(std::int64_t plaintext, const Ciphertext& c,
                             const KeySpace& keyspace) {
  if (keyspace.count == 0)
    throw std::invalid_argument("brute_force_key: empty key space");
  AttackResult res;
  for (std::size_t i = 0; i < keyspace.count; ++i) {
    const SecretKey key = keyspace.key_at(i);
    ++res.decrypt_calls;
    const HeDecode decode = he_decode_checked(c, key);
    if (decode.consistent && decode.message == plaintext) {
      res.found_key_index = i;
      res.converged = true;
      res.iterations = static_cast<int>(i + 1);
      return res;
    }
  }
  res.iterations = static_cast<int>(keyspace.count);
  res.converged = false;
  return res;
}

PosteriorArgmax attack_as_posterior_argmax(std::span<const double> w_observed,
                                           const CandidateUniverse& universe,
                                           const LikelihoodModel& likelihood) {
  const BeliefDistribution post = posterior(w_observed, universe, likelihood);
  const std::size_t best = post.pmf.argmax();
  const double top = post.pmf[best];
  bool tie = false;
  for (std::size_t i = 0; i < post.pmf.size(); ++i)
    if (i != best && post.pmf[i] >= top - 1e-12) tie = true;
  return {best, tie};
}

}  // namespace nflab

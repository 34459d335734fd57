#include "nflab/belief.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nflab {

CandidateUniverse::CandidateUniverse(std::vector<ClientDataset> cands,
                                     DiscretePMF pr, std::size_t cap)
    : candidates(std::move(cands)), prior(std::move(pr)) {
  if (candidates.size() < 2)
    throw std::invalid_argument("CandidateUniverse: need >= 2 candidates");
  if (candidates.size() > cap)
    throw std::invalid_argument("CandidateUniverse: exceeds candidate cap");
  if (prior.size() != candidates.size())
    throw std::invalid_argument("CandidateUniverse: prior size mismatch");
  for (std::size_t i = 0; i < prior.size(); ++i)
    if (!(prior[i] > 0.0))
      throw std::invalid_argument(
          "CandidateUniverse: prior must be strictly positive");
}

LikelihoodModel::LikelihoodModel(std::vector<Vec> rel, double sigma)
    : releases(std::move(rel)), sigma_obs(sigma) {
  if (releases.empty())
    throw std::invalid_argument("LikelihoodModel: no releases");
  if (!(sigma_obs > 0.0))
    throw std::invalid_argument("LikelihoodModel: sigma_obs must be positive");
  const std::size_t n = releases.front().size();
  for (const auto& r : releases)
    if (r.size() != n)
      throw std::invalid_argument("LikelihoodModel: release dim mismatch");
}

double LikelihoodModel::log_emission(std::size_t candidate,
                                     std::span<const double> w,
                                     bool opaque) const {
  if (opaque) return 0.0;  // constant in the candidate; normalizes away
  const Vec& r = releases.at(candidate);
  if (w.size() != r.size())
    throw std::invalid_argument("log_emission: dimension mismatch");
  constexpr double kLog2Pi = 1.8378770664093454836;
  const double inv2v = 0.5 / (sigma_obs * sigma_obs);
  double lp = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double d = w[i] - r[i];
    lp -= d * d * inv2v;
  }
  lp -= 0.5 * static_cast<double>(w.size()) *
        (kLog2Pi + 2.0 * std::log(sigma_obs));
  return lp;
}

DiscretePMF ReleasedDist::as_pmf() const {
  std::vector<std::string> labels;
  Vec mass;
  labels.reserve(atoms.size());
  mass.reserve(atoms.size());
  for (const auto& a : atoms) {
    labels.push_back(a.label);
    mass.push_back(a.mass);
  }
  return DiscretePMF(std::move(labels), std::move(mass));
}

ReleasedDist ReleasedDist::from_samples(const std::vector<Vec>& samples,
                                        bool opaque) {
  if (samples.empty())
    throw std::invalid_argument("ReleasedDist: empty sample set");
  ReleasedDist d;
  d.atoms.reserve(samples.size());
  const double m = 1.0 / static_cast<double>(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    d.atoms.push_back({samples[i], m, opaque, "s" + std::to_string(i)});
  return d;
}

namespace {

// Log-posterior over candidates, normalized by log-sum-exp.
Vec log_posterior(std::span<const double> w, const CandidateUniverse& uni,
                  const LikelihoodModel& lik, bool opaque) {
  const std::size_t n = uni.size();
  Vec lp(n);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    lp[i] = lik.log_emission(i, w, opaque) + std::log(uni.prior[i]);
    mx = std::max(mx, lp[i]);
  }
  if (!std::isfinite(mx))
    throw std::runtime_error(
        "posterior: all candidate densities vanished; recompute in log space "
        "with better-scaled inputs");
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) z += std::exp(lp[i] - mx);
  const double log_z = mx + std::log(z);
  for (double& v : lp) v -= log_z;
  return lp;
}

DiscretePMF pmf_from_log(const Vec& lp, const CandidateUniverse& uni) {
  Vec mass(lp.size());
  double total = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i) {
    mass[i] = std::exp(lp[i]);
    total += mass[i];
  }
  for (double& m : mass) m /= total;  // exact renormalization
  return DiscretePMF(uni.prior.labels(), std::move(mass));
}

}  // namespace

BeliefDistribution posterior(std::span<const double> w,
                             const CandidateUniverse& universe,
                             const LikelihoodModel& likelihood, bool opaque) {
  const Vec lp = log_posterior(w, universe, likelihood, opaque);
  return {pmf_from_log(lp, universe), BeliefProvenance::kPosteriorGivenW, 1};
}

BeliefDistribution marginal_belief(const ReleasedDist& dist,
                                   const CandidateUniverse& universe,
                                   const LikelihoodModel& likelihood,
                                   BeliefProvenance provenance) {
  if (dist.atoms.empty())
    throw std::invalid_argument("marginal_belief: empty released distribution");
  Vec acc(universe.size(), 0.0);
  for (const auto& atom : dist.atoms) {
    const Vec lp = log_posterior(atom.w, universe, likelihood, atom.opaque);
    for (std::size_t i = 0; i < acc.size(); ++i)
      acc[i] += atom.mass * std::exp(lp[i]);
  }
  double total = 0.0;
  for (double v : acc) total += v;
  for (double& v : acc) v /= total;
  return {DiscretePMF(universe.prior.labels(), std::move(acc)), provenance,
          dist.atoms.size()};
}

BeliefDistribution marginal_belief(const DiagGaussian& dist_over_w,
                                   const CandidateUniverse& universe,
                                   const LikelihoodModel& likelihood,
                                   BeliefProvenance provenance,
                                   std::size_t samples, RngStream stream) {
  if (samples == 0)
    throw std::invalid_argument("marginal_belief: empty sample set");
  std::vector<Vec> draws(samples, Vec(dist_over_w.dim()));
  for (auto& d : draws)
    for (std::size_t i = 0; i < d.size(); ++i)
      d[i] = stream.normal(dist_over_w.mean[i],
                           std::sqrt(dist_over_w.variance[i]));
  return marginal_belief(ReleasedDist::from_samples(draws), universe,
                         likelihood, provenance);
}

double compute_xi(const CandidateUniverse& universe,
                  const LikelihoodModel& likelihood,
                  const std::vector<ReleaseAtom>& w_grid) {
  for (std::size_t i = 0; i < universe.prior.size(); ++i)
    if (!(universe.prior[i] > 0.0))
      throw std::invalid_argument("compute_xi: zero prior entry, xi undefined");
  double xi = 0.0;
  for (const auto& atom : w_grid) {
    const Vec lp = log_posterior(atom.w, universe, likelihood, atom.opaque);
    for (std::size_t i = 0; i < lp.size(); ++i)
      xi = std::max(xi, std::abs(lp[i] - std::log(universe.prior[i])));
  }
  return xi;
}

double bayesian_privacy_leakage(const BeliefDistribution& f_a,
                                const BeliefDistribution& f_b) {
  if (f_a.pmf.size() != f_b.pmf.size())
    throw std::invalid_argument(
        "bayesian_privacy_leakage: universe size mismatch");
  return sqrt_js(f_a.pmf, f_b.pmf);
}

double system_privacy_leakage(const Vec& per_client) {
  if (per_client.empty())
    throw std::invalid_argument("system_privacy_leakage: no clients");
  double s = 0.0;
  for (double v : per_client) s += v;
  return s / static_cast<double>(per_client.size());
}

DpCheckResult dp_epsilon_check(const CandidateUniverse& universe,
                               const LikelihoodModel& likelihood,
                               const std::vector<ReleaseAtom>& w_grid) {
  const double xi = compute_xi(universe, likelihood, w_grid);
  // max over (d, w, w') of |log f(d|w) - log f(d|w')| equals, per candidate,
  // the spread of log posteriors across the grid.
  Vec lo(universe.size(), std::numeric_limits<double>::infinity());
  Vec hi(universe.size(), -std::numeric_limits<double>::infinity());
  for (const auto& atom : w_grid) {
    const Vec lp = log_posterior(atom.w, universe, likelihood, atom.opaque);
    for (std::size_t i = 0; i < lp.size(); ++i) {
      lo[i] = std::min(lo[i], lp[i]);
      hi[i] = std::max(hi[i], lp[i]);
    }
  }
  double ratio = 0.0;
  for (std::size_t i = 0; i < universe.size(); ++i)
    if (std::isfinite(hi[i]) && std::isfinite(lo[i]))
      ratio = std::max(ratio, hi[i] - lo[i]);
  const double bound = 2.0 * xi;
  return {ratio, bound, ratio <= bound + 1e-12};
}

namespace {

double radical_inverse(std::uint64_t n, std::uint64_t base) {
  double inv = 1.0 / static_cast<double>(base);
  double f = inv;
  double r = 0.0;
  while (n > 0) {
    r += f * static_cast<double>(n % base);
    n /= base;
    f *= inv;
  }
  return r;
}

}  // namespace

std::vector<Vec> low_discrepancy_grid(const DiagGaussian& a,
                                      const DiagGaussian& b,
                                      std::size_t size) {
  if (a.dim() != b.dim())
    throw std::invalid_argument("low_discrepancy_grid: dimension mismatch");
  static constexpr std::uint64_t kBases[] = {2, 3, 5, 7, 11, 13, 17, 19};
  const std::size_t dim = a.dim();
  if (dim > std::size(kBases))
    throw std::invalid_argument("low_discrepancy_grid: dimension too large");
  Vec lo(dim), hi(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    const double sa = std::sqrt(a.variance[d]), sb = std::sqrt(b.variance[d]);
    lo[d] = std::min(a.mean[d] - 6.0 * sa, b.mean[d] - 6.0 * sb);
    hi[d] = std::max(a.mean[d] + 6.0 * sa, b.mean[d] + 6.0 * sb);
  }
  std::vector<Vec> grid(size, Vec(dim));
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t d = 0; d < dim; ++d)
      grid[i][d] =
          lo[d] + (hi[d] - lo[d]) * radical_inverse(i + 1, kBases[d]);
  return grid;
}

ReleasedDist discretize_gaussian(const DiagGaussian& g,
                                 const std::vector<Vec>& grid) {
  if (grid.empty())
    throw std::invalid_argument("discretize_gaussian: empty grid");
  ReleasedDist d;
  d.atoms.reserve(grid.size());
  double total = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double w = std::exp(g.log_pdf(grid[i]));
    d.atoms.push_back({grid[i], w, false, "g" + std::to_string(i)});
    total += w;
  }
  if (!(total > 0.0))
    throw std::runtime_error("discretize_gaussian: grid misses the density");
  for (auto& a : d.atoms) a.mass /= total;
  return d;
}

}  // namespace nflab

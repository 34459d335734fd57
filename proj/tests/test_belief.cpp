#include "nflab/belief.hpp"

#include <cmath>

#include "doctest.h"

using namespace nflab;

namespace {

ClientDataset tiny_dataset(double x) {
  return ClientDataset({x}, {0.0}, 1, 1);
}

// Two-candidate universe whose emissions at w = 0 have the requested ratio.
struct TwoCandidate {
  CandidateUniverse universe;
  LikelihoodModel likelihood;

  static TwoCandidate with_ratio(double ratio, double sigma_obs,
                                 Vec prior = {0.5, 0.5}) {
    const double d2 = sigma_obs * std::sqrt(2.0 * std::log(ratio));
    std::vector<ClientDataset> cands{tiny_dataset(0.0), tiny_dataset(1.0)};
    std::vector<Vec> releases{{0.0}, {d2}};
    return {CandidateUniverse(std::move(cands), DiscretePMF(std::move(prior))),
            LikelihoodModel(std::move(releases), sigma_obs)};
  }
};

}  // namespace

TEST_CASE("universe invariants") {
  std::vector<ClientDataset> one{tiny_dataset(0.0)};
  CHECK_THROWS(CandidateUniverse(one, DiscretePMF(Vec{1.0})));
  std::vector<ClientDataset> two{tiny_dataset(0.0), tiny_dataset(1.0)};
  CHECK_THROWS(CandidateUniverse(two, DiscretePMF(Vec{1.0, 0.0})));
  CHECK_THROWS(CandidateUniverse(two, DiscretePMF(Vec{0.5, 0.5}),
                                 /*cap=*/1));
}

TEST_CASE("posterior with uninformative likelihood equals the prior") {
  std::vector<ClientDataset> cands{tiny_dataset(0.0), tiny_dataset(1.0)};
  std::vector<Vec> releases{{0.3}, {0.3}};  // identical emissions
  CandidateUniverse uni(cands, DiscretePMF(Vec{0.25, 0.75}));
  LikelihoodModel lik(releases, 0.1);
  const Vec w = {0.1};
  const BeliefDistribution post = posterior(w, uni, lik);
  CHECK(post.pmf[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(post.pmf[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("posterior matches hand enumeration of Bayes rule") {
  // Likelihood ratio 9:1 with a flat prior gives posterior (0.9, 0.1).
  const TwoCandidate tc = TwoCandidate::with_ratio(9.0, 0.1);
  const Vec w = {0.0};
  const BeliefDistribution post = posterior(w, tc.universe, tc.likelihood);
  CHECK(post.pmf[0] == doctest::Approx(0.9).epsilon(1e-9));
  CHECK(post.pmf[1] == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("posterior concentrates under a near-delta likelihood") {
  const TwoCandidate tc = TwoCandidate::with_ratio(1e9, 0.1);
  const BeliefDistribution post = posterior(Vec{0.0}, tc.universe, tc.likelihood);
  CHECK(post.pmf[0] >= 1.0 - 1e-6);
}

TEST_CASE("posterior argmax equals the brute-force log-score argmax") {
  RngStream rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + trial % 6;
    std::vector<ClientDataset> cands;
    std::vector<Vec> releases;
    Vec prior(n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      cands.push_back(tiny_dataset(static_cast<double>(j)));
      releases.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
      prior[j] = rng.uniform(0.1, 1.0);
      total += prior[j];
    }
    for (double& p : prior) p /= total;
    CandidateUniverse uni(cands, DiscretePMF(prior));
    LikelihoodModel lik(releases, 0.3);
    const Vec w = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};

    std::size_t brute = 0;
    double best = -1e300;
    for (std::size_t j = 0; j < n; ++j) {
      const double score = lik.log_emission(j, w, false) + std::log(prior[j]);
      if (score > best) {
        best = score;
        brute = j;
      }
    }
    CHECK(posterior(w, uni, lik).pmf.argmax() == brute);
  }
}

TEST_CASE("marginal_belief basics") {
  const TwoCandidate tc = TwoCandidate::with_ratio(9.0, 0.1);

  SUBCASE("empty sample set is an error") {
    ReleasedDist empty;
    CHECK_THROWS(marginal_belief(empty, tc.universe, tc.likelihood,
                                 BeliefProvenance::kMarginalProtected));
  }

  SUBCASE("single sample degenerates to the posterior") {
    const ReleasedDist d = ReleasedDist::from_samples({{0.0}});
    const BeliefDistribution m = marginal_belief(
        d, tc.universe, tc.likelihood, BeliefProvenance::kMarginalProtected);
    const BeliefDistribution p = posterior(Vec{0.0}, tc.universe, tc.likelihood);
    CHECK(m.pmf[0] == doctest::Approx(p.pmf[0]).epsilon(1e-14));
  }

  SUBCASE("uninformative likelihood recovers the prior") {
    std::vector<ClientDataset> cands{tiny_dataset(0.0), tiny_dataset(1.0)};
    std::vector<Vec> releases{{0.2}, {0.2}};
    CandidateUniverse uni(cands, DiscretePMF(Vec{0.3, 0.7}));
    LikelihoodModel lik(releases, 0.1);
    const ReleasedDist d = ReleasedDist::from_samples({{0.0}, {0.3}, {-0.2}});
    const BeliefDistribution m =
        marginal_belief(d, uni, lik, BeliefProvenance::kMarginalProtected);
    CHECK(m.pmf[0] == doctest::Approx(0.3).epsilon(1e-12));
  }

  SUBCASE("two equally weighted draws average the posteriors") {
    const Vec w1 = {0.0}, w2 = {0.15};
    const BeliefDistribution p1 = posterior(w1, tc.universe, tc.likelihood);
    const BeliefDistribution p2 = posterior(w2, tc.universe, tc.likelihood);
    const ReleasedDist d = ReleasedDist::from_samples({w1, w2});
    const BeliefDistribution m = marginal_belief(
        d, tc.universe, tc.likelihood, BeliefProvenance::kMarginalProtected);
    CHECK(m.pmf[0] ==
          doctest::Approx(0.5 * (p1.pmf[0] + p2.pmf[0])).epsilon(1e-12));
  }
}

TEST_CASE("marginal_belief is linear in distribution mixtures") {
  const TwoCandidate tc = TwoCandidate::with_ratio(4.0, 0.2);
  RngStream rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    ReleasedDist a, b;
    for (int i = 0; i < 4; ++i) {
      a.atoms.push_back({{rng.uniform(-0.5, 0.5)}, 0.25, false,
                         "a" + std::to_string(i)});
      b.atoms.push_back({{rng.uniform(-0.5, 0.5)}, 0.25, false,
                         "b" + std::to_string(i)});
    }
    const double lambda = rng.uniform01();
    ReleasedDist mix;
    for (const auto& atom : a.atoms)
      mix.atoms.push_back({atom.w, atom.mass * lambda, false, "m" + atom.label});
    for (const auto& atom : b.atoms)
      mix.atoms.push_back(
          {atom.w, atom.mass * (1.0 - lambda), false, "m" + atom.label});

    const auto prov = BeliefProvenance::kMarginalProtected;
    const BeliefDistribution fa = marginal_belief(a, tc.universe, tc.likelihood, prov);
    const BeliefDistribution fb = marginal_belief(b, tc.universe, tc.likelihood, prov);
    const BeliefDistribution fm =
        marginal_belief(mix, tc.universe, tc.likelihood, prov);
    for (std::size_t j = 0; j < 2; ++j)
      CHECK(fm.pmf[j] == doctest::Approx(lambda * fa.pmf[j] +
                                         (1.0 - lambda) * fb.pmf[j])
                             .epsilon(1e-12));
  }
}

TEST_CASE("opaque releases reproduce the prior exactly") {
  const TwoCandidate tc = TwoCandidate::with_ratio(9.0, 0.1);
  ReleasedDist d;
  d.atoms.push_back({{123.0}, 0.5, true, "x0"});
  d.atoms.push_back({{-55.0}, 0.5, true, "x1"});
  const BeliefDistribution m = marginal_belief(
      d, tc.universe, tc.likelihood, BeliefProvenance::kMarginalProtected);
  CHECK(m.pmf[0] == tc.universe.prior[0]);  // bitwise
  CHECK(m.pmf[1] == tc.universe.prior[1]);
  CHECK(bayesian_privacy_leakage(
            m, {tc.universe.prior, BeliefProvenance::kPrior, 0}) == 0.0);
}

TEST_CASE("compute_xi values and refinement monotonicity") {
  SUBCASE("uninformative likelihood gives xi = 0") {
    std::vector<ClientDataset> cands{tiny_dataset(0.0), tiny_dataset(1.0)};
    std::vector<Vec> releases{{0.0}, {0.0}};
    CandidateUniverse uni(cands, DiscretePMF(Vec{0.5, 0.5}));
    LikelihoodModel lik(releases, 0.1);
    std::vector<ReleaseAtom> grid{{{0.2}, 1.0, false, "g0"}};
    CHECK(compute_xi(uni, lik, grid) == doctest::Approx(0.0));
  }

  SUBCASE("posterior (0.9, 0.1) against a flat prior") {
    // Direct formula: max(|ln(0.9/0.5)|, |ln(0.1/0.5)|) = ln 5.
    const TwoCandidate tc = TwoCandidate::with_ratio(9.0, 0.1);
    std::vector<ReleaseAtom> grid{{{0.0}, 1.0, false, "g0"}};
    CHECK(compute_xi(tc.universe, tc.likelihood, grid) ==
          doctest::Approx(std::log(5.0)).epsilon(1e-9));
  }

  SUBCASE("grid refinement can only grow xi") {
    const TwoCandidate tc = TwoCandidate::with_ratio(9.0, 0.1);
    std::vector<ReleaseAtom> coarse, fine;
    for (int i = 0; i < 4; ++i)
      coarse.push_back({{0.05 * i}, 0.25, false, "c" + std::to_string(i)});
    fine = coarse;
    for (int i = 0; i < 8; ++i)
      fine.push_back({{0.02 * i - 0.3}, 0.0, false, "f" + std::to_string(i)});
    CHECK(compute_xi(tc.universe, tc.likelihood, coarse) <=
          compute_xi(tc.universe, tc.likelihood, fine) + 1e-15);
  }
}

TEST_CASE("bayesian privacy leakage") {
  const DiscretePMF flat(Vec{0.5, 0.5});
  BeliefDistribution fb{flat, BeliefProvenance::kPrior, 0};
  SUBCASE("identical beliefs leak nothing") {
    BeliefDistribution fa{flat, BeliefProvenance::kMarginalProtected, 1};
    CHECK(bayesian_privacy_leakage(fa, fb) == doctest::Approx(0.0));
  }
  SUBCASE("disjoint beliefs attain sqrt(ln 2)") {
    BeliefDistribution fa{DiscretePMF(Vec{1.0, 0.0}),
                          BeliefProvenance::kMarginalProtected, 1};
    BeliefDistribution fb2{DiscretePMF(Vec{0.0, 1.0}),
                           BeliefProvenance::kPrior, 0};
    CHECK(bayesian_privacy_leakage(fa, fb2) ==
          doctest::Approx(std::sqrt(std::log(2.0))).epsilon(1e-12));
  }
  SUBCASE("js oracle for (0.9, 0.1) vs (0.5, 0.5)") {
    BeliefDistribution fa{DiscretePMF(Vec{0.9, 0.1}),
                          BeliefProvenance::kMarginalProtected, 1};
    CHECK(bayesian_privacy_leakage(fa, fb) ==
          doctest::Approx(sqrt_js(fa.pmf, flat)).epsilon(1e-15));
    CHECK(bayesian_privacy_leakage(fa, fb) > 0.0);
  }
  SUBCASE("system leakage averages the clients") {
    CHECK(system_privacy_leakage({0.2, 0.4}) == doctest::Approx(0.3));
  }
}

TEST_CASE("dp_epsilon_check bound holds") {
  SUBCASE("uninformative likelihood") {
    std::vector<ClientDataset> cands{tiny_dataset(0.0), tiny_dataset(1.0)};
    std::vector<Vec> releases{{0.0}, {0.0}};
    CandidateUniverse uni(cands, DiscretePMF(Vec{0.5, 0.5}));
    LikelihoodModel lik(releases, 0.1);
    std::vector<ReleaseAtom> grid{{{0.1}, 0.5, false, "g0"},
                                  {{-0.1}, 0.5, false, "g1"}};
    const DpCheckResult r = dp_epsilon_check(uni, lik, grid);
    CHECK(r.max_log_ratio == doctest::Approx(0.0));
    CHECK(r.pass);
  }
  SUBCASE("informative grids stay within 2 xi") {
    RngStream rng(77);
    for (int trial = 0; trial < 30; ++trial) {
      const TwoCandidate tc =
          TwoCandidate::with_ratio(rng.uniform(1.5, 50.0), 0.15);
      std::vector<ReleaseAtom> grid;
      for (int i = 0; i < 16; ++i)
        grid.push_back(
            {{rng.uniform(-0.4, 0.6)}, 1.0 / 16, false, "g" + std::to_string(i)});
      const DpCheckResult r = dp_epsilon_check(tc.universe, tc.likelihood, grid);
      CHECK(r.pass);
      CHECK(r.max_log_ratio <= r.bound + 1e-12);
    }
  }
}

TEST_CASE("low-discrepancy grid covers both distributions deterministically") {
  const DiagGaussian a({0.0, 1.0}, {1.0, 0.5});
  const DiagGaussian b({2.0, 1.0}, {0.2, 2.0});
  const auto grid = low_discrepancy_grid(a, b, 128);
  const auto grid2 = low_discrepancy_grid(a, b, 128);
  CHECK(grid.size() == 128);
  CHECK(grid == grid2);
  for (const auto& p : grid) {
    // Joint box: [min(0-6, 2-6*sqrt(0.2)), max(0+6, 2+6*sqrt(0.2))].
    CHECK(p[0] >= -6.0);
    CHECK(p[0] <= 6.0 + 1e-12);
  }
  const ReleasedDist d = discretize_gaussian(a, grid);
  double total = 0.0;
  for (const auto& atom : d.atoms) total += atom.mass;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

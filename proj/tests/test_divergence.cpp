#include "nflab/divergence.hpp"

#include <cmath>

#include "doctest.h"
#include "nflab/rng.hpp"

using namespace nflab;

namespace {

DiscretePMF make_pmf(Vec mass) { return DiscretePMF(std::move(mass)); }

DiscretePMF random_pmf(RngStream& rng, std::size_t n) {
  Vec m(n);
  double total = 0.0;
  for (double& v : m) {
    v = rng.uniform(0.01, 1.0);
    total += v;
  }
  for (double& v : m) v /= total;
  return DiscretePMF(std::move(m));
}

double gauss_pdf(double x, double mu, double var) {
  return std::exp(-0.5 * (x - mu) * (x - mu) / var) /
         std::sqrt(2.0 * 3.14159265358979323846 * var);
}

}  // namespace

TEST_CASE("tv_discrete basic values") {
  CHECK(tv_discrete(make_pmf({0.5, 0.5}), make_pmf({0.5, 0.5})).value ==
        doctest::Approx(0.0));
  CHECK(tv_discrete(make_pmf({1.0, 0.0}), make_pmf({0.0, 1.0})).value ==
        doctest::Approx(1.0));
  // Hand summation oracle: 0.5 * (|0.8-0.5| + |0.2-0.5|) = 0.3.
  CHECK(tv_discrete(make_pmf({0.8, 0.2}), make_pmf({0.5, 0.5})).value ==
        doctest::Approx(0.3).epsilon(1e-12));
  CHECK(tv_discrete(make_pmf({0.8, 0.2}), make_pmf({0.5, 0.5})).method ==
        DistanceMethod::kExactSum);
}

TEST_CASE("tv_discrete over mismatched supports unions labels") {
  DiscretePMF p({"a", "b"}, {0.7, 0.3});
  DiscretePMF q({"b", "c"}, {0.4, 0.6});
  // union {a,b,c}: 0.5*(0.7 + |0.3-0.4| + 0.6) = 0.7
  CHECK(tv_discrete(p, q).value == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("js_discrete values against the two-term KL oracle") {
  const DiscretePMF p = make_pmf({0.8, 0.2});
  const DiscretePMF q = make_pmf({0.5, 0.5});
  CHECK(js_discrete(p, p).value == doctest::Approx(0.0));
  CHECK(js_discrete(make_pmf({1.0, 0.0}), make_pmf({0.0, 1.0})).value ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  double kl_pm = 0.0, kl_qm = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0) kl_pm += p[i] * std::log(p[i] / m);
    if (q[i] > 0) kl_qm += q[i] * std::log(q[i] / m);
  }
  const double oracle = 0.5 * kl_pm + 0.5 * kl_qm;
  CHECK(js_discrete(p, q).value == doctest::Approx(oracle).epsilon(1e-14));
  CHECK(js_discrete(p, q).value == doctest::Approx(0.0506718).epsilon(1e-5));
}

TEST_CASE("sqrt_js values and metric property") {
  CHECK(sqrt_js(make_pmf({0.3, 0.7}), make_pmf({0.3, 0.7})) ==
        doctest::Approx(0.0));
  CHECK(sqrt_js(make_pmf({1.0, 0.0}), make_pmf({0.0, 1.0})) ==
        doctest::Approx(std::sqrt(std::log(2.0))).epsilon(1e-12));

  RngStream rng(42);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 2 + trial % 15;
    const DiscretePMF p = random_pmf(rng, n);
    const DiscretePMF q = random_pmf(rng, n);
    const DiscretePMF r = random_pmf(rng, n);
    CHECK(sqrt_js(p, r) <= sqrt_js(p, q) + sqrt_js(q, r) + 1e-12);
  }
}

TEST_CASE("divergence symmetry and ranges") {
  RngStream rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + trial % 12;
    const DiscretePMF p = random_pmf(rng, n);
    const DiscretePMF q = random_pmf(rng, n);
    const double tv = tv_discrete(p, q).value;
    const double js = js_discrete(p, q).value;
    CHECK(tv == doctest::Approx(tv_discrete(q, p).value).epsilon(1e-15));
    CHECK(js == doctest::Approx(js_discrete(q, p).value).epsilon(1e-13));
    CHECK(tv >= 0.0);
    CHECK(tv <= 1.0);
    CHECK(js >= 0.0);
    CHECK(js <= std::log(2.0) + 1e-12);
  }
}

TEST_CASE("AM-GM mixture property: p/m <= m/q wherever q > 0") {
  RngStream rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + trial % 10;
    const DiscretePMF p = random_pmf(rng, n);
    const DiscretePMF q = random_pmf(rng, n);
    for (std::size_t i = 0; i < n; ++i) {
      const double m = 0.5 * (p[i] + q[i]);
      CHECK(p[i] * q[i] <= m * m + 1e-15);
    }
  }
}

TEST_CASE("DiscretePMF invariant enforcement") {
  CHECK_THROWS(DiscretePMF(Vec{0.5, 0.6}));
  CHECK_THROWS(DiscretePMF(Vec{-0.1, 1.1}));
  CHECK_THROWS(DiscretePMF({"a", "a"}, {0.5, 0.5}));
  CHECK_NOTHROW(DiscretePMF(Vec{0.0, 1.0}));  // zero-mass labels allowed
}

TEST_CASE("tv_gaussian 1-D closed form and quadrature cross-check") {
  const DiagGaussian g0({0.0}, {1.0});
  CHECK(tv_gaussian(g0, g0).value == doctest::Approx(0.0));

  // Equal variances: 2 Phi(|dmu| / 2 sigma) - 1.
  const DiagGaussian g1({1.0}, {1.0});
  const double closed = 2.0 * std_normal_cdf(0.5) - 1.0;
  CHECK(closed == doctest::Approx(0.382925).epsilon(1e-6));
  CHECK(tv_gaussian(g0, g1).value == doctest::Approx(closed).epsilon(1e-9));

  // Nudge one variance off the closed-form branch to force quadrature.
  const DiagGaussian g1q({1.0}, {1.0 + 1e-7});
  const DistanceResult quad = tv_gaussian(g0, g1q);
  CHECK(quad.method == DistanceMethod::kQuadrature);
  CHECK(quad.value == doctest::Approx(closed).epsilon(1e-6));
}

TEST_CASE("tv_gaussian same-mean sandwich example") {
  const DiagGaussian a({0.0, 0.0}, {1.0, 1.0});
  const DiagGaussian b({0.0, 0.0}, {2.0, 2.0});
  // Eigenvalues of S1^-1 S2 - I are (1, 1): min{1, sqrt(2)} = 1.
  const double tv = tv_gaussian(a, b).value;
  CHECK(tv >= 1.0 / 100.0);
  CHECK(tv <= 3.0 / 2.0);
}

TEST_CASE("tv_gaussian input validation") {
  CHECK_THROWS(DiagGaussian({0.0}, {0.0}));
  CHECK_THROWS(DiagGaussian({0.0}, {-1.0}));
  CHECK_THROWS(
      DiagGaussian({std::numeric_limits<double>::quiet_NaN()}, {1.0}));
  CHECK_THROWS(tv_gaussian(DiagGaussian({0.0}, {1.0}),
                           DiagGaussian({0.0, 0.0}, {1.0, 1.0})));
  // dim > 3 needs an explicit Monte Carlo stream
  const DiagGaussian h1(Vec(4, 0.0), Vec(4, 1.0));
  const DiagGaussian h2(Vec(4, 0.5), Vec(4, 1.0));
  CHECK_THROWS(tv_gaussian(h1, h2));
}

TEST_CASE("tv_gaussian Monte Carlo path agrees with factored 1-D truth") {
  // Distributions differing only in the first coordinate: TV equals the
  // 1-D TV of that coordinate.
  Vec mu1(4, 0.0), mu2(4, 0.0), v(4, 1.0);
  mu2[0] = 1.0;
  const DiagGaussian a(mu1, v), b(mu2, v);
  RngStream rng(123);
  const DistanceResult mc = tv_gaussian(a, b, &rng);
  CHECK(mc.method == DistanceMethod::kMonteCarlo);
  CHECK(mc.error_estimate > 0.0);
  const double truth = 2.0 * std_normal_cdf(0.5) - 1.0;
  CHECK(std::abs(mc.value - truth) <= mc.error_estimate + 1e-3);
}

TEST_CASE("hellinger_h closed form vs quadrature affinity oracle") {
  CHECK(hellinger_h({1.0, 2.0}, {0.5, 0.7}, {1.0, 2.0}, {0.5, 0.7}) ==
        doctest::Approx(0.0));

  // Scalar case mu 0 vs 1, unit variances: independent numerical
  // Bhattacharyya-affinity oracle BC = int sqrt(p q).
  const double bc = adaptive_simpson(
      [](double x) {
        return std::sqrt(gauss_pdf(x, 0.0, 1.0) * gauss_pdf(x, 1.0, 1.0));
      },
      -12.0, 13.0, 1e-12);
  const double oracle = std::sqrt(1.0 - bc);
  CHECK(hellinger_h({0.0}, {1.0}, {1.0}, {1.0}) ==
        doctest::Approx(oracle).epsilon(1e-9));

  CHECK_THROWS(hellinger_h({0.0}, {0.0}, {1.0}, {1.0}));
}

TEST_CASE("hellinger sandwich h^2 <= TV <= sqrt(2) h on random pairs") {
  RngStream rng(99);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t dim = 1 + trial % 2;
    Vec mu1(dim), mu2(dim), v1(dim), v2(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      mu1[i] = rng.uniform(-1.0, 1.0);
      mu2[i] = rng.uniform(-1.0, 1.0);
      v1[i] = rng.uniform(0.3, 3.0);
      v2[i] = rng.uniform(0.3, 3.0);
    }
    const double h = hellinger_h(mu1, v1, mu2, v2);
    const double tv = tv_gaussian(DiagGaussian(mu1, v1), DiagGaussian(mu2, v2))
                          .value;
    CHECK(h * h <= tv + 1e-6);
    CHECK(tv <= std::sqrt(2.0) * h + 1e-6);
  }
}

TEST_CASE("hellinger_suffix is exactly non-increasing") {
  RngStream rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + trial % 6;
    Vec mu1(n), mu2(n), v1(n), v2(n);
    for (std::size_t i = 0; i < n; ++i) {
      mu1[i] = rng.uniform(-2.0, 2.0);
      mu2[i] = rng.uniform(-2.0, 2.0);
      v1[i] = rng.uniform(0.1, 4.0);
      v2[i] = rng.uniform(0.1, 4.0);
    }
    const Vec h = hellinger_suffix(mu1, v1, mu2, v2);
    CHECK(h.back() == 0.0);
    for (std::size_t d = 1; d < h.size(); ++d) CHECK(h[d] <= h[d - 1]);
    CHECK(h.front() == doctest::Approx(hellinger_h(mu1, v1, mu2, v2)));
  }
}

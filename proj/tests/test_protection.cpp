#include "nflab/protection.hpp"

#include <cmath>

#include "doctest.h"
#include "nflab/divergence.hpp"

using namespace nflab;

namespace {

ModelVector mv(Vec w) { return {std::move(w), ModelKind::kLinearRegression}; }

}  // namespace

TEST_CASE("randomize") {
  const ModelVector w = mv({1.0, -2.0});
  SUBCASE("sigma 0 is the identity") {
    RngStream rng(1);
    const ModelVector out = randomize(w, 0.0, rng);
    CHECK(out.weights == w.weights);
  }
  SUBCASE("negative sigma rejected") {
    RngStream rng(1);
    CHECK_THROWS(randomize(w, -0.1, rng));
  }
  SUBCASE("seeded draws are reproducible from the stream") {
    RngStream r1(42), r2(42);
    const ModelVector a = randomize(mv({0.0, 0.0}), 1.0, r1);
    Vec expected = {r2.normal(), r2.normal()};
    CHECK(a.weights == expected);
  }
  SUBCASE("sample moments match over 1e5 draws") {
    const int n = 100000;
    const double sigma = 0.7;
    RngStream rng(9);
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const ModelVector out = randomize(mv({0.0}), sigma, rng);
      sum += out.weights[0];
      sum2 += out.weights[0] * out.weights[0];
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean) <= 3.0 * sigma / std::sqrt(n));
    const double var_se = sigma * sigma * std::sqrt(2.0 / (n - 1));
    CHECK(std::abs(var - sigma * sigma) <= 3.0 * var_se);
  }
}

TEST_CASE("sparsify") {
  SUBCASE("d = n is the identity") {
    RngStream rng(1);
    const ModelVector w = mv({5.0, 7.0});
    const SparsitySpec spec{2, {}, {}};
    CHECK(sparsify(w, spec, rng).weights == w.weights);
  }
  SUBCASE("d = 0 substitutes every coordinate, independent of the input") {
    const SparsitySpec spec{0, {0.0, 0.0}, {1.0, 1.0}};
    RngStream r1(3), r2(3);
    const ModelVector a = sparsify(mv({5.0, 7.0}), spec, r1);
    const ModelVector b = sparsify(mv({-9.0, 2.0}), spec, r2);
    CHECK(a.weights == b.weights);
  }
  SUBCASE("d = 1, n = 2 keeps the head and substitutes a recorded draw") {
    const SparsitySpec spec{1, {0.0}, {1.0}};
    RngStream r1(11), r2(11);
    const ModelVector out = sparsify(mv({5.0, 7.0}), spec, r1);
    CHECK(out.weights[0] == 5.0);
    CHECK(out.weights[1] == r2.normal(0.0, 1.0));
  }
  SUBCASE("size mismatch rejected") {
    RngStream rng(1);
    CHECK_THROWS(sparsify(mv({1.0, 2.0}), SparsitySpec{1, {0.0, 0.0}, {1.0, 1.0}}, rng));
    CHECK_THROWS(sparsify(mv({1.0, 2.0}), SparsitySpec{3, {}, {}}, rng));
  }
}

TEST_CASE("secret sharing reconstructs exactly") {
  SUBCASE("K = 2 scalars 1.0 and 3.0 reconstruct to 4.0 bit-exact") {
    SecretSharingSpec spec;
    spec.delta = {1.5};
    spec.a = {2.0};
    spec.b = {2.0};
    const SecretShareResult r =
        secret_share({mv({1.0}), mv({3.0})}, spec, RngStream(5));
    CHECK(r.reconstructed_sum[0] == 4.0);
    CHECK(r.shares.size() == 2);
    CHECK(r.shares[0].size() == 2);
  }
  SUBCASE("random lattice inputs reconstruct for any K") {
    RngStream rng(21);
    for (int trial = 0; trial < 30; ++trial) {
      const int K = 2 + trial % 4;
      const std::size_t dim = 1 + trial % 3;
      std::vector<ModelVector> models;
      Vec expected(dim, 0.0);
      for (int k = 0; k < K; ++k) {
        Vec w(dim);
        for (double& v : w) v = rng.uniform(-0.4, 0.4);
        w = snap_to_lattice(w, 8);
        for (std::size_t i = 0; i < dim; ++i) expected[i] += w[i];
        models.push_back(mv(w));
      }
      SecretSharingSpec spec;
      spec.delta.assign(dim, 0.5);
      spec.a.assign(dim, 1.0);
      spec.b.assign(dim, 1.0);
      const SecretShareResult r = secret_share(models, spec, rng.child(trial));
      for (std::size_t i = 0; i < dim; ++i)
        CHECK(r.reconstructed_sum[i] == expected[i]);
    }
  }
  SUBCASE("share marginal is uniform on the configured interval") {
    SecretSharingSpec spec;
    spec.delta = {0.5};
    spec.a = {1.0};
    spec.b = {1.0};
    spec.centers = Vec{0.0};
    RngStream rng(33);
    for (int i = 0; i < 2000; ++i) {
      const double v = dequantize_fixed(
          quantize_fixed(rng.uniform(-0.5, 0.5), 8), 8);
      const SecretShareResult r =
          secret_share({mv({v}), mv({0.0})}, spec, rng.child(i));
      for (int j = 0; j < 2; ++j) {
        CHECK(r.shares[0][j][0] >= -1.0 - 1e-12);
        CHECK(r.shares[0][j][0] < 1.0 + 1e-12);
      }
    }
  }
  SUBCASE("overflowing residual throws") {
    SecretSharingSpec spec;
    spec.delta = {0.5};
    spec.a = {1.0};
    spec.b = {1.0};
    spec.centers = Vec{0.0};
    CHECK_THROWS_AS(
        secret_share({mv({1.5}), mv({0.0})}, spec, RngStream(2)),
        SecretShareOverflow);
  }
  SUBCASE("parameter validation") {
    SecretSharingSpec spec;
    spec.delta = {1.0};
    spec.a = {0.5};  // delta >= a
    spec.b = {2.0};
    CHECK_THROWS(secret_share({mv({0.0}), mv({0.0})}, spec, RngStream(1)));
  }
}

TEST_CASE("secret sharing single-share marginal TV matches the closed form") {
  // m = 1, delta = 0.5, a = b = 1: TV = 1 - 2*0.5/2 = 0.5, estimated by a
  // shared-bin histogram over 1e5 draws.
  SecretSharingSpec spec;
  spec.delta = {0.5};
  spec.a = {1.0};
  spec.b = {1.0};
  spec.centers = Vec{0.0};
  CHECK(secret_sharing_marginal_tv(spec) == doctest::Approx(0.5));

  const int n = 100000;
  const int bins = 64;
  Vec ho(bins, 0.0), hs(bins, 0.0);
  RngStream rng(55);
  for (int i = 0; i < n; ++i) {
    const double v =
        dequantize_fixed(quantize_fixed(rng.uniform(-0.5, 0.5), 8), 8);
    const SecretShareResult r =
        secret_share({mv({v}), mv({0.0})}, spec, rng.child(i));
    const double share = r.shares[0][0][0];
    auto bin = [&](double x) {
      int b = static_cast<int>((x + 1.0) / 2.0 * bins);
      return std::min(std::max(b, 0), bins - 1);
    };
    ho[bin(v)] += 1.0 / n;
    hs[bin(share)] += 1.0 / n;
  }
  double tv = 0.0;
  for (int b = 0; b < bins; ++b) tv += std::abs(ho[b] - hs[b]);
  tv *= 0.5;
  CHECK(std::abs(tv - 0.5) <= 0.01);
}

TEST_CASE("mechanism ids") {
  CHECK(mechanism_id(NoOpSpec{}) == "noop");
  CHECK(mechanism_id(RandomizationSpec{0.3}) == "randomization");
  CHECK(mechanism_id(SparsitySpec{1, {0.0}, {1.0}}) == "sparsity");
  CHECK(mechanism_id(ToyHeSpec{HeParams{}, true, 8}) == "toy-he-known-key");
  CHECK(mechanism_id(ToyHeSpec{HeParams{}, false, 8}) == "toy-he-unknown-key");
}

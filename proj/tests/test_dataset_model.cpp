#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "nflab/dataset.hpp"
#include "nflab/model.hpp"

using namespace nflab;

TEST_CASE("local_update hand-computed single step") {
  // Single point (x=1, y=2), w=0, lr=0.5: gradient (w.x - y) x = -2,
  // so one step gives w = 0 - 0.5 * (-2) = 1.
  ClientDataset d({1.0}, {2.0}, 1, 1);
  ModelVector w{{0.0}, ModelKind::kLinearRegression};
  const ModelVector out = local_update(w, d, 1, 0.5);
  CHECK(out.weights[0] == doctest::Approx(1.0).epsilon(1e-15));

  // lr = 0 leaves the model untouched.
  CHECK(local_update(w, d, 1, 0.0).weights[0] == 0.0);
}

TEST_CASE("local_update preconditions and divergence error") {
  ClientDataset d({1.0}, {2.0}, 1, 1);
  ModelVector w{{0.0}, ModelKind::kLinearRegression};
  CHECK_THROWS(local_update(w, d, 0, 0.1));
  CHECK_THROWS_WITH_AS(local_update(w, d, 2000, 1e12),
                       doctest::Contains("diverged at step"),
                       std::runtime_error);
}

TEST_CASE("gradient descent is non-increasing below the Lipschitz step") {
  RngStream rng(3);
  ClientDataset d = generate_dataset(DataGenSpec{"linear", 30, 2}, 0, rng);
  // Lipschitz constant of the gradient: largest eigenvalue of (1/m) X^T X,
  // computed via the closed form for the 2x2 Gram matrix.
  double a = 0, b = 0, c = 0;
  for (std::size_t r = 0; r < d.rows; ++r) {
    const auto x = d.row(r);
    a += x[0] * x[0];
    b += x[0] * x[1];
    c += x[1] * x[1];
  }
  a /= d.rows;
  b /= d.rows;
  c /= d.rows;
  const double lmax =
      0.5 * (a + c) + std::sqrt(0.25 * (a - c) * (a - c) + b * b);
  const double lr = 0.9 / lmax;

  ModelVector w{{2.0, -2.0}, ModelKind::kLinearRegression};
  double prev = training_loss(w, d);
  for (int s = 0; s < 50; ++s) {
    w = local_update(w, d, 1, lr);
    const double cur = training_loss(w, d);
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
}

TEST_CASE("fedavg_aggregate") {
  ModelVector a{{0.0, 0.0}, ModelKind::kLinearRegression};
  ModelVector b{{2.0, 4.0}, ModelKind::kLinearRegression};
  SUBCASE("identical models") {
    const ModelVector m = fedavg_aggregate({a, a, a});
    CHECK(m.weights == a.weights);
  }
  SUBCASE("midpoint") {
    const ModelVector m = fedavg_aggregate({a, b});
    CHECK(m.weights[0] == doctest::Approx(1.0));
    CHECK(m.weights[1] == doctest::Approx(2.0));
  }
  SUBCASE("matches direct summation oracle and permutation invariance") {
    RngStream rng(17);
    std::vector<ModelVector> ms;
    for (int k = 0; k < 3; ++k) {
      ModelVector m{{rng.normal(), rng.normal()}, ModelKind::kLinearRegression};
      ms.push_back(m);
    }
    Vec oracle(2, 0.0);
    for (const auto& m : ms)
      for (int i = 0; i < 2; ++i) oracle[i] += m.weights[i] / 3.0;
    const ModelVector got = fedavg_aggregate(ms);
    CHECK(got.weights[0] == doctest::Approx(oracle[0]).epsilon(1e-15));
    CHECK(got.weights[1] == doctest::Approx(oracle[1]).epsilon(1e-15));
    std::swap(ms[0], ms[2]);
    const ModelVector perm = fedavg_aggregate(ms);
    CHECK(perm.weights[0] == doctest::Approx(got.weights[0]).epsilon(1e-15));
  }
  SUBCASE("dimension mismatch") {
    ModelVector bad{{1.0}, ModelKind::kLinearRegression};
    CHECK_THROWS(fedavg_aggregate({a, bad}));
    CHECK_THROWS(fedavg_aggregate({}));
  }
}

TEST_CASE("utility values") {
  UtilitySpec acc{"accuracy", 4.0};
  // Perfectly separated blob data with the separating weight vector.
  ClientDataset d({1.0, -1.0}, {1.0, 0.0}, 2, 1);
  ModelVector good{{5.0}, ModelKind::kLogisticRegression};
  CHECK(utility(good, d, acc) == doctest::Approx(1.0));
  ModelVector bad{{-5.0}, ModelKind::kLogisticRegression};
  CHECK(utility(bad, d, acc) == doctest::Approx(0.0));

  // Residual oracle: w=0 on (x=1,y=1),(x=1,y=-1) gives MSE = 1; tau = 4.
  UtilitySpec reg{"clipped-regression", 4.0};
  ClientDataset r({1.0, 1.0}, {1.0, -1.0}, 2, 1);
  ModelVector w0{{0.0}, ModelKind::kLinearRegression};
  CHECK(utility(w0, r, reg) == doctest::Approx(1.0 - 1.0 / 4.0));
  // Clipping keeps the value in [0, 1].
  ModelVector far{{100.0}, ModelKind::kLinearRegression};
  CHECK(utility(far, r, reg) == doctest::Approx(0.0));
}

TEST_CASE("dataset generation is deterministic per stream") {
  DataGenSpec spec{"linear", 25, 3};
  const ClientDataset a = generate_dataset(spec, 1, RngStream(5).child(9));
  const ClientDataset b = generate_dataset(spec, 1, RngStream(5).child(9));
  CHECK(a.features == b.features);
  CHECK(a.targets == b.targets);
  const ClientDataset c = generate_dataset(spec, 1, RngStream(5).child(10));
  CHECK(a.features != c.features);
}

TEST_CASE("cluster generator labels are 0/1 and separated") {
  DataGenSpec spec{"clusters", 200, 2, {1.0, 0.0}, 0.1, 2.0};
  const ClientDataset d = generate_dataset(spec, 0, RngStream(2));
  int ones = 0;
  for (std::size_t r = 0; r < d.rows; ++r) {
    CHECK((d.targets[r] == 0.0 || d.targets[r] == 1.0));
    if (d.targets[r] == 1.0) {
      CHECK(d.row(r)[0] > 0.0);
      ++ones;
    }
  }
  CHECK(ones > 50);
  CHECK(ones < 150);
}

TEST_CASE("csv import round trip") {
  const char* path = "test_dataset_tmp.csv";
  {
    std::ofstream out(path);
    out << "x0,x1,y\n1.0,2.0,3.0\n4.0,5.0,6.0\n";
  }
  const ClientDataset d = load_csv_dataset(path, 2);
  CHECK(d.rows == 2);
  CHECK(d.cols == 2);
  CHECK(d.features == Vec{1.0, 2.0, 4.0, 5.0});
  CHECK(d.targets == Vec{3.0, 6.0});
  CHECK(d.client_id == 2);
  std::remove(path);
  CHECK_THROWS(load_csv_dataset("does_not_exist.csv", 0));
}

TEST_CASE("bootstrap_rows preserves shape and draws from the source rows") {
  RngStream rng(8);
  const ClientDataset base = generate_dataset(DataGenSpec{"linear", 10, 2}, 0, rng);
  const ClientDataset boot = bootstrap_rows(base, rng.child(1));
  CHECK(boot.rows == base.rows);
  CHECK(boot.cols == base.cols);
  for (std::size_t r = 0; r < boot.rows; ++r) {
    bool found = false;
    for (std::size_t s = 0; s < base.rows; ++s)
      if (std::equal(boot.row(r).begin(), boot.row(r).end(),
                     base.row(s).begin()))
        found = true;
    CHECK(found);
  }
}

#include "nflab/model.hpp"

#include <cmath>
#include <stdexcept>

namespace nflab {

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "linear" || s == "linear-regression") return ModelKind::kLinearRegression;
  if (s == "logistic" || s == "logistic-regression")
    return ModelKind::kLogisticRegression;
  throw std::invalid_argument("unknown model kind '" + s + "'");
}

std::string to_string(ModelKind k) {
  return k == ModelKind::kLinearRegression ? "linear-regression"
                                           : "logistic-regression";
}

double sigmoid(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double training_loss(const ModelVector& w, const ClientDataset& data) {
  if (w.dim() != data.cols)
    throw std::invalid_argument("training_loss: weight/feature dim mismatch");
  double total = 0.0;
  for (std::size_t r = 0; r < data.rows; ++r) {
    const double z = dot(w.weights, data.row(r));
    if (w.kind == ModelKind::kLinearRegression) {
      const double e = z - data.targets[r];
      total += 0.5 * e * e;
    } else {
      // Numerically stable -y*log(s) - (1-y)*log(1-s).
      const double y = data.targets[r];
      total += std::max(z, 0.0) - y * z + std::log1p(std::exp(-std::abs(z)));
    }
  }
  return total / static_cast<double>(data.rows);
}

Vec loss_gradient(const ModelVector& w, const ClientDataset& data) {
  if (w.dim() != data.cols)
    throw std::invalid_argument("loss_gradient: weight/feature dim mismatch");
  Vec g(w.dim(), 0.0);
  for (std::size_t r = 0; r < data.rows; ++r) {
    const auto x = data.row(r);
    const double z = dot(w.weights, x);
    const double resid = (w.kind == ModelKind::kLinearRegression)
                             ? z - data.targets[r]
                             : sigmoid(z) - data.targets[r];
    for (std::size_t c = 0; c < w.dim(); ++c) g[c] += resid * x[c];
  }
  for (double& v : g) v /= static_cast<double>(data.rows);
  return g;
}

ModelVector local_update(const ModelVector& w, const ClientDataset& data,
                         int steps, double lr) {
  if (steps < 1) throw std::invalid_argument("local_update: steps must be >= 1");
  if (lr < 0.0) throw std::invalid_argument("local_update: lr must be >= 0");
  ModelVector cur = w;
  for (int s = 0; s < steps; ++s) {
    const Vec g = loss_gradient(cur, data);
    for (std::size_t i = 0; i < cur.dim(); ++i) cur.weights[i] -= lr * g[i];
    if (!all_finite(cur.weights))
      throw std::runtime_error("local_update: diverged at step " +
                               std::to_string(s));
  }
  return cur;
}

ModelVector fedavg_aggregate(const std::vector<ModelVector>& models) {
  if (models.empty())
    throw std::invalid_argument("fedavg_aggregate: empty model list");
  const std::size_t n = models.front().dim();
  ModelVector out{Vec(n, 0.0), models.front().kind};
  for (const auto& m : models) {
    if (m.dim() != n)
      throw std::invalid_argument("fedavg_aggregate: dimension mismatch");
    for (std::size_t i = 0; i < n; ++i) out.weights[i] += m.weights[i];
  }
  for (double& v : out.weights) v /= static_cast<double>(models.size());
  return out;
}

double utility(const ModelVector& w, const ClientDataset& data,
               const UtilitySpec& spec) {
  if (spec.kind == "accuracy") {
    std::size_t correct = 0;
    for (std::size_t r = 0; r < data.rows; ++r) {
      const double p = sigmoid(dot(w.weights, data.row(r)));
      const int pred = p >= 0.5 ? 1 : 0;
      if (pred == static_cast<int>(data.targets[r])) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.rows);
  }
  if (spec.kind == "clipped-regression") {
    if (!(spec.tau > 0.0))
      throw std::invalid_argument("utility: tau must be positive");
    double mse = 0.0;
    for (std::size_t r = 0; r < data.rows; ++r) {
      const double e = dot(w.weights, data.row(r)) - data.targets[r];
      mse += e * e;
    }
    mse /= static_cast<double>(data.rows);
    return 1.0 - std::min(1.0, mse / spec.tau);
  }
  throw std::invalid_argument("utility: unknown kind '" + spec.kind + "'");
}

}  // namespace nflab

#pragma once

#include <string>

#include "nflab/dataset.hpp"
#include "nflab/linalg.hpp"

namespace nflab {

enum class ModelKind { kLinearRegression, kLogisticRegression };

ModelKind model_kind_from_string(const std::string& s);
std::string to_string(ModelKind k);

/// Model weights in parameter units.  Dimension equals the feature
/// dimension (no separate bias term; append a constant feature column if a
/// bias is wanted).
struct ModelVector {
  Vec weights;
  ModelKind kind = ModelKind::kLinearRegression;

  std::size_t dim() const { return weights.size(); }
};

/// Mean training loss: 0.5 * mean (w.x - y)^2 for linear regression,
/// mean log-loss for logistic regression.
double training_loss(const ModelVector& w, const ClientDataset& data);

/// Analytic full-batch gradient of training_loss with respect to w.
Vec loss_gradient(const ModelVector& w, const ClientDataset& data);

/// Deterministic full-batch gradient descent, `steps` steps of size `lr`.
/// Throws (naming the step) if the iterate leaves the finite range.
ModelVector local_update(const ModelVector& w, const ClientDataset& data,
                         int steps, double lr);

/// Coordinate-wise arithmetic mean of the client models.
ModelVector fedavg_aggregate(const std::vector<ModelVector>& models);

/// Utility specification.  "accuracy" for classifiers; "clipped-regression"
/// gives 1 - min(1, MSE/tau).  Either way U in [0, 1], so C4 = 1.
struct UtilitySpec {
  std::string kind = "clipped-regression";  // accuracy | clipped-regression
  double tau = 4.0;
};

/// Model utility on a dataset, always in [0, 1].
double utility(const ModelVector& w, const ClientDataset& data,
               const UtilitySpec& spec);

double sigmoid(double z);

}  // namespace nflab

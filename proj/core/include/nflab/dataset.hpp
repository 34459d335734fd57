#pragma once

#include <cstddef>
#include <string>

#include "nflab/linalg.hpp"
#include "nflab/rng.hpp"

namespace nflab {

/// One client's private dataset: row-major feature matrix plus a target
/// vector (real targets for regression, 0/1 labels for classification).
struct ClientDataset {
  Vec features;  // rows * cols, row-major
  Vec targets;   // rows
  std::size_t rows = 0;
  std::size_t cols = 0;
  int client_id = 0;

  ClientDataset() = default;
  ClientDataset(Vec feats, Vec targs, std::size_t n_rows, std::size_t n_cols,
                int id = 0);

  std::span<const double> row(std::size_t r) const {
    return {features.data() + r * cols, cols};
  }
};

/// Synthetic generator spec.  "linear": y = w_true . x + noise;
/// "clusters": two Gaussian blobs at +-separation/2 along w_true, labels 0/1.
struct DataGenSpec {
  std::string kind = "linear";  // linear | clusters
  std::size_t samples = 40;
  std::size_t dim = 2;
  Vec true_weights;        // defaults to alternating +-0.3 if empty
  double noise = 0.1;      // target noise (linear) / blob stddev (clusters)
  double separation = 2.0; // cluster center distance (clusters)
};

ClientDataset generate_dataset(const DataGenSpec& spec, int client_id,
                               RngStream stream);

/// Resample rows with replacement (bootstrap draw from the empirical
/// distribution); used when per-trial data variation is wanted for an
/// imported dataset.
ClientDataset bootstrap_rows(const ClientDataset& d, RngStream stream);

/// CSV import: header row names feature columns then the target column;
/// one sample per subsequent row.
ClientDataset load_csv_dataset(const std::string& path, int client_id);

}  // namespace nflab

#include "nflab/dataset.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nflab {

ClientDataset::ClientDataset(Vec feats, Vec targs, std::size_t n_rows,
                             std::size_t n_cols, int id)
    : features(std::move(feats)),
      targets(std::move(targs)),
      rows(n_rows),
      cols(n_cols),
      client_id(id) {
  if (rows == 0) throw std::invalid_argument("ClientDataset: needs >= 1 sample");
  if (features.size() != rows * cols)
    throw std::invalid_argument("ClientDataset: feature size mismatch");
  if (targets.size() != rows)
    throw std::invalid_argument("ClientDataset: target/row count mismatch");
  if (!all_finite(features) || !all_finite(targets))
    throw std::invalid_argument("ClientDataset: non-finite value");
}

ClientDataset generate_dataset(const DataGenSpec& spec, int client_id,
                               RngStream stream) {
  Vec w = spec.true_weights;
  if (w.empty()) {
    w.resize(spec.dim);
    for (std::size_t i = 0; i < spec.dim; ++i) w[i] = (i % 2 == 0) ? 0.3 : -0.3;
  }
  if (w.size() != spec.dim)
    throw std::invalid_argument("generate_dataset: true_weights dim mismatch");

  Vec feats(spec.samples * spec.dim);
  Vec targs(spec.samples);
  if (spec.kind == "linear") {
    for (std::size_t r = 0; r < spec.samples; ++r) {
      double y = 0.0;
      for (std::size_t c = 0; c < spec.dim; ++c) {
        const double x = stream.normal();
        feats[r * spec.dim + c] = x;
        y += w[c] * x;
      }
      targs[r] = y + spec.noise * stream.normal();
    }
  } else if (spec.kind == "clusters") {
    const double wn = norm2(w);
    for (std::size_t r = 0; r < spec.samples; ++r) {
      const int label = (stream.uniform01() < 0.5) ? 0 : 1;
      const double side = label == 1 ? 0.5 : -0.5;
      for (std::size_t c = 0; c < spec.dim; ++c) {
        const double center = spec.separation * side * w[c] / (wn > 0 ? wn : 1.0);
        feats[r * spec.dim + c] = center + spec.noise * stream.normal();
      }
      targs[r] = label;
    }
  } else {
    throw std::invalid_argument("generate_dataset: unknown kind '" + spec.kind +
                                "'");
  }
  return ClientDataset(std::move(feats), std::move(targs), spec.samples,
                       spec.dim, client_id);
}

ClientDataset bootstrap_rows(const ClientDataset& d, RngStream stream) {
  Vec feats(d.rows * d.cols), targs(d.rows);
  for (std::size_t r = 0; r < d.rows; ++r) {
    const auto src = static_cast<std::size_t>(
        stream.uniform_int(0, static_cast<std::int64_t>(d.rows) - 1));
    for (std::size_t c = 0; c < d.cols; ++c)
      feats[r * d.cols + c] = d.features[src * d.cols + c];
    targs[r] = d.targets[src];
  }
  return ClientDataset(std::move(feats), std::move(targs), d.rows, d.cols,
                       d.client_id);
}

ClientDataset load_csv_dataset(const std::string& path, int client_id) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv_dataset: cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("load_csv_dataset: empty file " + path);
  std::size_t n_cols_total = 1;
  for (char c : line)
    if (c == ',') ++n_cols_total;
  if (n_cols_total < 2)
    throw std::runtime_error("load_csv_dataset: need >= 1 feature + target");
  const std::size_t dim = n_cols_total - 1;

  Vec feats, targs;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      const double v = std::stod(cell);
      if (col < dim)
        feats.push_back(v);
      else
        targs.push_back(v);
      ++col;
    }
    if (col != n_cols_total)
      throw std::runtime_error("load_csv_dataset: ragged row in " + path);
    ++rows;
  }
  return ClientDataset(std::move(feats), std::move(targs), rows, dim, client_id);
}

}  // namespace nflab

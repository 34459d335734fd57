#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace nflab {

using Vec = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("sq_dist: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline bool all_finite(std::span<const double> a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

/// Coordinate-wise mean of equally sized vectors.
inline Vec mean_of(const std::vector<Vec>& vs) {
  if (vs.empty()) throw std::invalid_argument("mean_of: empty input");
  const std::size_t n = vs.front().size();
  Vec out(n, 0.0);
  for (const auto& v : vs) {
    if (v.size() != n) throw std::invalid_argument("mean_of: dimension mismatch");
    for (std::size_t i = 0; i < n; ++i) out[i] += v[i];
  }
  for (double& x : out) x /= static_cast<double>(vs.size());
  return out;
}

/// Sample mean and unbiased variance per coordinate over a list of vectors.
struct MomentFit {
  Vec mean;
  Vec variance;  // Bessel-corrected
};

inline MomentFit fit_moments(const std::vector<Vec>& vs) {
  if (vs.size() < 2) throw std::invalid_argument("fit_moments: need >= 2 samples");
  const std::size_t n = vs.front().size();
  MomentFit f{Vec(n, 0.0), Vec(n, 0.0)};
  f.mean = mean_of(vs);
  for (const auto& v : vs)
    for (std::size_t i = 0; i < n; ++i) {
      const double d = v[i] - f.mean[i];
      f.variance[i] += d * d;
    }
  for (double& x : f.variance) x /= static_cast<double>(vs.size() - 1);
  return f;
}

}  // namespace nflab

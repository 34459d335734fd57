#include "nflab/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <unordered_map>

namespace nflab {

namespace {

constexpr double kMassTol = 1e-12;

double xlogx_over(double x, double m) {
  // x * log(x/m) with the 0 log 0 := 0 convention.
  if (x <= 0.0) return 0.0;
  return x * std::log(x / m);
}

}  // namespace

DiscretePMF::DiscretePMF(std::vector<std::string> labels, Vec mass)
    : labels_(std::move(labels)), mass_(std::move(mass)) {
  validate();
}

DiscretePMF::DiscretePMF(Vec mass) : mass_(std::move(mass)) {
  labels_.reserve(mass_.size());
  for (std::size_t i = 0; i < mass_.size(); ++i)
    labels_.push_back(std::to_string(i));
  validate();
}

void DiscretePMF::validate() const {
  if (labels_.size() != mass_.size())
    throw std::invalid_argument("DiscretePMF: label/mass size mismatch");
  double total = 0.0;
  for (double m : mass_) {
    if (!(m >= 0.0))
      throw std::invalid_argument("DiscretePMF: negative or NaN mass");
    total += m;
  }
  if (std::abs(total - 1.0) > kMassTol)
    throw std::invalid_argument("DiscretePMF: masses sum to " +
                                std::to_string(total) + ", expected 1");
  std::unordered_map<std::string, int> seen;
  for (const auto& l : labels_)
    if (++seen[l] > 1)
      throw std::invalid_argument("DiscretePMF: duplicate label '" + l + "'");
}

std::size_t DiscretePMF::argmax() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < mass_.size(); ++i)
    if (mass_[i] > mass_[best]) best = i;
  return best;
}

std::pair<DiscretePMF, DiscretePMF> DiscretePMF::aligned(const DiscretePMF& p,
                                                         const DiscretePMF& q) {
  std::vector<std::string> labels = p.labels_;
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(labels.size() + q.size());
  for (std::size_t i = 0; i < labels.size(); ++i) index[labels[i]] = i;
  for (const auto& l : q.labels_)
    if (index.find(l) == index.end()) {
      index[l] = labels.size();
      labels.push_back(l);
    }
  Vec pm(labels.size(), 0.0), qm(labels.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) pm[i] = p.mass_[i];
  for (std::size_t i = 0; i < q.size(); ++i) qm[index.at(q.labels_[i])] = q.mass_[i];
  DiscretePMF pal(labels, std::move(pm));
  DiscretePMF qal(std::move(labels), std::move(qm));
  return {std::move(pal), std::move(qal)};
}

DistanceResult tv_discrete(const DiscretePMF& p, const DiscretePMF& q) {
  auto [pa, qa] = DiscretePMF::aligned(p, q);
  double s = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) s += std::abs(pa[i] - qa[i]);
  return {0.5 * s, DistanceMethod::kExactSum, 0.0};
}

DistanceResult js_discrete(const DiscretePMF& p, const DiscretePMF& q) {
  auto [pa, qa] = DiscretePMF::aligned(p, q);
  double js = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double m = 0.5 * (pa[i] + qa[i]);
    if (m <= 0.0) continue;
    js += 0.5 * xlogx_over(pa[i], m) + 0.5 * xlogx_over(qa[i], m);
  }
  // Clamp the tiny negative that float cancellation can produce at P == Q.
  return {std::max(js, 0.0), DistanceMethod::kExactSum, 0.0};
}

double sqrt_js(const DiscretePMF& p, const DiscretePMF& q) {
  return std::sqrt(js_discrete(p, q).value);
}

DiagGaussian::DiagGaussian(Vec mu, Vec var)
    : mean(std::move(mu)), variance(std::move(var)) {
  if (mean.size() != variance.size())
    throw std::invalid_argument("DiagGaussian: dimension mismatch");
  if (!all_finite(mean) || !all_finite(variance))
    throw std::invalid_argument("DiagGaussian: non-finite parameter");
  for (double v : variance)
    if (!(v > 0.0))
      throw std::invalid_argument("DiagGaussian: variance must be positive");
}

double DiagGaussian::log_pdf(std::span<const double> x) const {
  if (x.size() != mean.size())
    throw std::invalid_argument("DiagGaussian::log_pdf: dimension mismatch");
  constexpr double kLog2Pi = 1.8378770664093454836;
  double lp = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mean[i];
    lp += -0.5 * (kLog2Pi + std::log(variance[i]) + d * d / variance[i]);
  }
  return lp;
}

double std_normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

namespace {

double simpson_rec(const std::function<double(double)>& f, double a, double b,
                   double fa, double fm, double fb, double whole, double tol,
                   int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double tol) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48);
}

namespace {

struct Box {
  Vec lo, hi;
};

// Joint +-10 sigma box of both Gaussians.
Box joint_box(const DiagGaussian& g1, const DiagGaussian& g2) {
  const std::size_t n = g1.dim();
  Box b{Vec(n), Vec(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const double s1 = std::sqrt(g1.variance[i]);
    const double s2 = std::sqrt(g2.variance[i]);
    b.lo[i] = std::min(g1.mean[i] - 10.0 * s1, g2.mean[i] - 10.0 * s2);
    b.hi[i] = std::max(g1.mean[i] + 10.0 * s1, g2.mean[i] + 10.0 * s2);
  }
  return b;
}

// Composite Simpson over a tensor grid with pts nodes per dimension
// (pts odd).  Integrand: 0.5 * |p - q|.
double tensor_simpson_tv(const DiagGaussian& g1, const DiagGaussian& g2,
                         const Box& box, int pts) {
  const std::size_t dim = g1.dim();
  std::vector<Vec> nodes(dim), weights(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    nodes[d].resize(pts);
    weights[d].resize(pts);
    const double h = (box.hi[d] - box.lo[d]) / (pts - 1);
    for (int i = 0; i < pts; ++i) {
      nodes[d][i] = box.lo[d] + h * i;
      double w = (i == 0 || i == pts - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      weights[d][i] = w * h / 3.0;
    }
  }
  Vec x(dim);
  std::vector<int> idx(dim, 0);
  double total = 0.0;
  while (true) {
    double w = 1.0;
    for (std::size_t d = 0; d < dim; ++d) {
      x[d] = nodes[d][idx[d]];
      w *= weights[d][idx[d]];
    }
    total += w * 0.5 * std::abs(std::exp(g1.log_pdf(x)) - std::exp(g2.log_pdf(x)));
    std::size_t d = 0;
    while (d < dim && ++idx[d] == pts) {
      idx[d] = 0;
      ++d;
    }
    if (d == dim) break;
  }
  return total;
}

}  // namespace

DistanceResult tv_gaussian(const DiagGaussian& g1, const DiagGaussian& g2,
                           RngStream* mc_stream) {
  if (g1.dim() != g2.dim())
    throw std::invalid_argument("tv_gaussian: dimension mismatch");
  const std::size_t dim = g1.dim();
  if (dim == 0) throw std::invalid_argument("tv_gaussian: empty distributions");

  if (g1.mean == g2.mean && g1.variance == g2.variance)
    return {0.0, DistanceMethod::kQuadrature, 0.0};

  if (dim == 1) {
    const double v1 = g1.variance[0], v2 = g2.variance[0];
    if (std::abs(v1 - v2) <= 1e-14 * std::max(v1, v2)) {
      const double sigma = std::sqrt(v1);
      const double z = std::abs(g1.mean[0] - g2.mean[0]) / (2.0 * sigma);
      return {2.0 * std_normal_cdf(z) - 1.0, DistanceMethod::kQuadrature, 0.0};
    }
    const Box box = joint_box(g1, g2);
    auto integrand = [&](double t) {
      const double x[1] = {t};
      return 0.5 * std::abs(std::exp(g1.log_pdf(x)) - std::exp(g2.log_pdf(x)));
    };
    const double v = adaptive_simpson(integrand, box.lo[0], box.hi[0], 1e-9);
    return {std::clamp(v, 0.0, 1.0), DistanceMethod::kQuadrature, 1e-9};
  }

  if (dim <= 3) {
    const Box box = joint_box(g1, g2);
    const int pts = dim == 2 ? 257 : 65;
    const double fine = tensor_simpson_tv(g1, g2, box, pts);
    const double coarse = tensor_simpson_tv(g1, g2, box, (pts - 1) / 2 + 1);
    return {std::clamp(fine, 0.0, 1.0), DistanceMethod::kQuadrature,
            std::abs(fine - coarse)};
  }

  if (mc_stream == nullptr)
    throw std::invalid_argument(
        "tv_gaussian: dim > 3 requires an explicit Monte Carlo stream");
  constexpr int kSamples = 1 << 17;
  // TV = P(A) - Q(A) on A = {p > q}; estimate both sides from seeded draws.
  auto indicator_mean = [&](const DiagGaussian& from) {
    int hits = 0;
    Vec x(dim);
    for (int s = 0; s < kSamples; ++s) {
      for (std::size_t d = 0; d < dim; ++d)
        x[d] = mc_stream->normal(from.mean[d], std::sqrt(from.variance[d]));
      if (g1.log_pdf(x) > g2.log_pdf(x)) ++hits;
    }
    return static_cast<double>(hits) / kSamples;
  };
  const double a = indicator_mean(g1);
  const double b = indicator_mean(g2);
  const double se =
      std::sqrt(a * (1.0 - a) / kSamples + b * (1.0 - b) / kSamples);
  return {std::clamp(a - b, 0.0, 1.0), DistanceMethod::kMonteCarlo, 3.0 * se};
}

namespace {

// Per-coordinate log Bhattacharyya-style factor; <= 0 in exact arithmetic,
// clamped so that suffix sums stay monotone in floating point.
double h_log_term(double mu1, double v1, double mu2, double v2) {
  if (!(v1 > 0.0) || !(v2 > 0.0))
    throw std::invalid_argument("hellinger_h: variance must be positive");
  const double avg = 0.5 * (v1 + v2);
  const double dmu = mu1 - mu2;
  const double t = 0.25 * std::log(v1) + 0.25 * std::log(v2) -
                   0.5 * std::log(avg) - 0.125 * dmu * dmu / avg;
  return std::min(t, 0.0);
}

}  // namespace

double hellinger_h(const Vec& mu1, const Vec& var1, const Vec& mu2,
                   const Vec& var2) {
  if (mu1.size() != var1.size() || mu2.size() != var2.size() ||
      mu1.size() != mu2.size())
    throw std::invalid_argument("hellinger_h: dimension mismatch");
  double log_bc = 0.0;
  for (std::size_t i = 0; i < mu1.size(); ++i)
    log_bc += h_log_term(mu1[i], var1[i], mu2[i], var2[i]);
  return std::sqrt(std::max(0.0, 1.0 - std::exp(log_bc)));
}

Vec hellinger_suffix(const Vec& mu1, const Vec& var1, const Vec& mu2,
                     const Vec& var2) {
  const std::size_t n = mu1.size();
  if (var1.size() != n || mu2.size() != n || var2.size() != n)
    throw std::invalid_argument("hellinger_suffix: dimension mismatch");
  Vec h(n + 1);
  double log_bc = 0.0;
  h[n] = 0.0;  // empty suffix: identical distributions
  for (std::size_t d = n; d-- > 0;) {
    log_bc += h_log_term(mu1[d], var1[d], mu2[d], var2[d]);
    h[d] = std::sqrt(std::max(0.0, 1.0 - std::exp(log_bc)));
  }
  return h;
}

}  // namespace nflab

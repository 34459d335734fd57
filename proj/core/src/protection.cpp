#include "nflab/protection.hpp"

#include <cmath>
#include <stdexcept>

namespace nflab {

std::string mechanism_id(const MechanismSpec& spec) {
  struct Visitor {
    std::string operator()(const NoOpSpec&) const { return "noop"; }
    std::string operator()(const RandomizationSpec&) const {
      return "randomization";
    }
    std::string operator()(const SparsitySpec&) const { return "sparsity"; }
    std::string operator()(const SecretSharingSpec&) const {
      return "secret-sharing";
    }
    std::string operator()(const ToyHeSpec& s) const {
      return s.key_known ? "toy-he-known-key" : "toy-he-unknown-key";
    }
  };
  return std::visit(Visitor{}, spec);
}

ModelVector randomize(const ModelVector& w, double sigma_eps, RngStream& rng) {
  if (sigma_eps < 0.0)
    throw std::invalid_argument("randomize: sigma_eps must be >= 0");
  if (sigma_eps == 0.0) return w;
  ModelVector out = w;
  for (double& v : out.weights) v += sigma_eps * rng.normal();
  return out;
}

ModelVector sparsify(const ModelVector& w, const SparsitySpec& spec,
                     RngStream& rng) {
  const std::size_t n = w.dim();
  if (spec.kept_dims > n)
    throw std::invalid_argument("sparsify: kept_dims exceeds dimension");
  const std::size_t tail = n - spec.kept_dims;
  if (spec.mu_g.size() != tail || spec.sigma_g_var.size() != tail)
    throw std::invalid_argument("sparsify: substitute parameter size mismatch");
  ModelVector out = w;
  for (std::size_t i = 0; i < tail; ++i) {
    if (!(spec.sigma_g_var[i] > 0.0))
      throw std::invalid_argument("sparsify: substitute variance must be > 0");
    out.weights[spec.kept_dims + i] =
        rng.normal(spec.mu_g[i], std::sqrt(spec.sigma_g_var[i]));
  }
  return out;
}

void SecretSharingSpec::validate(std::size_t dim) const {
  if (delta.size() != dim || a.size() != dim || b.size() != dim)
    throw std::invalid_argument("SecretSharingSpec: parameter size mismatch");
  for (std::size_t i = 0; i < dim; ++i) {
    if (!(delta[i] > 0.0) || !(a[i] > 0.0) || !(b[i] > 0.0))
      throw std::invalid_argument("SecretSharingSpec: parameters must be > 0");
    if (!(delta[i] < a[i]) || !(delta[i] < b[i]))
      throw std::invalid_argument("SecretSharingSpec: requires delta < a, b");
  }
  if (centers && centers->size() != dim)
    throw std::invalid_argument("SecretSharingSpec: centers size mismatch");
}

Vec snap_to_lattice(const Vec& v, int bits) {
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = dequantize_fixed(quantize_fixed(v[i], bits), bits);
  return out;
}

SecretShareResult secret_share(const std::vector<ModelVector>& models,
                               const SecretSharingSpec& spec, RngStream rng) {
  const std::size_t k_clients = models.size();
  if (k_clients < 2)
    throw std::invalid_argument("secret_share: need K >= 2 clients");
  const std::size_t dim = models.front().dim();
  for (const auto& m : models)
    if (m.dim() != dim)
      throw std::invalid_argument("secret_share: dimension mismatch");
  spec.validate(dim);
  const int bits = spec.fixed_point_bits;

  Vec centers(dim, 0.0);
  if (spec.centers) {
    centers = *spec.centers;
  } else {
    for (std::size_t i = 0; i < dim; ++i) {
      double s = 0.0;
      for (const auto& m : models) s += m.weights[i];
      centers[i] = s / static_cast<double>(k_clients);
    }
  }

  std::vector<std::int64_t> c_int(dim), a_int(dim), m_int(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    c_int[i] = quantize_fixed(centers[i], bits);
    a_int[i] = quantize_fixed(spec.a[i], bits);
    const std::int64_t b_int = quantize_fixed(spec.b[i], bits);
    if (a_int[i] <= 0 || b_int <= 0)
      throw std::invalid_argument("secret_share: interval collapses at this scale");
    m_int[i] = a_int[i] + b_int;  // interval modulus
  }

  SecretShareResult result;
  result.shares.assign(k_clients, std::vector<Vec>(k_clients, Vec(dim, 0.0)));
  std::vector<std::int64_t> sum_int(dim, 0);

  for (std::size_t k = 0; k < k_clients; ++k) {
    RngStream ck = rng.child(k);
    for (std::size_t i = 0; i < dim; ++i) {
      const std::int64_t v_int = quantize_fixed(models[k].weights[i], bits);
      const std::int64_t r = v_int - c_int[i];
      const std::int64_t mod = m_int[i];
      if (2 * std::abs(r) >= mod)
        throw SecretShareOverflow(
            "secret_share: residual exceeds interval modulus at client " +
            std::to_string(k) + " coordinate " + std::to_string(i));
      // K-1 uniform masks; the last share closes the sum modulo the interval.
      std::int64_t acc = 0;
      for (std::size_t j = 0; j + 1 < k_clients; ++j) {
        const std::int64_t u =
            static_cast<std::int64_t>(ck.uniform_u64(0, mod - 1));
        result.shares[k][j][i] =
            centers[i] + dequantize_fixed(u - a_int[i], bits);
        acc = (acc + u) % mod;
      }
      std::int64_t u_last = ((r % mod) - acc) % mod;
      if (u_last < 0) u_last += mod;
      result.shares[k][k_clients - 1][i] =
          centers[i] + dequantize_fixed(u_last - a_int[i], bits);

      // Exact reconstruction of this client's value from its shares.
      std::int64_t t = (acc + u_last) % mod;
      if (2 * t >= mod) t -= mod;
      if (t != r)
        throw SecretShareOverflow("secret_share: reconstruction mismatch");
      sum_int[i] += c_int[i] + t;
    }
  }

  result.reconstructed_sum.resize(dim);
  for (std::size_t i = 0; i < dim; ++i)
    result.reconstructed_sum[i] = dequantize_fixed(sum_int[i], bits);
  return result;
}

double secret_sharing_marginal_tv(const SecretSharingSpec& spec) {
  double prod = 1.0;
  for (std::size_t i = 0; i < spec.delta.size(); ++i)
    prod *= 2.0 * spec.delta[i] / (spec.a[i] + spec.b[i]);
  return 1.0 - prod;
}

}  // namespace nflab

#include "nflab/toyhe.hpp"

#include <cmath>

namespace nflab {

void HeParams::validate() const {
  if (lwe_dim == 0) throw std::invalid_argument("HeParams: lwe_dim must be > 0");
  if (log2_q < 4 || log2_q > 62)
    throw std::invalid_argument("HeParams: log2_q out of range");
  if (message_bits < 1 ||
      static_cast<std::uint32_t>(message_bits) >= log2_q)
    throw std::invalid_argument("HeParams: message_bits out of range");
  if (error_bound < 0)
    throw std::invalid_argument("HeParams: error_bound must be >= 0");
  const std::int64_t capacity = (1ll << (decode_shift() - 1)) - 1;
  if (error_bound > 0 && budget_units * error_bound > capacity)
    throw std::invalid_argument(
        "HeParams: budget exceeds decode error capacity");
}

SecretKey he_keygen(const HeParams& params, RngStream stream) {
  params.validate();
  SecretKey key{std::vector<std::uint64_t>(params.lwe_dim), params};
  for (auto& v : key.s) v = stream.uniform_u64(0, params.q() - 1);
  return key;
}

namespace {

std::uint64_t mod_q(std::int64_t v, std::uint64_t q) {
  const std::int64_t r = v % static_cast<std::int64_t>(q);
  return static_cast<std::uint64_t>(r < 0 ? r + static_cast<std::int64_t>(q)
                                          : r);
}

}  // namespace

Ciphertext he_encrypt(std::int64_t message, const SecretKey& key,
                      RngStream stream) {
  const HeParams& p = key.params;
  p.validate();
  if (message < p.msg_min() || message > p.msg_max())
    throw std::invalid_argument("he_encrypt: plaintext outside fixed-point range");
  const std::uint64_t q = p.q();
  const std::size_t rows = p.n_rows(), cols = p.n_cols();
  Ciphertext c{std::vector<std::uint64_t>(rows * cols, 0), p, 1};

  // B = [A; s^T A + e]: uniform A in the first lwe_dim rows.
  for (std::size_t r = 0; r < p.lwe_dim; ++r)
    for (std::size_t j = 0; j < cols; ++j)
      c.at(r, j) = stream.uniform_u64(0, q - 1);
  for (std::size_t j = 0; j < cols; ++j) {
    std::uint64_t acc = 0;
    for (std::size_t r = 0; r < p.lwe_dim; ++r)
      acc = (acc + key.s[r] * c.at(r, j)) & (q - 1);
    const std::int64_t e =
        p.error_bound == 0 ? 0
                           : stream.uniform_int(-p.error_bound, p.error_bound);
    c.at(p.lwe_dim, j) = mod_q(static_cast<std::int64_t>(acc) + e,
                               q);
  }
  // + m*G, gadget entries 2^k per row block.
  const std::uint64_t mm = mod_q(message, q);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::uint32_t k = 0; k < p.ell(); ++k) {
      const std::size_t j = r * p.ell() + k;
      c.at(r, j) = (c.at(r, j) + mm * (1ull << k)) & (q - 1);
    }
  return c;
}

namespace {

// t^T C at one column, t = (-s, 1), centered into [-q/2, q/2).
std::int64_t key_row_product(const Ciphertext& c, const SecretKey& key,
                             std::size_t col) {
  const HeParams& p = c.params;
  const std::uint64_t q = p.q();
  std::uint64_t u = c.at(p.lwe_dim, col);
  for (std::size_t r = 0; r < p.lwe_dim; ++r) {
    const std::uint64_t neg_s = (q - key.s.at(r) % q) & (q - 1);
    u = (u + neg_s * c.at(r, col)) & (q - 1);
  }
  std::int64_t uc = static_cast<std::int64_t>(u);
  if (uc >= static_cast<std::int64_t>(q / 2))
    uc -= static_cast<std::int64_t>(q);
  return uc;
}

}  // namespace

std::int64_t he_decrypt(const Ciphertext& c, const SecretKey& key) {
  const HeParams& p = c.params;
  const std::int64_t uc =
      key_row_product(c, key, p.lwe_dim * p.ell() + p.decode_shift());
  const double scale = static_cast<double>(1ull << p.decode_shift());
  return static_cast<std::int64_t>(std::llround(static_cast<double>(uc) / scale));
}

HeDecode he_decode_checked(const Ciphertext& c, const SecretKey& key) {
  const HeParams& p = c.params;
  const std::uint64_t q = p.q();
  const std::size_t base = p.lwe_dim * p.ell() + p.decode_shift();
  const std::int64_t u0 = key_row_product(c, key, base);
  const double scale = static_cast<double>(1ull << p.decode_shift());
  HeDecode out;
  out.message =
      static_cast<std::int64_t>(std::llround(static_cast<double>(u0) / scale));
  // Adjacent gadget columns must carry the same message with error-budget
  // sized residuals: u_{j+k} - 2^k u_j = e' - 2^k e.
  const std::int64_t capacity = 1ll << (p.decode_shift() - 1);
  out.consistent = true;
  for (std::uint32_t k = 1; k <= 2 && p.decode_shift() + k < p.ell(); ++k) {
    const std::int64_t uk = key_row_product(c, key, base + k);
    std::int64_t resid = (uk - (1ll << k) * u0) % static_cast<std::int64_t>(q);
    if (resid >= static_cast<std::int64_t>(q / 2))
      resid -= static_cast<std::int64_t>(q);
    if (resid < -static_cast<std::int64_t>(q / 2))
      resid += static_cast<std::int64_t>(q);
    if (std::abs(resid) > ((1ll << k) + 1) * capacity) out.consistent = false;
  }
  return out;
}

Ciphertext he_add(const Ciphertext& a, const Ciphertext& b) {
  if (a.params.q() != b.params.q() || a.m.size() != b.m.size())
    throw std::invalid_argument("he_add: parameter mismatch");
  Ciphertext out = a;
  const std::uint64_t mask = a.params.q() - 1;
  for (std::size_t i = 0; i < out.m.size(); ++i)
    out.m[i] = (a.m[i] + b.m[i]) & mask;
  out.error_units = a.error_units + b.error_units;
  if (out.error_units > a.params.budget_units)
    throw HeBudgetError("he_add: error budget exceeded (" +
                        std::to_string(out.error_units) + " units > " +
                        std::to_string(a.params.budget_units) + ")");
  return out;
}

std::int64_t quantize_fixed(double x, int bits) {
  return std::llround(x * static_cast<double>(1ll << bits));
}

double dequantize_fixed(std::int64_t v, int bits) {
  return static_cast<double>(v) / static_cast<double>(1ll << bits);
}

}  // namespace nflab

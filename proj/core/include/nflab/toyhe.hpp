#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "nflab/rng.hpp"

namespace nflab {

/// Raised when a ciphertext accumulates more additions than its error
/// budget allows; signals parameter misconfiguration, never silent
/// corruption.
class HeBudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Toy LWE parameters for the approximate-eigenvector scheme.  These are
/// correctness-scale parameters, deliberately far below any secure size:
/// the brute-force attack needs a searchable key space.
struct HeParams {
  std::size_t lwe_dim = 8;       // n_d
  std::uint32_t log2_q = 16;     // q = 2^16, gadget width ell = 16
  std::int64_t error_bound = 1;  // fresh error uniform in [-e, e]
  int message_bits = 10;         // signed plaintexts in [-2^9, 2^9)
  int budget_units = 15;         // max summed fresh-error units per ciphertext

  std::uint64_t q() const { return 1ull << log2_q; }
  std::uint32_t ell() const { return log2_q; }
  std::size_t n_rows() const { return lwe_dim + 1; }
  std::size_t n_cols() const { return n_rows() * ell(); }
  // Decode column shift: message_bits + shift = ell - 1, so the scaled
  // message plus worst-case error stays in the centered residue range.
  std::uint32_t decode_shift() const { return log2_q - 1 - message_bits; }
  std::int64_t msg_min() const { return -(1ll << (message_bits - 1)); }
  std::int64_t msg_max() const { return (1ll << (message_bits - 1)) - 1; }

  void validate() const;
};

struct SecretKey {
  std::vector<std::uint64_t> s;  // length lwe_dim, entries mod q
  HeParams params;
};

/// GSW ciphertext: C = m*G + [A; s^T A + e] mod q, an (n_d+1) x (n_d+1)*ell
/// integer matrix.  The key (-s, 1) is approximately an eigenvector of C
/// with eigenvalue m (up to gadget scaling and the error term).
struct Ciphertext {
  std::vector<std::uint64_t> m;  // row-major, n_rows x n_cols, entries mod q
  HeParams params;
  int error_units = 0;  // accumulated fresh-error count

  std::uint64_t& at(std::size_t r, std::size_t c) {
    return m[r * params.n_cols() + c];
  }
  std::uint64_t at(std::size_t r, std::size_t c) const {
    return m[r * params.n_cols() + c];
  }
};

SecretKey he_keygen(const HeParams& params, RngStream stream);

/// Encrypts a signed fixed-point integer in [msg_min, msg_max].
Ciphertext he_encrypt(std::int64_t message, const SecretKey& key,
                      RngStream stream);

/// Exact within the error budget; garbage (no error) under a wrong key.
std::int64_t he_decrypt(const Ciphertext& c, const SecretKey& key);

struct HeDecode {
  std::int64_t message = 0;
  /// Whether the neighboring gadget columns agree with the decoded message
  /// up to the error budget.  Always true under the correct key; a wrong
  /// key passes only by chance.
  bool consistent = false;
};

/// Full decode: message from the decode column plus a consistency check
/// across adjacent gadget columns.
HeDecode he_decode_checked(const Ciphertext& c, const SecretKey& key);

/// Homomorphic addition; throws HeBudgetError when the summed error units
/// exceed the budget.
Ciphertext he_add(const Ciphertext& a, const Ciphertext& b);

/// Fixed-point helpers shared by HE and secret sharing (scale 2^bits).
std::int64_t quantize_fixed(double x, int bits);
double dequantize_fixed(std::int64_t v, int bits);

}  // namespace nflab

#include "nflab/toyhe.hpp"

#include "doctest.h"

using namespace nflab;

TEST_CASE("roundtrip at the default toy parameters") {
  const HeParams params;
  const SecretKey key = he_keygen(params, RngStream(1));
  RngStream enc(2);
  CHECK(he_decrypt(he_encrypt(0, key, enc.child(0)), key) == 0);
  CHECK(he_decrypt(he_encrypt(511, key, enc.child(1)), key) == 511);
  CHECK(he_decrypt(he_encrypt(-512, key, enc.child(2)), key) == -512);
}

TEST_CASE("exhaustive roundtrip over the full fixed-point range") {
  const HeParams params;
  const SecretKey key = he_keygen(params, RngStream(3));
  RngStream enc(4);
  for (std::int64_t m = params.msg_min(); m <= params.msg_max(); ++m) {
    const Ciphertext c = he_encrypt(m, key, enc.child(static_cast<std::uint64_t>(
                                                m - params.msg_min())));
    REQUIRE(he_decrypt(c, key) == m);
  }
}

TEST_CASE("plaintext range is enforced") {
  const HeParams params;
  const SecretKey key = he_keygen(params, RngStream(5));
  CHECK_THROWS(he_encrypt(params.msg_max() + 1, key, RngStream(6)));
  CHECK_THROWS(he_encrypt(params.msg_min() - 1, key, RngStream(6)));
}

TEST_CASE("homomorphic addition matches the plaintext sum oracle") {
  const HeParams params;
  const SecretKey key = he_keygen(params, RngStream(7));
  RngStream enc(8);
  SUBCASE("four client scalars") {
    const std::int64_t ms[4] = {10, -20, 37, 5};
    Ciphertext acc = he_encrypt(ms[0], key, enc.child(0));
    std::int64_t expected = ms[0];
    for (int i = 1; i < 4; ++i) {
      acc = he_add(acc, he_encrypt(ms[i], key, enc.child(i)));
      expected += ms[i];
    }
    CHECK(he_decrypt(acc, key) == expected);
  }
  SUBCASE("eight clients at the budget") {
    RngStream vals(9);
    Ciphertext acc = he_encrypt(1, key, enc.child(100));
    std::int64_t expected = 1;
    for (int i = 1; i < 8; ++i) {
      const std::int64_t m = vals.uniform_int(-30, 30);
      acc = he_add(acc, he_encrypt(m, key, enc.child(100 + i)));
      expected += m;
    }
    CHECK(acc.error_units == 8);
    CHECK(he_decrypt(acc, key) == expected);
  }
}

TEST_CASE("error budget breach raises HeBudgetError") {
  const HeParams params;  // budget 15 units
  const SecretKey key = he_keygen(params, RngStream(10));
  RngStream enc(11);
  Ciphertext acc = he_encrypt(0, key, enc.child(0));
  for (int i = 1; i < params.budget_units; ++i)
    acc = he_add(acc, he_encrypt(0, key, enc.child(i)));
  CHECK(acc.error_units == params.budget_units);
  CHECK_THROWS_AS(he_add(acc, he_encrypt(0, key, enc.child(999))),
                  HeBudgetError);
}

TEST_CASE("decryption with a wrong key yields garbage without error") {
  const HeParams params;
  const SecretKey key = he_keygen(params, RngStream(12));
  int mismatches = 0;
  RngStream enc(13);
  for (int i = 0; i < 8; ++i) {
    const SecretKey wrong = he_keygen(params, RngStream(1000 + i));
    const Ciphertext c = he_encrypt(123, key, enc.child(i));
    if (he_decrypt(c, wrong) != 123) ++mismatches;
  }
  CHECK(mismatches >= 7);  // a random key decodes correctly only by chance
}

TEST_CASE("parameter validation") {
  HeParams p;
  p.message_bits = 16;  // no room for error bits
  CHECK_THROWS(p.validate());
  p = HeParams{};
  p.budget_units = 1000;  // exceeds the decode error capacity
  CHECK_THROWS(p.validate());
  p = HeParams{};
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("fixed-point helpers") {
  CHECK(quantize_fixed(1.0, 8) == 256);
  CHECK(dequantize_fixed(256, 8) == 1.0);
  CHECK(dequantize_fixed(quantize_fixed(0.12345, 8), 8) ==
        doctest::Approx(0.12345).epsilon(1e-2));
  // Lattice points roundtrip exactly.
  for (int i = -10; i <= 10; ++i) {
    const double x = i / 256.0;
    CHECK(dequantize_fixed(quantize_fixed(x, 8), 8) == x);
  }
}

// Copyright 2026 The Windem Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <span>
#include <vector>

#include "windem/common.hpp"
#include "windem/rng.hpp"

namespace windem::paillier {

// Additive-homomorphic cryptosystem with composite modulus n = p*q and
// generator g = n + 1: the product of two ciphertexts decrypts to the sum of
// their plaintexts mod n. The modulus also parameterizes the fixed-point
// wrap-around encoding of signed reals below.

struct PublicKey {
  mpz_class n;
  mpz_class n_squared;
  int bits = 0;
  uint64_t fingerprint = 0;  // hash of n; ties ciphertexts to this key
};

struct SecretKey {
  mpz_class p, q;
  mpz_class lambda;
  mpz_class mu;  // lambda^-1 mod n (g = n+1 makes L(g^lambda) = lambda)
  // CRT pieces: decrypting mod p^2 and q^2 separately is ~6x faster.
  mpz_class p_squared, q_squared;
  mpz_class hp, hq;     // L_p(g^(p-1))^-1 mod p and the q analogue
  mpz_class p_inv_q;    // p^-1 mod q
};

struct Keypair {
  PublicKey pk;
  SecretKey sk;
};

struct Ciphertext {
  mpz_class value;            // in [0, n^2)
  uint64_t key_fingerprint = 0;
};

/// Deterministic keypair; `bits` is the modulus size (>= 512).
Keypair keygen(int bits, uint64_t seed);

/// c = g^pt * r^n mod n^2 with r drawn uniformly from (0, n), coprime to n.
Ciphertext encrypt(const PublicKey& pk, const mpz_class& pt, SeqRng& rng);

mpz_class decrypt(const Ciphertext& ct, const Keypair& keypair);

/// Homomorphic sum: modular product of the ciphertexts.
Ciphertext add_ciphertexts(const PublicKey& pk,
                           std::span<const Ciphertext> cts);

// Throughput path for protocol runs. Encryption randomness is r = h^rho for
// a per-key public base h and a 256-bit exponent rho, so r^n = (h^n)^rho can
// be evaluated from a precomputed fixed-base table of h^n with a few dozen
// modular multiplications instead of a full exponentiation. This is the
// usual precomputed-randomness tradeoff; the ciphertext form is unchanged.
class EncryptionTable {
 public:
  explicit EncryptionTable(const PublicKey& pk, int window_bits = 6);

  /// Randomness exponent drawn from (rng, counter..counter+3).
  Ciphertext encrypt(const mpz_class& pt, const CounterRng& rng,
                     uint64_t counter) const;

  const PublicKey& public_key() const { return pk_; }

 private:
  mpz_class power(const mpz_class& exponent) const;

  PublicKey pk_;
  int window_bits_;
  int windows_;
  std::vector<mpz_class> table_;  // [window][digit], digit 0 omitted
};

/// Big-endian, length-prefixed ciphertext bytes (for message accounting and
/// transcript export).
std::vector<uint8_t> serialize(const Ciphertext& ct);
Ciphertext deserialize_ciphertext(std::span<const uint8_t> bytes,
                                  const PublicKey& pk);
std::vector<uint8_t> serialize_public_key(const PublicKey& pk);
PublicKey deserialize_public_key(std::span<const uint8_t> bytes);
/// Serialized size of any ciphertext under this key, in bytes.
size_t ciphertext_size(const PublicKey& pk);

/// Signed fixed-point encoding into [0, n): scale by 2^f, negatives wrap to
/// n - |v|. Sums of up to `max_addends` encoded values stay below n/2, so
/// the homomorphic sum decodes correctly.
struct FixedPointCodec {
  int fractional_bits = 40;
  int max_addends = 16;
  mpz_class modulus;

  FixedPointCodec() = default;
  FixedPointCodec(const PublicKey& pk, int fractional = 40, int addends = 16)
      : fractional_bits(fractional), max_addends(addends), modulus(pk.n) {}

  mpz_class encode(double x) const;
  double decode(const mpz_class& v) const;
  /// Uniform scaled integer over the full signed budget range.
  mpz_class random_mask(const CounterRng& rng, uint64_t counter) const;
  /// Signed scaled integer from a wrapped representative.
  mpz_class to_signed(const mpz_class& v) const;
};

/// Packs several fixed-point slots into one plaintext so one ciphertext
/// carries `slots` values. Each slot is biased into a nonnegative window
/// wide enough that `max_addends` homomorphic additions cannot carry into
/// the neighboring slot. Decoding needs the addend count.
struct PackedCodec {
  int fractional_bits = 40;
  int integer_bits = 24;  // magnitude budget per value
  int max_addends = 16;
  int slot_bits = 0;
  int slots = 0;
  mpz_class modulus;
  mpz_class bias;       // per-slot offset, 2^(slot_bits-1) / max_addends
  mpz_class slot_cap;   // 2^slot_bits

  PackedCodec() = default;
  PackedCodec(const PublicKey& pk, int fractional = 40, int int_bits = 24,
              int addends = 16);

  int ciphertexts_for(int values) const {
    return (values + slots - 1) / slots;
  }
  /// values.size() doubles packed into ceil(size/slots) plaintexts.
  std::vector<mpz_class> encode_vector(std::span<const double> values) const;
  /// Inverse after `addends` homomorphic additions.
  std::vector<double> decode_vector(std::span<const mpz_class> plaintexts,
                                    int addends, int count) const;
  /// Per-slot uniform masks over the full slot budget, packed.
  std::vector<mpz_class> encode_masks(std::span<const mpz_class> masks) const;
  mpz_class random_slot_mask(const CounterRng& rng, uint64_t counter) const;
  /// Subtracts packed masks from packed sums (exact integer arithmetic),
  /// then decodes.
  std::vector<double> decode_unmasked(std::span<const mpz_class> sums,
                                      std::span<const mpz_class> masks,
                                      int addends, int count) const;
};

}  // namespace windem::paillier

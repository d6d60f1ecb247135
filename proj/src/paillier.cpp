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

#include "windem/paillier.hpp"

#include <cmath>
#include <cstring>

namespace windem::paillier {

namespace {

mpz_class mpz_from_counters(const CounterRng& rng, uint64_t counter_base,
                            int bits) {
  const int words = (bits + 63) / 64;
  mpz_class v = 0;
  for (int w = 0; w < words; ++w) {
    v <<= 64;
    v += mpz_class(rng.bits(counter_base + w));
  }
  mpz_class mask = (mpz_class(1) << bits) - 1;
  return v & mask;
}

mpz_class seq_mpz_bits(SeqRng& rng, int bits) {
  const int words = (bits + 63) / 64;
  mpz_class v = 0;
  for (int w = 0; w < words; ++w) {
    v <<= 64;
    v += mpz_class(rng.next_bits());
  }
  mpz_class mask = (mpz_class(1) << bits) - 1;
  return v & mask;
}

uint64_t fnv1a(const uint8_t* data, size_t size) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (size_t i = 0; i < size; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t fingerprint_of(const mpz_class& n) {
  const size_t count = (mpz_sizeinbase(n.get_mpz_t(), 2) + 7) / 8;
  std::vector<uint8_t> buf(count);
  size_t written = 0;
  mpz_export(buf.data(), &written, 1, 1, 1, 0, n.get_mpz_t());
  return fnv1a(buf.data(), written);
}

mpz_class next_prime_candidate(SeqRng& rng, int bits) {
  mpz_class cand = seq_mpz_bits(rng, bits);
  // Top two bits set so the product of two primes has full width.
  cand |= (mpz_class(1) << (bits - 1)) | (mpz_class(1) << (bits - 2));
  mpz_class prime;
  mpz_nextprime(prime.get_mpz_t(), cand.get_mpz_t());
  return prime;
}

void append_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v >> 24));
  out.push_back(uint8_t(v >> 16));
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v));
}

uint32_t read_u32(std::span<const uint8_t> bytes, size_t at) {
  return (uint32_t(bytes[at]) << 24) | (uint32_t(bytes[at + 1]) << 16) |
         (uint32_t(bytes[at + 2]) << 8) | uint32_t(bytes[at + 3]);
}

std::vector<uint8_t> mpz_bytes_fixed(const mpz_class& v, size_t width) {
  std::vector<uint8_t> buf(width, 0);
  const size_t need = (mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8;
  if (v != 0) {
    size_t written = 0;
    mpz_export(buf.data() + (width - need), &written, 1, 1, 1, 0,
               v.get_mpz_t());
  }
  return buf;
}

}  // namespace

Keypair keygen(int bits, uint64_t seed) {
  if (bits < 512) throw Error("keygen: modulus must be at least 512 bits");
  SeqRng rng(derive_key(seed, "paillier-keygen"));

  for (int attempt = 0; attempt < 64; ++attempt) {
    const mpz_class p = next_prime_candidate(rng, bits / 2);
    const mpz_class q = next_prime_candidate(rng, bits / 2);
    if (p == q) continue;
    const mpz_class n = p * q;
    mpz_class totient = (p - 1) * (q - 1);
    mpz_class g;
    mpz_gcd(g.get_mpz_t(), n.get_mpz_t(), totient.get_mpz_t());
    if (g != 1) continue;

    Keypair kp;
    kp.pk.n = n;
    kp.pk.n_squared = n * n;
    kp.pk.bits = bits;
    kp.pk.fingerprint = fingerprint_of(n);

    kp.sk.p = p;
    kp.sk.q = q;
    mpz_lcm(kp.sk.lambda.get_mpz_t(), mpz_class(p - 1).get_mpz_t(),
            mpz_class(q - 1).get_mpz_t());
    // g = n+1 means L(g^lambda mod n^2) = lambda, so mu = lambda^-1 mod n.
    if (mpz_invert(kp.sk.mu.get_mpz_t(), kp.sk.lambda.get_mpz_t(),
                   n.get_mpz_t()) == 0)
      continue;

    kp.sk.p_squared = p * p;
    kp.sk.q_squared = q * q;
    // (1+n)^(p-1) mod p^2 = 1 + (p-1) n mod p^2; L_p of that, inverted.
    const mpz_class up = (1 + n * (p - 1)) % kp.sk.p_squared;
    const mpz_class uq = (1 + n * (q - 1)) % kp.sk.q_squared;
    mpz_class lp = (up - 1) / p;
    mpz_class lq = (uq - 1) / q;
    if (mpz_invert(kp.sk.hp.get_mpz_t(), lp.get_mpz_t(), p.get_mpz_t()) == 0)
      continue;
    if (mpz_invert(kp.sk.hq.get_mpz_t(), lq.get_mpz_t(), q.get_mpz_t()) == 0)
      continue;
    if (mpz_invert(kp.sk.p_inv_q.get_mpz_t(), p.get_mpz_t(),
                   q.get_mpz_t()) == 0)
      continue;
    return kp;
  }
  throw Error("keygen: failed to generate a valid keypair");
}

Ciphertext encrypt(const PublicKey& pk, const mpz_class& pt, SeqRng& rng) {
  if (pt < 0 || pt >= pk.n)
    throw Error("encrypt: plaintext outside [0, n)");
  mpz_class r, g;
  do {
    r = seq_mpz_bits(rng, pk.bits) % pk.n;
    mpz_gcd(g.get_mpz_t(), r.get_mpz_t(), pk.n.get_mpz_t());
  } while (r == 0 || g != 1);

  mpz_class rn;
  mpz_powm(rn.get_mpz_t(), r.get_mpz_t(), pk.n.get_mpz_t(),
           pk.n_squared.get_mpz_t());
  Ciphertext ct;
  ct.value = ((1 + pt * pk.n) % pk.n_squared) * rn % pk.n_squared;
  ct.key_fingerprint = pk.fingerprint;
  return ct;
}

mpz_class decrypt(const Ciphertext& ct, const Keypair& keypair) {
  if (ct.key_fingerprint != keypair.pk.fingerprint)
    throw KeyMismatchError("decrypt: ciphertext was made under another key");
  const SecretKey& sk = keypair.sk;
  mpz_class cp, cq;
  mpz_powm(cp.get_mpz_t(), ct.value.get_mpz_t(),
           mpz_class(sk.p - 1).get_mpz_t(), sk.p_squared.get_mpz_t());
  mpz_powm(cq.get_mpz_t(), ct.value.get_mpz_t(),
           mpz_class(sk.q - 1).get_mpz_t(), sk.q_squared.get_mpz_t());
  const mpz_class mp = ((cp - 1) / sk.p) * sk.hp % sk.p;
  const mpz_class mq = ((cq - 1) / sk.q) * sk.hq % sk.q;
  mpz_class diff = (mq - mp) % sk.q;
  if (diff < 0) diff += sk.q;
  return mp + sk.p * (diff * sk.p_inv_q % sk.q);
}

Ciphertext add_ciphertexts(const PublicKey& pk,
                           std::span<const Ciphertext> cts) {
  if (cts.empty()) throw Error("add_ciphertexts: empty list");
  Ciphertext out = cts[0];
  if (out.key_fingerprint != pk.fingerprint)
    throw KeyMismatchError("add_ciphertexts: key mismatch");
  for (size_t i = 1; i < cts.size(); ++i) {
    if (cts[i].key_fingerprint != pk.fingerprint)
      throw KeyMismatchError("add_ciphertexts: key mismatch");
    out.value = out.value * cts[i].value % pk.n_squared;
  }
  return out;
}

EncryptionTable::EncryptionTable(const PublicKey& pk, int window_bits)
    : pk_(pk), window_bits_(window_bits) {
  constexpr int kRhoBits = 256;
  windows_ = (kRhoBits + window_bits - 1) / window_bits;
  const int digits = (1 << window_bits) - 1;

  // Public per-key base: x derived from the key fingerprint, coprime to n.
  const CounterRng rng(derive_key(pk.fingerprint, "paillier-enc-base"));
  mpz_class x, g;
  uint64_t ctr = 0;
  do {
    x = mpz_from_counters(rng, ctr, pk.bits) % pk_.n;
    ctr += (pk.bits + 63) / 64;
    mpz_gcd(g.get_mpz_t(), x.get_mpz_t(), pk_.n.get_mpz_t());
  } while (x <= 1 || g != 1);
  mpz_class base;
  mpz_powm(base.get_mpz_t(), x.get_mpz_t(), pk_.n.get_mpz_t(),
           pk_.n_squared.get_mpz_t());

  table_.resize(size_t(windows_) * digits);
  mpz_class window_base = base;
  for (int w = 0; w < windows_; ++w) {
    mpz_class acc = 1;
    for (int d = 1; d <= digits; ++d) {
      acc = acc * window_base % pk_.n_squared;
      table_[size_t(w) * digits + (d - 1)] = acc;
    }
    // advance the base by 2^window_bits
    for (int s = 0; s < window_bits_; ++s)
      window_base = window_base * window_base % pk_.n_squared;
  }
}

mpz_class EncryptionTable::power(const mpz_class& exponent) const {
  const int digits = (1 << window_bits_) - 1;
  mpz_class out = 1;
  for (int w = 0; w < windows_; ++w) {
    mpz_class d = (exponent >> (w * window_bits_)) & mpz_class(digits);
    const long dl = d.get_si();
    if (dl > 0) out = out * table_[size_t(w) * digits + (dl - 1)] % pk_.n_squared;
  }
  return out;
}

Ciphertext EncryptionTable::encrypt(const mpz_class& pt, const CounterRng& rng,
                                    uint64_t counter) const {
  if (pt < 0 || pt >= pk_.n)
    throw Error("encrypt: plaintext outside [0, n)");
  const mpz_class rho = mpz_from_counters(rng, counter, 256);
  Ciphertext ct;
  ct.value = ((1 + pt * pk_.n) % pk_.n_squared) * power(rho) % pk_.n_squared;
  ct.key_fingerprint = pk_.fingerprint;
  return ct;
}

size_t ciphertext_size(const PublicKey& pk) {
  return 4 + (mpz_sizeinbase(pk.n_squared.get_mpz_t(), 2) + 7) / 8;
}

std::vector<uint8_t> serialize(const Ciphertext& ct) {
  const size_t width = (mpz_sizeinbase(ct.value.get_mpz_t(), 2) + 7) / 8;
  std::vector<uint8_t> out;
  append_u32(out, uint32_t(width));
  const auto bytes = mpz_bytes_fixed(ct.value, width);
  out.insert(out.end(), bytes.begin(), bytes.end());
  return out;
}

Ciphertext deserialize_ciphertext(std::span<const uint8_t> bytes,
                                  const PublicKey& pk) {
  if (bytes.size() < 4) throw Error("ciphertext bytes truncated");
  const uint32_t width = read_u32(bytes, 0);
  if (bytes.size() < 4 + width) throw Error("ciphertext bytes truncated");
  Ciphertext ct;
  mpz_import(ct.value.get_mpz_t(), width, 1, 1, 1, 0, bytes.data() + 4);
  if (ct.value >= pk.n_squared)
    throw Error("ciphertext out of range for this key");
  ct.key_fingerprint = pk.fingerprint;
  return ct;
}

std::vector<uint8_t> serialize_public_key(const PublicKey& pk) {
  std::vector<uint8_t> out;
  append_u32(out, uint32_t(pk.bits));
  const size_t width = (mpz_sizeinbase(pk.n.get_mpz_t(), 2) + 7) / 8;
  append_u32(out, uint32_t(width));
  const auto bytes = mpz_bytes_fixed(pk.n, width);
  out.insert(out.end(), bytes.begin(), bytes.end());
  return out;
}

PublicKey deserialize_public_key(std::span<const uint8_t> bytes) {
  if (bytes.size() < 8) throw Error("public key bytes truncated");
  PublicKey pk;
  pk.bits = int(read_u32(bytes, 0));
  const uint32_t width = read_u32(bytes, 4);
  if (bytes.size() < 8 + width) throw Error("public key bytes truncated");
  mpz_import(pk.n.get_mpz_t(), width, 1, 1, 1, 0, bytes.data() + 8);
  pk.n_squared = pk.n * pk.n;
  pk.fingerprint = fingerprint_of(pk.n);
  return pk;
}

mpz_class FixedPointCodec::encode(double x) const {
  if (!std::isfinite(x)) throw CodecOverflowError("encode: non-finite value");
  const double scaled = std::nearbyint(std::ldexp(x, fractional_bits));
  mpz_class m(scaled);
  if (2 * max_addends * abs(m) >= modulus)
    throw CodecOverflowError("encode: value exceeds the range budget");
  return m >= 0 ? m : mpz_class(modulus + m);
}

mpz_class FixedPointCodec::to_signed(const mpz_class& v) const {
  return 2 * v > modulus ? mpz_class(v - modulus) : v;
}

double FixedPointCodec::decode(const mpz_class& v) const {
  const mpz_class s = to_signed(v);
  return std::ldexp(s.get_d(), -fractional_bits);
}

mpz_class FixedPointCodec::random_mask(const CounterRng& rng,
                                       uint64_t counter) const {
  const mpz_class bound = modulus / (2 * max_addends);  // values in (-bound, bound)
  const int bits = int(mpz_sizeinbase(bound.get_mpz_t(), 2)) + 64;
  const mpz_class raw = mpz_from_counters(rng, counter, bits);
  return raw % (2 * bound - 1) - (bound - 1);
}

PackedCodec::PackedCodec(const PublicKey& pk, int fractional, int int_bits,
                         int addends)
    : fractional_bits(fractional),
      integer_bits(int_bits),
      max_addends(addends),
      modulus(pk.n) {
  int addend_bits = 0;
  while ((1 << addend_bits) < addends) ++addend_bits;
  slot_bits = fractional + int_bits + 1 + addend_bits;
  const int usable = int(mpz_sizeinbase(pk.n.get_mpz_t(), 2)) - 1;
  slots = usable / slot_bits;
  if (slots < 1) throw Error("packed codec: modulus too small for one slot");
  slot_cap = mpz_class(1) << slot_bits;
  bias = (slot_cap / 2) / max_addends;
}

std::vector<mpz_class> PackedCodec::encode_vector(
    std::span<const double> values) const {
  std::vector<mpz_class> out(ciphertexts_for(int(values.size())), 0);
  for (size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]))
      throw CodecOverflowError("encode: non-finite value");
    const double scaled = std::nearbyint(std::ldexp(values[i], fractional_bits));
    mpz_class m(scaled);
    if (abs(m) >= bias)
      throw CodecOverflowError("encode: value exceeds the slot budget");
    const int slot = int(i) % slots;
    out[i / slots] += (bias + m) << (slot * slot_bits);
  }
  return out;
}

std::vector<double> PackedCodec::decode_vector(
    std::span<const mpz_class> plaintexts, int addends, int count) const {
  std::vector<double> out(count);
  const mpz_class mask = slot_cap - 1;
  for (int i = 0; i < count; ++i) {
    const int slot = i % slots;
    const mpz_class raw =
        (plaintexts[i / slots] >> (slot * slot_bits)) & mask;
    const mpz_class m = raw - addends * bias;
    out[i] = std::ldexp(m.get_d(), -fractional_bits);
  }
  return out;
}

mpz_class PackedCodec::random_slot_mask(const CounterRng& rng,
                                        uint64_t counter) const {
  const int bits = slot_bits + 64;
  const mpz_class raw = mpz_from_counters(rng, counter, bits);
  return raw % (2 * bias - 1) - (bias - 1);
}

std::vector<mpz_class> PackedCodec::encode_masks(
    std::span<const mpz_class> masks) const {
  std::vector<mpz_class> out(ciphertexts_for(int(masks.size())), 0);
  for (size_t i = 0; i < masks.size(); ++i) {
    if (abs(masks[i]) >= bias)
      throw CodecOverflowError("mask exceeds the slot budget");
    const int slot = int(i) % slots;
    out[i / slots] += (bias + masks[i]) << (slot * slot_bits);
  }
  return out;
}

std::vector<double> PackedCodec::decode_unmasked(
    std::span<const mpz_class> sums, std::span<const mpz_class> masks,
    int addends, int count) const {
  std::vector<double> out(count);
  const mpz_class mask_bits = slot_cap - 1;
  for (int i = 0; i < count; ++i) {
    const int slot = i % slots;
    const mpz_class raw = (sums[i / slots] >> (slot * slot_bits)) & mask_bits;
    const mpz_class m = raw - addends * bias - masks[i];
    out[i] = std::ldexp(m.get_d(), -fractional_bits);
  }
  return out;
}

}  // namespace windem::paillier

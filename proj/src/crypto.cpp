#include "qdb/crypto.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/sha.h>

#include <string>

#include "qdb/errors.hpp"

namespace qdb {

namespace {

constexpr std::string_view kPrfTag = "qdb-prf/v1";
constexpr std::string_view kCommitTag = "qdb-commit/v1";

void append_u32be(Bytes& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void append_bits(Bytes& out, const Bits& bits) {
  append_u32be(out, static_cast<std::uint32_t>(bits.size()));
  const Bytes packed = pack_bits(bits);
  out.insert(out.end(), packed.begin(), packed.end());
}

Bits xor_bits(const Bits& x, const Bits& y) {
  Bits out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] ^ y[i];
  return out;
}

Bits tf_keystream(const Bits& a, std::size_t n) {
  const SharedKey key{pack_bits(a)};
  static const Nonce left = Nonce::from_label("qdb-tf-enc/left");
  static const Nonce right = Nonce::from_label("qdb-tf-enc/right");
  return prf_expand(key, left, right, n);
}

}  // namespace

SharedKey SharedKey::random(Rng& rng, std::size_t length) {
  SharedKey key;
  key.bytes.resize(length);
  for (auto& byte : key.bytes) byte = static_cast<std::uint8_t>(rng() >> 56);
  return key;
}

Bits SharedKey::bits() const {
  Bits out;
  out.reserve(bytes.size() * 8);
  for (std::uint8_t byte : bytes) {
    for (int shift = 7; shift >= 0; --shift) out.push_back((byte >> shift) & 1U);
  }
  return out;
}

Nonce Nonce::random(Rng& rng, std::size_t length) { return Nonce{random_bits(rng, length)}; }

Nonce Nonce::from_label(std::string_view label) {
  Nonce n;
  for (char ch : label) {
    const auto byte = static_cast<unsigned char>(ch);
    for (int shift = 7; shift >= 0; --shift) n.bits.push_back((byte >> shift) & 1U);
  }
  return n;
}

std::string_view to_string(RegisterMode mode) {
  return mode == RegisterMode::Prf ? "prf" : "tf-resistant";
}

RegisterMode register_mode_from_string(std::string_view s) {
  if (s == "prf") return RegisterMode::Prf;
  if (s == "tf-resistant") return RegisterMode::TfResistant;
  throw InvalidArgument("unknown register mode: " + std::string(s));
}

Bytes pack_bits(const Bits& bits) {
  Bytes out((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) out[i / 8] |= static_cast<std::uint8_t>(0x80U >> (i % 8));
  }
  return out;
}

std::size_t hamming_distance(const Bits& x, const Bits& y) {
  if (x.size() != y.size()) throw InvalidArgument("hamming_distance: length mismatch");
  std::size_t d = 0;
  for (std::size_t i = 0; i < x.size(); ++i) d += (x[i] != y[i]);
  return d;
}

Bits prf_expand(const SharedKey& key, const Nonce& nA, const Nonce& nB, std::size_t out_len) {
  if (out_len == 0) throw InvalidArgument("prf_expand: out_len must be positive");

  Bytes message(kPrfTag.begin(), kPrfTag.end());
  const std::size_t counter_at = message.size();
  append_u32be(message, 0);
  append_bits(message, nA.bits);
  append_bits(message, nB.bits);

  Bits out;
  out.reserve(out_len + 256);
  std::array<unsigned char, EVP_MAX_MD_SIZE> block{};
  for (std::uint32_t counter = 0; out.size() < out_len; ++counter) {
    for (int i = 0; i < 4; ++i) {
      message[counter_at + static_cast<std::size_t>(i)] =
          static_cast<std::uint8_t>(counter >> (24 - 8 * i));
    }
    unsigned int len = 0;
    if (HMAC(EVP_sha256(), key.bytes.data(), static_cast<int>(key.bytes.size()), message.data(),
             message.size(), block.data(), &len) == nullptr) {
      throw Error("HMAC-SHA256 failed");
    }
    for (unsigned int byte = 0; byte < len && out.size() < out_len; ++byte) {
      for (int shift = 7; shift >= 0 && out.size() < out_len; --shift) {
        out.push_back((block[byte] >> shift) & 1U);
      }
    }
  }
  return out;
}

Registers derive_registers(RegisterMode mode, const SharedKey& key, const Nonce& nA,
                           const Nonce& nB, std::size_t n, int count) {
  if (n == 0) throw InvalidArgument("derive_registers: n must be at least 1");
  if (count != 2 && count != 3) throw InvalidArgument("derive_registers: count must be 2 or 3");

  Registers regs;
  if (mode == RegisterMode::Prf) {
    const Bits stream = prf_expand(key, nA, nB, n * static_cast<std::size_t>(count));
    auto slice = [&](std::size_t k) {
      return Bits(stream.begin() + static_cast<std::ptrdiff_t>(k * n),
                  stream.begin() + static_cast<std::ptrdiff_t>((k + 1) * n));
    };
    regs.a = slice(0);
    regs.b = slice(1);
    if (count == 3) regs.c = slice(2);
    return regs;
  }

  if (count != 2) throw InvalidArgument("tf-resistant registers support exactly two registers");
  if (n > key.bit_length()) {
    throw InvalidArgument("tf-resistant registers need n <= key bit length");
  }
  regs.a = prf_expand(key, nA, nB, n);
  Bits key_bits = key.bits();
  key_bits.resize(n);
  regs.b = xor_bits(key_bits, tf_keystream(regs.a, n));
  return regs;
}

Bits recover_key(const Bits& a, const Bits& b) {
  if (a.empty() || a.size() != b.size()) throw InvalidArgument("recover_key: bad register sizes");
  return xor_bits(b, tf_keystream(a, b.size()));
}

Commitment commit(const Bits& r, const Salt& salt) {
  Bytes message(kCommitTag.begin(), kCommitTag.end());
  message.insert(message.end(), salt.begin(), salt.end());
  append_bits(message, r);
  Commitment c;
  SHA256(message.data(), message.size(), c.digest.data());
  return c;
}

bool open_commitment(const Commitment& c, const Bits& r, const Salt& salt) {
  return commit(r, salt) == c;
}

Salt random_salt(Rng& rng) {
  Salt salt{};
  for (auto& byte : salt) byte = static_cast<std::uint8_t>(rng() >> 56);
  return salt;
}

}  // namespace qdb

#pragma once

// Keyed register derivation, commitments and the terrorist-fraud-resistant
// register variant. Backed by OpenSSL HMAC-SHA256 / SHA-256; nothing here makes
// security claims beyond what the simulation needs (determinism, avalanche,
// binding).

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "qdb/rng.hpp"

namespace qdb {

using Bytes = std::vector<std::uint8_t>;
using Salt = std::array<std::uint8_t, 16>;

inline constexpr std::size_t kDefaultKeyBytes = 16;
inline constexpr std::size_t kDefaultNonceBits = 128;

struct SharedKey {
  Bytes bytes;

  static SharedKey random(Rng& rng, std::size_t length = kDefaultKeyBytes);
  std::size_t bit_length() const noexcept { return bytes.size() * 8; }
  /// Key bits MSB-first.
  Bits bits() const;
};

struct Nonce {
  Bits bits;

  static Nonce random(Rng& rng, std::size_t length = kDefaultNonceBits);
  static Nonce from_label(std::string_view label);
};

enum class RegisterMode : std::uint8_t { Prf, TfResistant };

std::string_view to_string(RegisterMode mode);
RegisterMode register_mode_from_string(std::string_view s);

struct Registers {
  Bits a;
  Bits b;
  std::optional<Bits> c;

  std::size_t rounds() const noexcept { return a.size(); }
};

struct Commitment {
  std::array<std::uint8_t, 32> digest{};

  friend bool operator==(const Commitment&, const Commitment&) = default;
};

/// Counter-mode HMAC-SHA256 expansion of (nA, nB) under `key`. Output bits are
/// MSB-first; a longer request extends a shorter one.
Bits prf_expand(const SharedKey& key, const Nonce& nA, const Nonce& nB, std::size_t out_len);

/// PRF mode: split prf_expand(key, nA, nB, count * n) into a || b [|| c].
/// TfResistant mode (count must be 2): a = prf_expand(key, nA, nB, n) and
/// b = first n key bits XOR a keystream keyed by a, so (a, b) reveal the key.
Registers derive_registers(RegisterMode mode, const SharedKey& key, const Nonce& nA,
                           const Nonce& nB, std::size_t n, int count);

/// Inverts the TfResistant derivation: returns the first |b| bits of the key.
Bits recover_key(const Bits& a, const Bits& b);

Commitment commit(const Bits& r, const Salt& salt);
bool open_commitment(const Commitment& c, const Bits& r, const Salt& salt);

Salt random_salt(Rng& rng);

/// Packs 0/1 bits MSB-first into bytes; the last byte is zero-padded.
Bytes pack_bits(const Bits& bits);
std::size_t hamming_distance(const Bits& x, const Bits& y);

}  // namespace qdb

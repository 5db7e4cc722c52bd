#include "qdb/rng.hpp"

#include <openssl/sha.h>

#include <array>
#include <cstring>

namespace qdb {

namespace {

void append_u64le(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

}  // namespace

std::uint64_t derive_stream_seed(std::uint64_t master, std::uint64_t trial,
                                 std::string_view label) {
  static constexpr std::string_view kTag = "qdb-rng/v1";
  std::vector<unsigned char> buf;
  buf.reserve(kTag.size() + 16 + label.size());
  buf.insert(buf.end(), kTag.begin(), kTag.end());
  append_u64le(buf, master);
  append_u64le(buf, trial);
  buf.insert(buf.end(), label.begin(), label.end());

  std::array<unsigned char, SHA256_DIGEST_LENGTH> digest{};
  SHA256(buf.data(), buf.size(), digest.data());
  std::uint64_t seed = 0;
  for (int i = 7; i >= 0; --i) seed = (seed << 8) | digest[static_cast<std::size_t>(i)];
  return seed;
}

Rng make_stream(std::uint64_t master, std::uint64_t trial, std::string_view label) {
  return Rng(derive_stream_seed(master, trial, label));
}

Bits random_bits(Rng& rng, std::size_t count) {
  Bits out(count);
  for (auto& b : out) b = random_bit(rng);
  return out;
}

}  // namespace qdb

#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace qdb {

using Bit = std::uint8_t;
using Bits = std::vector<Bit>;

/// Every source of randomness in a trial is one of these, seeded from the
/// master seed through derive_stream_seed.
using Rng = std::mt19937_64;

/// Stream seed = first 8 bytes (little endian) of
/// SHA-256("qdb-rng/v1" || u64le(master) || u64le(trial) || label).
std::uint64_t derive_stream_seed(std::uint64_t master, std::uint64_t trial,
                                 std::string_view label);

Rng make_stream(std::uint64_t master, std::uint64_t trial, std::string_view label);

inline Bit random_bit(Rng& rng) { return static_cast<Bit>(rng() >> 63); }

/// Uniform double in [0, 1) with 53 random bits; portable across standard libraries.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Bits random_bits(Rng& rng, std::size_t count);

}  // namespace qdb

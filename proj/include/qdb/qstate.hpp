#pragma once

// Exact pure-state simulation of single qubits and two-qubit pairs.
//
// Amplitudes are stored at double precision. A register bit selects a basis:
// 0 -> Computational (+), 1 -> Hadamard (x). Classical bits are encoded as
//   0 -> |0> or |+>,   1 -> |1> or |->.

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <string_view>
#include <unordered_map>
#include <utility>

#include "qdb/rng.hpp"

namespace qdb {

using Complex = std::complex<double>;

inline constexpr double kNormTolerance = 1e-12;

enum class Basis : std::uint8_t { Computational, Hadamard };

constexpr Basis complement(Basis b) noexcept {
  return b == Basis::Computational ? Basis::Hadamard : Basis::Computational;
}

constexpr Basis basis_from_bit(Bit b) noexcept {
  return b ? Basis::Hadamard : Basis::Computational;
}

inline Basis random_basis(Rng& rng) { return basis_from_bit(random_bit(rng)); }

std::string_view to_string(Basis b);

struct PureState1 {
  Complex amp0{1.0, 0.0};
  Complex amp1{0.0, 0.0};
};

/// Amplitudes ordered |00>, |01>, |10>, |11>; the left factor is the first slot.
struct PureState2 {
  std::array<Complex, 4> amps{Complex{1.0, 0.0}, {}, {}, {}};
};

enum class BellLabel : std::uint8_t { B00, B01, B10, B11 };

std::string_view to_string(BellLabel label);
BellLabel bell_label_from_string(std::string_view s);

enum class Slot : std::uint8_t { First, Second };

constexpr Slot sibling(Slot s) noexcept { return s == Slot::First ? Slot::Second : Slot::First; }

double norm_squared(const PureState1& s) noexcept;
double norm_squared(const PureState2& s) noexcept;

/// Basis vector for outcome `bit` in `basis`.
PureState1 basis_vector(Basis basis, Bit bit) noexcept;

PureState1 encode(Bit bit, Basis basis) noexcept;

/// Outcome probabilities (p0, p1) of measuring `state` in `basis`.
/// Throws NotNormalized when |amp0|^2 + |amp1|^2 is off by more than 1e-12.
std::pair<double, double> distribution1(const PureState1& state, Basis basis);

PureState2 bell_state(BellLabel label) noexcept;

/// One branch of measuring a single slot of a pair.
struct HalfBranch {
  double probability = 0.0;
  Bit outcome = 0;
  PureState1 sibling;  // normalized conditional state; meaningless if probability == 0
};

std::array<HalfBranch, 2> collapse_half(const PureState2& state, Slot slot, Basis basis);

/// joint[i][j] = P(first slot -> i in `first`, second slot -> j in `second`).
std::array<std::array<double, 2>, 2> joint_distribution(const PureState2& state, Basis first,
                                                       Basis second);

/// 0 when both halves of `label` measured in `basis` always agree, 1 when they always differ.
Bit same_basis_flip(BellLabel label, Basis basis);

bool equal_up_to_phase(const PureState1& x, const PureState1& y, double tol = 1e-9) noexcept;
bool equal_up_to_phase(const PureState2& x, const PureState2& y, double tol = 1e-9) noexcept;

/// Consume-once reference to a qubit held by a QuantumRegistry.
struct QuantumHandle {
  enum class Kind : std::uint8_t { Single, HalfOfPair };

  std::uint64_t id = 0;
  Kind kind = Kind::Single;
  std::uint64_t pair_id = 0;  // only meaningful for HalfOfPair
  Slot slot = Slot::First;

  friend bool operator==(const QuantumHandle&, const QuantumHandle&) = default;
};

/// Owns every live qubit of one trial. Measurement consumes the handle; measuring
/// one half of a pair leaves the other half as its conditional single-qubit state.
/// Collapse outcomes are sampled from the registry's own RNG stream.
class QuantumRegistry {
 public:
  explicit QuantumRegistry(Rng rng) : rng_(std::move(rng)) {}

  QuantumHandle make_single(const PureState1& state);
  std::pair<QuantumHandle, QuantumHandle> make_pair(const PureState2& state);
  std::pair<QuantumHandle, QuantumHandle> make_bell(BellLabel label) {
    return make_pair(bell_state(label));
  }

  /// Measure a Single handle.
  Bit measure1(const QuantumHandle& handle, Basis basis);
  /// Measure a HalfOfPair handle.
  Bit measure_half(const QuantumHandle& handle, Basis basis);
  /// Measure whatever the handle refers to; receivers cannot tell a lone qubit from a pair half.
  Bit measure(const QuantumHandle& handle, Basis basis);

  bool contains(const QuantumHandle& handle) const;
  bool is_consumed(const QuantumHandle& handle) const;
  bool is_live(const QuantumHandle& handle) const { return contains(handle) && !is_consumed(handle); }
  std::size_t live_count() const noexcept { return live_; }
  std::uint64_t measurements() const noexcept { return measurements_; }

  /// Current single-qubit state of a handle: the prepared state or a residual after its sibling collapsed.
  std::optional<PureState1> single_state(const QuantumHandle& handle) const;
  /// Joint state of a pair while neither half has been measured.
  std::optional<PureState2> pair_state(std::uint64_t pair_id) const;

 private:
  struct Entry {
    QuantumHandle handle;
    bool consumed = false;
  };

  Entry& live_entry(const QuantumHandle& handle);
  Bit sample(double p0);

  Rng rng_;
  std::uint64_t next_id_ = 1;
  std::uint64_t next_pair_ = 1;
  std::size_t live_ = 0;
  std::uint64_t measurements_ = 0;
  std::unordered_map<std::uint64_t, Entry> entries_;
  std::unordered_map<std::uint64_t, PureState1> singles_;
  struct PairRecord {
    PureState2 state;
    std::uint64_t first_id = 0;
    std::uint64_t second_id = 0;
  };
  std::unordered_map<std::uint64_t, PairRecord> pairs_;
};

}  // namespace qdb

#include "qdb/qstate.hpp"

#include <cmath>
#include <string>

#include "qdb/errors.hpp"

namespace qdb {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

std::size_t index2(Bit first, Bit second) { return static_cast<std::size_t>(first) * 2 + second; }

}  // namespace

std::string_view to_string(Basis b) {
  return b == Basis::Computational ? "computational" : "hadamard";
}

std::string_view to_string(BellLabel label) {
  switch (label) {
    case BellLabel::B00: return "B00";
    case BellLabel::B01: return "B01";
    case BellLabel::B10: return "B10";
    case BellLabel::B11: return "B11";
  }
  return "?";
}

BellLabel bell_label_from_string(std::string_view s) {
  if (s == "B00") return BellLabel::B00;
  if (s == "B01") return BellLabel::B01;
  if (s == "B10") return BellLabel::B10;
  if (s == "B11") return BellLabel::B11;
  throw InvalidArgument("unknown Bell label: " + std::string(s));
}

double norm_squared(const PureState1& s) noexcept { return std::norm(s.amp0) + std::norm(s.amp1); }

double norm_squared(const PureState2& s) noexcept {
  double total = 0.0;
  for (const auto& a : s.amps) total += std::norm(a);
  return total;
}

PureState1 basis_vector(Basis basis, Bit bit) noexcept {
  if (basis == Basis::Computational) {
    return bit ? PureState1{{0.0, 0.0}, {1.0, 0.0}} : PureState1{{1.0, 0.0}, {0.0, 0.0}};
  }
  return bit ? PureState1{{kInvSqrt2, 0.0}, {-kInvSqrt2, 0.0}}
             : PureState1{{kInvSqrt2, 0.0}, {kInvSqrt2, 0.0}};
}

PureState1 encode(Bit bit, Basis basis) noexcept { return basis_vector(basis, bit); }

std::pair<double, double> distribution1(const PureState1& state, Basis basis) {
  if (std::abs(norm_squared(state) - 1.0) > kNormTolerance) {
    throw NotNormalized("single-qubit state is not normalized");
  }
  auto project = [&](Bit k) {
    const PureState1 e = basis_vector(basis, k);
    return std::norm(std::conj(e.amp0) * state.amp0 + std::conj(e.amp1) * state.amp1);
  };
  const double p0 = project(0);
  const double p1 = project(1);
  // Renormalize away rounding so p0 + p1 == 1 to the last ulp or so.
  const double total = p0 + p1;
  return {p0 / total, p1 / total};
}

PureState2 bell_state(BellLabel label) noexcept {
  const Complex h{kInvSqrt2, 0.0};
  const Complex z{};
  switch (label) {
    case BellLabel::B00: return PureState2{{h, z, z, h}};
    case BellLabel::B01: return PureState2{{h, z, z, -h}};
    case BellLabel::B10: return PureState2{{z, h, h, z}};
    case BellLabel::B11: return PureState2{{z, h, -h, z}};
  }
  return PureState2{};
}

std::array<HalfBranch, 2> collapse_half(const PureState2& state, Slot slot, Basis basis) {
  if (std::abs(norm_squared(state) - 1.0) > kNormTolerance) {
    throw NotNormalized("two-qubit state is not normalized");
  }
  std::array<HalfBranch, 2> out{};
  for (Bit k = 0; k < 2; ++k) {
    const PureState1 e = basis_vector(basis, k);
    const Complex e0 = std::conj(e.amp0);
    const Complex e1 = std::conj(e.amp1);
    Complex v0, v1;
    if (slot == Slot::First) {
      v0 = e0 * state.amps[index2(0, 0)] + e1 * state.amps[index2(1, 0)];
      v1 = e0 * state.amps[index2(0, 1)] + e1 * state.amps[index2(1, 1)];
    } else {
      v0 = e0 * state.amps[index2(0, 0)] + e1 * state.amps[index2(0, 1)];
      v1 = e0 * state.amps[index2(1, 0)] + e1 * state.amps[index2(1, 1)];
    }
    const double p = std::norm(v0) + std::norm(v1);
    out[k].probability = p;
    out[k].outcome = k;
    if (p > 0.0) {
      const double scale = 1.0 / std::sqrt(p);
      out[k].sibling = PureState1{v0 * scale, v1 * scale};
    }
  }
  const double total = out[0].probability + out[1].probability;
  out[0].probability /= total;
  out[1].probability /= total;
  return out;
}

std::array<std::array<double, 2>, 2> joint_distribution(const PureState2& state, Basis first,
                                                       Basis second) {
  std::array<std::array<double, 2>, 2> joint{};
  for (const auto& branch : collapse_half(state, Slot::First, first)) {
    if (branch.probability == 0.0) continue;
    const auto [q0, q1] = distribution1(branch.sibling, second);
    joint[branch.outcome][0] = branch.probability * q0;
    joint[branch.outcome][1] = branch.probability * q1;
  }
  return joint;
}

Bit same_basis_flip(BellLabel label, Basis basis) {
  const auto joint = joint_distribution(bell_state(label), basis, basis);
  const double equal = joint[0][0] + joint[1][1];
  return equal > 0.5 ? 0 : 1;
}

bool equal_up_to_phase(const PureState1& x, const PureState1& y, double tol) noexcept {
  const Complex overlap = std::conj(x.amp0) * y.amp0 + std::conj(x.amp1) * y.amp1;
  return std::abs(std::abs(overlap) - 1.0) <= tol;
}

bool equal_up_to_phase(const PureState2& x, const PureState2& y, double tol) noexcept {
  Complex overlap{};
  for (std::size_t i = 0; i < 4; ++i) overlap += std::conj(x.amps[i]) * y.amps[i];
  return std::abs(std::abs(overlap) - 1.0) <= tol;
}

// --- registry ---------------------------------------------------------------

QuantumHandle QuantumRegistry::make_single(const PureState1& state) {
  if (std::abs(norm_squared(state) - 1.0) > kNormTolerance) {
    throw NotNormalized("cannot register a non-normalized qubit");
  }
  QuantumHandle h{next_id_++, QuantumHandle::Kind::Single, 0, Slot::First};
  entries_.emplace(h.id, Entry{h, false});
  singles_.emplace(h.id, state);
  ++live_;
  return h;
}

std::pair<QuantumHandle, QuantumHandle> QuantumRegistry::make_pair(const PureState2& state) {
  if (std::abs(norm_squared(state) - 1.0) > kNormTolerance) {
    throw NotNormalized("cannot register a non-normalized pair");
  }
  const std::uint64_t pair = next_pair_++;
  QuantumHandle first{next_id_++, QuantumHandle::Kind::HalfOfPair, pair, Slot::First};
  QuantumHandle second{next_id_++, QuantumHandle::Kind::HalfOfPair, pair, Slot::Second};
  entries_.emplace(first.id, Entry{first, false});
  entries_.emplace(second.id, Entry{second, false});
  pairs_.emplace(pair, PairRecord{state, first.id, second.id});
  live_ += 2;
  return {first, second};
}

QuantumRegistry::Entry& QuantumRegistry::live_entry(const QuantumHandle& handle) {
  auto it = entries_.find(handle.id);
  if (it == entries_.end() || !(it->second.handle == handle)) {
    throw UnknownHandle("unknown quantum handle " + std::to_string(handle.id));
  }
  if (it->second.consumed) {
    throw AlreadyConsumed("quantum handle " + std::to_string(handle.id) + " already measured");
  }
  return it->second;
}

Bit QuantumRegistry::sample(double p0) { return uniform01(rng_) < p0 ? 0 : 1; }

Bit QuantumRegistry::measure1(const QuantumHandle& handle, Basis basis) {
  if (handle.kind != QuantumHandle::Kind::Single) {
    throw InvalidArgument("measure1 expects a single-qubit handle");
  }
  return measure(handle, basis);
}

Bit QuantumRegistry::measure_half(const QuantumHandle& handle, Basis basis) {
  if (handle.kind != QuantumHandle::Kind::HalfOfPair) {
    throw InvalidArgument("measure_half expects a pair-half handle");
  }
  return measure(handle, basis);
}

Bit QuantumRegistry::measure(const QuantumHandle& handle, Basis basis) {
  Entry& entry = live_entry(handle);
  Bit outcome = 0;
  if (auto pit = pairs_.find(handle.pair_id);
      handle.kind == QuantumHandle::Kind::HalfOfPair && pit != pairs_.end()) {
    const auto branches = collapse_half(pit->second.state, handle.slot, basis);
    outcome = sample(branches[0].probability);
    const std::uint64_t sibling_id =
        handle.slot == Slot::First ? pit->second.second_id : pit->second.first_id;
    if (!entries_.at(sibling_id).consumed) singles_[sibling_id] = branches[outcome].sibling;
    pairs_.erase(pit);
  } else {
    auto sit = singles_.find(handle.id);
    if (sit == singles_.end()) throw UnknownHandle("no state stored for handle");
    outcome = sample(distribution1(sit->second, basis).first);
    singles_.erase(sit);
  }
  entry.consumed = true;
  --live_;
  ++measurements_;
  return outcome;
}

bool QuantumRegistry::contains(const QuantumHandle& handle) const {
  auto it = entries_.find(handle.id);
  return it != entries_.end() && it->second.handle == handle;
}

bool QuantumRegistry::is_consumed(const QuantumHandle& handle) const {
  auto it = entries_.find(handle.id);
  if (it == entries_.end()) throw UnknownHandle("unknown quantum handle");
  return it->second.consumed;
}

std::optional<PureState1> QuantumRegistry::single_state(const QuantumHandle& handle) const {
  if (auto it = singles_.find(handle.id); it != singles_.end()) return it->second;
  return std::nullopt;
}

std::optional<PureState2> QuantumRegistry::pair_state(std::uint64_t pair_id) const {
  if (auto it = pairs_.find(pair_id); it != pairs_.end()) return it->second.state;
  return std::nullopt;
}

}  // namespace qdb

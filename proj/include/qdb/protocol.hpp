#pragma once

// Per-party state machines for five distance-bounding protocols.
//
//   BrandsChaum  Verifier/Prover   r_i = N_i xor c_i, commitment to N opened at the end
//   HanckeKuhn   Verifier/Prover   r_i = a_i if c_i = 0 else b_i
//   QdbPrior     Verifier/Prover   |c_i>_{a_i} out, |c'_i>_{b_i} back
//   EqdbOneWay   Verifier/Prover   EP half out, |m'_i>_{b_i} back
//   EqdbMutual   PartyA/PartyB     EP half, |m'_i xor r_i>_{b_i}, |r'_i>_{c_i}, then m', open(r)
//
// A session is a plain value driven by on_message/on_timer; it never touches the
// scheduler directly. PartyEndpoint adapts a session to the channel simulator.

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "qdb/channel.hpp"
#include "qdb/crypto.hpp"
#include "qdb/messages.hpp"
#include "qdb/qstate.hpp"

namespace qdb {

enum class ProtocolId : std::uint8_t { BrandsChaum, HanckeKuhn, QdbPrior, EqdbOneWay, EqdbMutual };

std::string_view to_string(ProtocolId p);
ProtocolId protocol_from_string(std::string_view s);
bool is_quantum(ProtocolId p) noexcept;

enum class Role : std::uint8_t { Verifier, Prover, PartyA, PartyB };

std::string_view to_string(Role r);
bool role_valid_for(ProtocolId p, Role r) noexcept;
/// Verifier and PartyA open the session by sending the first nonce.
bool is_initiator(Role r) noexcept;

enum class PhaseTag : std::uint8_t { Init, Rapid, Final, Done };

struct Phase {
  PhaseTag tag = PhaseTag::Init;
  int round = 0;  // 1-based while Rapid

  friend bool operator==(const Phase&, const Phase&) = default;
};

/// Monotone order Init < Rapid(1) < ... < Rapid(n) < Final < Done.
bool phase_before(const Phase& x, const Phase& y) noexcept;

enum class FailureReason : std::uint8_t {
  None,
  BitMismatch,
  TimingExceeded,
  CommitmentInvalid,
  FinalCheckFailed,
  ReflectionDetected,
};

std::string_view to_string(FailureReason f);

struct Verdict {
  bool accepted = false;
  std::optional<double> distance_bound;  // meters, max over completed rounds
  FailureReason failure_reason = FailureReason::None;
};

enum class AbortPolicy : std::uint8_t { FirstFailure, Tally };

/// How PartyA validates the final opening in the mutual protocol.
///   Recomputed: m'_i := decoded_i xor r_i must equal A's own outcome (with the Bell relation).
///   Strict:     additionally the revealed m' must equal the recomputed one.
enum class FinalCheck : std::uint8_t { Recomputed, Strict };

struct DetectionConfig {
  double test_round_fraction = 0.25;
  double equality_threshold = 0.85;
  std::size_t min_test_rounds = 32;
};

struct SessionConfig {
  std::size_t rounds = 16;
  std::size_t nonce_bits = kDefaultNonceBits;
  BellLabel bell = BellLabel::B00;
  RegisterMode register_mode = RegisterMode::Prf;
  std::optional<Registers> pinned_registers;
  Picoseconds alpha{0};
  double distance_budget_m = 1000.0;
  double signal_speed = kSpeedOfLight;
  AbortPolicy abort_policy = AbortPolicy::FirstFailure;
  FinalCheck final_check = FinalCheck::Recomputed;
  /// Verifier-side reflection test rounds (one-way entangled protocol only).
  std::optional<DetectionConfig> detection;
  /// Wait before a missing response counts as lost; zero selects the default
  /// 2*ceil(budget/c) + 2*alpha + 1 ns.
  Picoseconds response_timeout{0};

  Picoseconds effective_timeout() const;
};

/// Number of test rounds the verifier designates: ceil(fraction * n).
std::size_t test_round_count(const DetectionConfig& cfg, std::size_t rounds);

struct RoundRecord {
  int index = 0;
  Picoseconds t_s{-1};
  Picoseconds t_r{-1};
  std::optional<Bit> challenge;  // c_i for classical rounds and the prior QDB protocol
  std::optional<Bit> m;          // local outcome (verifier / PartyA) or m'_i (PartyB)
  std::optional<Bit> decoded;    // decoded response bit
  Bit a = 0;
  Bit b = 0;
  std::optional<Bit> c;
  bool ok = false;
  std::optional<double> estimate;  // meters
  bool test_round = false;
  std::optional<Basis> test_basis;
  std::optional<bool> test_equal;
};

struct DetectionResult {
  double equality_rate = 0.0;
  std::size_t samples = 0;
  bool flagged = false;
};

/// Equality rate over the recorded test rounds. flagged requires at least
/// min_test_rounds samples and a rate at or above the threshold.
DetectionResult detection_statistic(const std::vector<RoundRecord>& rounds, const DetectionConfig& cfg);

struct SessionState {
  ProtocolId protocol = ProtocolId::EqdbOneWay;
  Role role = Role::Verifier;
  Phase phase;
  SessionConfig config;
  SharedKey key;
  Nonce own_nonce;
  std::optional<Nonce> peer_nonce;
  Registers registers;
  bool registers_ready = false;

  // Committed value: r for PartyB of the mutual protocol, N for the Brands-Chaum prover.
  std::optional<Bits> r;
  std::optional<Salt> salt;
  std::optional<Commitment> peer_commitment;

  std::vector<RoundRecord> rounds;
  std::vector<bool> test_rounds;  // verifier's private designation
  std::optional<QuantumHandle> local_half;
  bool awaiting_reply = false;  // PartyB: step-5 sent, waiting for the step-6 echo
  std::optional<FinalReveal> reveal;  // what the peer opened, once received

  std::optional<DetectionResult> detection;
  std::optional<Verdict> verdict;

  std::size_t rounds_total() const noexcept { return config.rounds; }
  bool done() const noexcept { return phase.tag == PhaseTag::Done; }
};

/// What a behavior hook sees about the current round.
struct RoundView {
  ProtocolId protocol = ProtocolId::EqdbOneWay;
  Role role = Role::Prover;
  int round = 0;
  Bit a = 0;
  Bit b = 0;
  std::optional<Bit> c;
  std::optional<Bit> r;  // PartyB's committed bit for this round
  Picoseconds alpha{0};
  BellLabel bell = BellLabel::B00;
};

struct RapidReply {
  WireMessage message;
  Picoseconds delay{0};
};

struct RapidChallenge {
  WireMessage message;
  std::optional<QuantumHandle> local;  // half kept by the sender, if any
};

/// Hooks that let a dishonest party deviate from the honest transitions.
/// Returning nullopt keeps the honest behavior for that step.
class Behavior {
 public:
  virtual ~Behavior() = default;

  /// Rapid-phase answer of the responding party (prover, PartyB step 5, PartyA step 6).
  virtual std::optional<RapidReply> reply(const RoundView&, const WireMessage& /*incoming*/,
                                          QuantumRegistry&, Rng&) {
    return std::nullopt;
  }
  /// PartyA's step-4 particle.
  virtual std::optional<RapidChallenge> challenge(const RoundView&, QuantumRegistry&, Rng&) {
    return std::nullopt;
  }
};

/// Shared instance that never deviates.
Behavior& honest_behavior();

struct Outgoing {
  WireMessage message;
  Picoseconds delay{0};
  int round = 0;
};

struct TimerRequest {
  Picoseconds delay{0};
  int tag = 0;
};

struct Actions {
  std::vector<Outgoing> sends;
  std::vector<TimerRequest> timers;
};

/// Fresh session. Draws the party's nonce (and r or N for committing parties) from `rng`.
/// Throws InvalidArgument for a role the protocol does not have.
SessionState init_session(ProtocolId protocol, Role role, const SharedKey& key,
                          const SessionConfig& config, Rng& rng);

Actions start(SessionState& state, Picoseconds now, QuantumRegistry& registry, Rng& rng,
              Behavior& behavior = honest_behavior());

/// Throws ProtocolViolation for a message that is not legal in the current phase.
/// Messages reaching a finished session are ignored.
Actions on_message(SessionState& state, const WireMessage& msg, Picoseconds now,
                   QuantumRegistry& registry, Rng& rng, Behavior& behavior = honest_behavior());

Actions on_timer(SessionState& state, int tag, Picoseconds now);

/// Verdict of a finished (or aborted) session; computes it from the round
/// records if the session has not set one yet.
Verdict finalize(SessionState& state);

/// Honest response formulas for the classical baselines.
Bit hancke_kuhn_response(Bit c, Bit a, Bit b) noexcept;
Bit brands_chaum_response(Bit n, Bit c) noexcept;

/// Number of messages one full honest run exchanges.
std::size_t message_count(ProtocolId protocol, std::size_t rounds) noexcept;
/// Rapid-phase part of message_count.
std::size_t rapid_message_count(ProtocolId protocol, std::size_t rounds) noexcept;

/// Drives one session inside a Simulator.
class PartyEndpoint : public Endpoint {
 public:
  PartyEndpoint(SessionState state, Node peer, Behavior& behavior = honest_behavior())
      : state_(std::move(state)), peer_(peer), behavior_(&behavior) {}

  void start(Context& ctx) override;
  void on_message(Node from, const WireMessage& msg, int round, Context& ctx) override;
  void on_timer(int tag, Context& ctx) override;
  bool done() const override { return state_.done(); }

  SessionState& state() noexcept { return state_; }
  const SessionState& state() const noexcept { return state_; }

 private:
  void apply(const Actions& actions, Context& ctx);

  SessionState state_;
  Node peer_;
  Behavior* behavior_;
};

}  // namespace qdb

#pragma once

// Attack strategies. Distance-fraud strategies replace an honest party's
// rapid-phase answers through the Behavior hooks; mafia strategies sit on node M
// and receive every A<->B message while interception is on.

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "qdb/channel.hpp"
#include "qdb/protocol.hpp"

namespace qdb {

enum class StrategyId : std::uint8_t {
  HonestBaseline,
  DistanceFraudGuess,
  DistanceFraudReflect,
  MutualFraudUnentangled,
  MafiaPreAsk,
  MafiaInterceptResend,
};

std::string_view to_string(StrategyId s);
StrategyId strategy_from_string(std::string_view s);

bool is_distance_fraud(StrategyId s) noexcept;
bool is_mafia(StrategyId s) noexcept;
/// Whether `strategy` has a simulated implementation against `protocol`.
bool supports(ProtocolId protocol, StrategyId strategy) noexcept;

struct AttackOutcome {
  bool succeeded = false;
  bool detected = false;
  double claimed_distance = 0.0;  // meters; 0 when the verifier computed no bound
  double true_distance = 0.0;
};

/// Distance-fraud family: accepted with a bound strictly below the true distance.
/// Mafia family and the honest baseline: accepted.
AttackOutcome judge(StrategyId strategy, const Verdict& verdict, double true_distance, bool detected);

/// Throws InsufficientTestRounds when fewer than cfg.min_test_rounds test rounds were recorded.
DetectionResult reflection_detection(const std::vector<RoundRecord>& rounds, const DetectionConfig& cfg);

/// Answers before the challenge could have arrived with a guessed bit (and a guessed
/// basis for qubit responses). Against Hancke-Kuhn the prover answers a_i outright
/// whenever a_i = b_i and guesses otherwise.
class GuessingResponder : public Behavior {
 public:
  explicit GuessingResponder(Picoseconds advance) : advance_(advance) {}

  std::optional<RapidReply> reply(const RoundView& view, const WireMessage& incoming,
                                  QuantumRegistry& registry, Rng& rng) override;

 private:
  Picoseconds advance_;
};

/// Sends the received challenge particle straight back, skipping the processing delay.
class ReflectingResponder : public Behavior {
 public:
  explicit ReflectingResponder(Picoseconds delay = Picoseconds{0}) : delay_(delay) {}

  std::optional<RapidReply> reply(const RoundView& view, const WireMessage& incoming,
                                  QuantumRegistry& registry, Rng& rng) override;

 private:
  Picoseconds delay_;
};

/// PartyA of the mutual protocol sending |0>_{a_i} instead of an entangled half and
/// reflecting PartyB's step-5 qubit as its step-6 answer.
class UnentangledPartyA : public Behavior {
 public:
  explicit UnentangledPartyA(Picoseconds delay = Picoseconds{0}) : delay_(delay) {}

  std::optional<RapidChallenge> challenge(const RoundView& view, QuantumRegistry& registry,
                                          Rng& rng) override;
  std::optional<RapidReply> reply(const RoundView& view, const WireMessage& incoming,
                                  QuantumRegistry& registry, Rng& rng) override;

 private:
  Picoseconds delay_;
};

/// Node the mafia adversary authenticates to: the one-way verifier's node, or A
/// (intercept-resend) / B (pre-ask) for the mutual protocol.
Node mafia_target(ProtocolId protocol, StrategyId strategy, Node verifier_node = Node::A);

/// Common plumbing for the man-in-the-middle strategies.
class MitmEndpoint : public Endpoint {
 public:
  MitmEndpoint(ProtocolId protocol, Node target, std::size_t rounds, Picoseconds alpha);

  bool done() const override { return true; }
  std::size_t rounds_answered() const noexcept { return answered_; }

 protected:
  Node other() const noexcept { return target_ == Node::A ? Node::B : Node::A; }

  ProtocolId protocol_;
  Node target_;
  std::size_t rounds_;
  Picoseconds alpha_;
  std::size_t answered_ = 0;
};

/// Measures each challenge in a random basis and re-encodes the outcome in a random basis.
/// Against the mutual protocol it also replaces B's commitment with its own r~ and
/// answers |e_i xor r~_i>, then opens r~ with m' = e.
class InterceptResendMitm : public MitmEndpoint {
 public:
  InterceptResendMitm(ProtocolId protocol, Node target, std::size_t rounds, Picoseconds alpha);

  void on_message(Node from, const WireMessage& msg, int round, Context& ctx) override;

 private:
  Bits e_;
  Bits r_tilde_;
  Salt salt_{};
};

/// Queries the honest responder with guessed challenges before the real rapid phase,
/// then replays its answers to the target's real challenges.
class PreAskMitm : public MitmEndpoint {
 public:
  PreAskMitm(ProtocolId protocol, Node target, std::size_t rounds, Picoseconds alpha);

  void on_message(Node from, const WireMessage& msg, int round, Context& ctx) override;

 private:
  void send_query(Context& ctx);
  void on_message_mutual(Node from, const WireMessage& msg, Context& ctx);

  std::optional<WireMessage> held_;         // responder's opening message, released after pre-asking
  std::optional<WireMessage> final_reveal_;  // Brands-Chaum opening
  std::vector<WireMessage> answers_;         // responder answers in round order
  std::vector<WireMessage> particles_;       // mutual: A's step-4 particles
  std::size_t queried_ = 0;
};

}  // namespace qdb

#include <array>
#include <string>

#include "qdb/adversary.hpp"
#include "qdb/errors.hpp"

namespace qdb {

namespace {

struct StrategyName {
  StrategyId id;
  std::string_view canonical;
  std::string_view alias;
};

constexpr std::array<StrategyName, 6> kStrategyNames{{
    {StrategyId::HonestBaseline, "honest", "HonestBaseline"},
    {StrategyId::DistanceFraudGuess, "df-guess", "DistanceFraudGuess"},
    {StrategyId::DistanceFraudReflect, "df-reflect", "DistanceFraudReflect"},
    {StrategyId::MutualFraudUnentangled, "mutual-unentangled", "MutualFraudUnentangled"},
    {StrategyId::MafiaPreAsk, "mafia-preask", "MafiaPreAsk"},
    {StrategyId::MafiaInterceptResend, "mafia-intercept-resend", "MafiaInterceptResend"},
}};

const QuantumHandle& incoming_qubit(const WireMessage& msg) {
  if (const QuantumHandle* h = carried_qubit(msg)) return *h;
  throw InvalidArgument("reflection needs a qubit challenge, got " + std::string(kind_name(msg)));
}

}  // namespace

std::string_view to_string(StrategyId s) {
  for (const auto& e : kStrategyNames) {
    if (e.id == s) return e.canonical;
  }
  return "unknown";
}

StrategyId strategy_from_string(std::string_view s) {
  for (const auto& e : kStrategyNames) {
    if (s == e.canonical || s == e.alias) return e.id;
  }
  throw InvalidArgument("unknown attack: " + std::string(s));
}

bool is_distance_fraud(StrategyId s) noexcept {
  return s == StrategyId::DistanceFraudGuess || s == StrategyId::DistanceFraudReflect ||
         s == StrategyId::MutualFraudUnentangled;
}

bool is_mafia(StrategyId s) noexcept {
  return s == StrategyId::MafiaPreAsk || s == StrategyId::MafiaInterceptResend;
}

bool supports(ProtocolId protocol, StrategyId strategy) noexcept {
  switch (strategy) {
    case StrategyId::HonestBaseline:
    case StrategyId::MafiaPreAsk:
      return true;
    case StrategyId::DistanceFraudGuess:
      return protocol != ProtocolId::EqdbMutual;
    case StrategyId::DistanceFraudReflect:
      return protocol == ProtocolId::QdbPrior || protocol == ProtocolId::EqdbOneWay;
    case StrategyId::MutualFraudUnentangled:
      return protocol == ProtocolId::EqdbMutual;
    case StrategyId::MafiaInterceptResend:
      return is_quantum(protocol);
  }
  return false;
}

AttackOutcome judge(StrategyId strategy, const Verdict& verdict, double true_distance, bool detected) {
  AttackOutcome out;
  out.detected = detected;
  out.true_distance = true_distance;
  out.claimed_distance = verdict.distance_bound.value_or(0.0);
  if (is_distance_fraud(strategy)) {
    out.succeeded = verdict.accepted && verdict.distance_bound && *verdict.distance_bound < true_distance;
  } else {
    out.succeeded = verdict.accepted;
  }
  return out;
}

std::optional<RapidReply> GuessingResponder::reply(const RoundView& view, const WireMessage& /*incoming*/,
                                                   QuantumRegistry& registry, Rng& rng) {
  const Picoseconds delay = view.alpha - advance_;
  switch (view.protocol) {
    case ProtocolId::BrandsChaum:
      return RapidReply{ResponseBit{random_bit(rng)}, delay};
    case ProtocolId::HanckeKuhn: {
      const Bit guess = view.a == view.b ? view.a : random_bit(rng);
      return RapidReply{ResponseBit{guess}, delay};
    }
    case ProtocolId::QdbPrior:
    case ProtocolId::EqdbOneWay: {
      const Bit bit = random_bit(rng);
      const Basis basis = random_basis(rng);
      return RapidReply{QubitMsg{registry.make_single(encode(bit, basis))}, delay};
    }
    case ProtocolId::EqdbMutual:
      break;
  }
  throw InvalidArgument("guessing responder does not apply to the mutual protocol");
}

std::optional<RapidReply> ReflectingResponder::reply(const RoundView& /*view*/, const WireMessage& incoming,
                                                     QuantumRegistry& /*registry*/, Rng& /*rng*/) {
  return RapidReply{QubitMsg{incoming_qubit(incoming)}, delay_};
}

std::optional<RapidChallenge> UnentangledPartyA::challenge(const RoundView& view, QuantumRegistry& registry,
                                                           Rng& /*rng*/) {
  const QuantumHandle h = registry.make_single(encode(0, basis_from_bit(view.a)));
  return RapidChallenge{EprHalf{h}, std::nullopt};
}

std::optional<RapidReply> UnentangledPartyA::reply(const RoundView& /*view*/, const WireMessage& incoming,
                                                   QuantumRegistry& /*registry*/, Rng& /*rng*/) {
  return RapidReply{QubitMsg{incoming_qubit(incoming)}, delay_};
}

}  // namespace qdb

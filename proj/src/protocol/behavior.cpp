#include <array>
#include <string>

#include "qdb/errors.hpp"
#include "qdb/protocol.hpp"

namespace qdb {

namespace {

struct ProtocolName {
  ProtocolId id;
  std::string_view canonical;
  std::string_view alias;
};

constexpr std::array<ProtocolName, 5> kProtocolNames{{
    {ProtocolId::BrandsChaum, "brands-chaum", "BrandsChaum"},
    {ProtocolId::HanckeKuhn, "hancke-kuhn", "HanckeKuhn"},
    {ProtocolId::QdbPrior, "qdb-prior", "QdbPrior"},
    {ProtocolId::EqdbOneWay, "eqdb-oneway", "EqdbOneWay"},
    {ProtocolId::EqdbMutual, "eqdb-mutual", "EqdbMutual"},
}};

}  // namespace

std::string_view to_string(ProtocolId p) {
  for (const auto& e : kProtocolNames) {
    if (e.id == p) return e.canonical;
  }
  return "unknown";
}

ProtocolId protocol_from_string(std::string_view s) {
  for (const auto& e : kProtocolNames) {
    if (s == e.canonical || s == e.alias) return e.id;
  }
  throw InvalidArgument("unknown protocol: " + std::string(s));
}

bool is_quantum(ProtocolId p) noexcept {
  return p == ProtocolId::QdbPrior || p == ProtocolId::EqdbOneWay || p == ProtocolId::EqdbMutual;
}

std::string_view to_string(Role r) {
  switch (r) {
    case Role::Verifier: return "verifier";
    case Role::Prover: return "prover";
    case Role::PartyA: return "party-a";
    case Role::PartyB: return "party-b";
  }
  return "unknown";
}

bool role_valid_for(ProtocolId p, Role r) noexcept {
  if (p == ProtocolId::EqdbMutual) return r == Role::PartyA || r == Role::PartyB;
  return r == Role::Verifier || r == Role::Prover;
}

bool is_initiator(Role r) noexcept { return r == Role::Verifier || r == Role::PartyA; }

bool phase_before(const Phase& x, const Phase& y) noexcept {
  if (x.tag != y.tag) return static_cast<int>(x.tag) < static_cast<int>(y.tag);
  return x.tag == PhaseTag::Rapid && x.round < y.round;
}

std::string_view to_string(FailureReason f) {
  switch (f) {
    case FailureReason::None: return "none";
    case FailureReason::BitMismatch: return "bit-mismatch";
    case FailureReason::TimingExceeded: return "timing-exceeded";
    case FailureReason::CommitmentInvalid: return "commitment-invalid";
    case FailureReason::FinalCheckFailed: return "final-check-failed";
    case FailureReason::ReflectionDetected: return "reflection-detected";
  }
  return "unknown";
}

Behavior& honest_behavior() {
  static Behavior honest;
  return honest;
}

void PartyEndpoint::start(Context& ctx) {
  apply(qdb::start(state_, ctx.now(), ctx.registry(), ctx.rng(), *behavior_), ctx);
}

void PartyEndpoint::on_message(Node /*from*/, const WireMessage& msg, int /*round*/, Context& ctx) {
  apply(qdb::on_message(state_, msg, ctx.now(), ctx.registry(), ctx.rng(), *behavior_), ctx);
}

void PartyEndpoint::on_timer(int tag, Context& ctx) { apply(qdb::on_timer(state_, tag, ctx.now()), ctx); }

void PartyEndpoint::apply(const Actions& actions, Context& ctx) {
  for (const auto& out : actions.sends) ctx.send(peer_, out.message, out.delay, out.round);
  for (const auto& t : actions.timers) ctx.set_timer(t.delay, t.tag);
}

}  // namespace qdb

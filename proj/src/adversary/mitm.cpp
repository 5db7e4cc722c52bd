#include "qdb/adversary.hpp"
#include "qdb/errors.hpp"

namespace qdb {

Node mafia_target(ProtocolId protocol, StrategyId strategy, Node verifier_node) {
  if (protocol == ProtocolId::EqdbMutual) {
    return strategy == StrategyId::MafiaPreAsk ? Node::B : Node::A;
  }
  return verifier_node;
}

MitmEndpoint::MitmEndpoint(ProtocolId protocol, Node target, std::size_t rounds, Picoseconds alpha)
    : protocol_(protocol), target_(target), rounds_(rounds), alpha_(alpha) {
  if (target != Node::A && target != Node::B) throw InvalidArgument("mafia target must be A or B");
  if (rounds == 0) throw InvalidArgument("mafia adversary needs at least one round");
}

// ---- Intercept and resend ------------------------------------------------------------

InterceptResendMitm::InterceptResendMitm(ProtocolId protocol, Node target, std::size_t rounds,
                                         Picoseconds alpha)
    : MitmEndpoint(protocol, target, rounds, alpha) {
  if (!is_quantum(protocol)) throw InvalidArgument("intercept-resend needs a qubit challenge");
  if (protocol == ProtocolId::EqdbMutual && target != Node::A) {
    throw InvalidArgument("intercept-resend against the mutual protocol targets party A");
  }
}

void InterceptResendMitm::on_message(Node from, const WireMessage& msg, int round, Context& ctx) {
  const bool mutual = protocol_ == ProtocolId::EqdbMutual;

  if (from != target_) {
    if (std::holds_alternative<NonceMsg>(msg)) {
      ctx.send_direct(target_, msg);
    } else if (mutual && std::holds_alternative<CommitMsg>(msg)) {
      r_tilde_ = random_bits(ctx.rng(), rounds_);
      salt_ = random_salt(ctx.rng());
      ctx.send_direct(target_, CommitMsg{commit(r_tilde_, salt_)});
    }
    return;
  }

  if (std::holds_alternative<NonceMsg>(msg)) {
    ctx.send_direct(other(), msg);
    return;
  }

  const bool is_challenge = mutual ? std::holds_alternative<EprHalf>(msg)
                                   : (std::holds_alternative<EprHalf>(msg) || std::holds_alternative<QubitMsg>(msg));
  if (is_challenge) {
    const QuantumHandle& h = *carried_qubit(msg);
    const Basis measure_basis = random_basis(ctx.rng());
    const Basis resend_basis = random_basis(ctx.rng());
    const Bit e = ctx.registry().measure(h, measure_basis);
    e_.push_back(e);
    const Bit sent = mutual ? static_cast<Bit>(e ^ r_tilde_[e_.size() - 1]) : e;
    ctx.send_direct(target_, QubitMsg{ctx.registry().make_single(encode(sent, resend_basis))}, alpha_, round);
    ++answered_;
    return;
  }

  // A's step-6 echo in the mutual protocol: open r~ after the last round.
  if (mutual && std::holds_alternative<QubitMsg>(msg) && e_.size() == rounds_ && answered_ == rounds_) {
    ctx.send_direct(target_, FinalReveal{e_, r_tilde_, salt_}, alpha_, static_cast<int>(rounds_) + 1);
    ++answered_;
  }
}

// ---- Pre-ask -------------------------------------------------------------------------

PreAskMitm::PreAskMitm(ProtocolId protocol, Node target, std::size_t rounds, Picoseconds alpha)
    : MitmEndpoint(protocol, target, rounds, alpha) {
  if (protocol == ProtocolId::EqdbMutual && target != Node::B) {
    throw InvalidArgument("pre-ask against the mutual protocol targets party B");
  }
}

void PreAskMitm::send_query(Context& ctx) {
  ++queried_;
  const int round = static_cast<int>(queried_);
  switch (protocol_) {
    case ProtocolId::BrandsChaum:
    case ProtocolId::HanckeKuhn:
      ctx.send_direct(other(), ChallengeBit{random_bit(ctx.rng())}, Picoseconds{0}, round);
      return;
    case ProtocolId::QdbPrior:
    case ProtocolId::EqdbOneWay: {
      const Bit guess = random_bit(ctx.rng());
      const Basis basis = random_basis(ctx.rng());
      const QuantumHandle h = ctx.registry().make_single(encode(guess, basis));
      if (protocol_ == ProtocolId::QdbPrior) {
        ctx.send_direct(other(), QubitMsg{h}, Picoseconds{0}, round);
      } else {
        ctx.send_direct(other(), EprHalf{h}, Picoseconds{0}, round);
      }
      return;
    }
    case ProtocolId::EqdbMutual:
      break;
  }
}

void PreAskMitm::on_message(Node from, const WireMessage& msg, int round, Context& ctx) {
  if (protocol_ == ProtocolId::EqdbMutual) {
    on_message_mutual(from, msg, ctx);
    return;
  }

  if (from == target_) {
    if (std::holds_alternative<NonceMsg>(msg)) {
      ctx.send_direct(other(), msg);
      return;
    }
    // A real challenge: replay the stored answer for this round.
    if (answered_ >= answers_.size()) return;
    ctx.send_direct(target_, answers_[answered_], alpha_, round);
    ++answered_;
    if (answered_ == rounds_ && final_reveal_) {
      ctx.send_direct(target_, *final_reveal_, alpha_, static_cast<int>(rounds_) + 1);
    }
    return;
  }

  if (std::holds_alternative<NonceMsg>(msg) || std::holds_alternative<CommitMsg>(msg)) {
    held_ = msg;
    send_query(ctx);
    return;
  }
  if (std::holds_alternative<FinalReveal>(msg)) {
    final_reveal_ = msg;
    return;
  }
  answers_.push_back(msg);
  if (answers_.size() < rounds_) {
    send_query(ctx);
  } else if (held_) {
    ctx.send_direct(target_, *held_);
    held_.reset();
  }
}

void PreAskMitm::on_message_mutual(Node from, const WireMessage& msg, Context& ctx) {
  const Node a = other();  // the party pre-asked
  if (std::holds_alternative<NonceMsg>(msg) || std::holds_alternative<CommitMsg>(msg)) {
    ctx.send_direct(from == target_ ? a : target_, msg);
    return;
  }

  if (from == a) {
    if (std::holds_alternative<EprHalf>(msg)) {
      // Phase 1: keep A's particle, answer A with a guessed step-5 qubit.
      particles_.push_back(msg);
      const Bit guess = random_bit(ctx.rng());
      const Basis basis = random_basis(ctx.rng());
      ctx.send_direct(a, QubitMsg{ctx.registry().make_single(encode(guess, basis))}, alpha_,
                      static_cast<int>(particles_.size()));
    } else if (std::holds_alternative<QubitMsg>(msg)) {
      answers_.push_back(msg);
      if (answers_.size() == rounds_ && !particles_.empty()) {
        ctx.send_direct(target_, particles_.front(), Picoseconds{0}, 1);
      }
    }
    return;
  }

  // Phase 2: B's step-5 qubit arrives; replay A's stored step-6 answer and hand over the next particle.
  if (std::holds_alternative<QubitMsg>(msg) && answered_ < answers_.size()) {
    const int r = static_cast<int>(answered_) + 1;
    ctx.send_direct(target_, answers_[answered_], alpha_, r);
    ++answered_;
    if (answered_ < rounds_ && answered_ < particles_.size()) {
      ctx.send_direct(target_, particles_[answered_], alpha_, r + 1);
    }
  }
}

}  // namespace qdb

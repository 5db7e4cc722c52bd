#include <algorithm>
#include <cmath>
#include <numeric>

#include "qdb/errors.hpp"
#include "qdb/protocol.hpp"

namespace qdb {

namespace {

std::size_t idx(int round) { return static_cast<std::size_t>(round - 1); }

int n_of(const SessionState& s) { return static_cast<int>(s.config.rounds); }

RoundView view_of(const SessionState& s, int round) {
  RoundView v;
  v.protocol = s.protocol;
  v.role = s.role;
  v.round = round;
  v.a = s.registers.a[idx(round)];
  v.b = s.registers.b[idx(round)];
  if (s.registers.c) v.c = (*s.registers.c)[idx(round)];
  if (s.r) v.r = (*s.r)[idx(round)];
  v.alpha = s.config.alpha;
  v.bell = s.config.bell;
  return v;
}

RoundRecord& record(SessionState& s, int round) {
  while (s.rounds.size() < idx(round) + 1) {
    RoundRecord rec;
    rec.index = static_cast<int>(s.rounds.size()) + 1;
    const std::size_t k = s.rounds.size();
    rec.a = s.registers.a[k];
    rec.b = s.registers.b[k];
    if (s.registers.c) rec.c = (*s.registers.c)[k];
    rec.test_round = !s.test_rounds.empty() && s.test_rounds[k];
    s.rounds.push_back(rec);
  }
  return s.rounds[idx(round)];
}

[[noreturn]] void violation(const SessionState& s, const WireMessage& msg) {
  throw ProtocolViolation(std::string(to_string(s.protocol)) + " " + std::string(to_string(s.role)) +
                          ": unexpected " + std::string(kind_name(msg)) + " in phase " +
                          std::to_string(static_cast<int>(s.phase.tag)) + "/" +
                          std::to_string(s.phase.round));
}

const QuantumHandle& expect_qubit(const SessionState& s, const WireMessage& msg) {
  if (const auto* q = std::get_if<QubitMsg>(&msg)) return q->qubit;
  violation(s, msg);
}

double estimate_of(const RoundRecord& rec, const SessionConfig& cfg) {
  if ((rec.t_r - rec.t_s) < cfg.alpha) return 0.0;
  return rtt_to_distance(rec.t_s, rec.t_r, cfg.alpha, cfg.signal_speed);
}

bool timing_ok(const RoundRecord& rec, const SessionConfig& cfg) {
  return rec.estimate && *rec.estimate <= cfg.distance_budget_m;
}

std::optional<double> max_estimate(const SessionState& s) {
  std::optional<double> bound;
  for (const auto& rec : s.rounds) {
    if (rec.estimate) bound = bound ? std::max(*bound, *rec.estimate) : *rec.estimate;
  }
  return bound;
}

void conclude(SessionState& s, FailureReason reason) {
  Verdict v;
  v.accepted = reason == FailureReason::None;
  v.failure_reason = reason;
  v.distance_bound = max_estimate(s);
  s.verdict = v;
  s.phase = Phase{PhaseTag::Done, 0};
  s.local_half.reset();
}

void conclude_from_records(SessionState& s) {
  s.verdict.reset();
  finalize(s);
  s.phase = Phase{PhaseTag::Done, 0};
}

/// Records the arrival of the response for `round` and returns the round's timing verdict.
bool stop_clock(SessionState& s, RoundRecord& rec, Picoseconds now) {
  rec.t_r = now;
  rec.estimate = estimate_of(rec, s.config);
  return timing_ok(rec, s.config);
}

void derive(SessionState& s) {
  const std::size_t n = s.config.rounds;
  if (s.config.pinned_registers) {
    s.registers = *s.config.pinned_registers;
  } else if (s.protocol == ProtocolId::BrandsChaum) {
    s.registers = Registers{Bits(n, 0), Bits(n, 0), std::nullopt};
  } else {
    const bool init = is_initiator(s.role);
    const Nonce& nA = init ? s.own_nonce : *s.peer_nonce;
    const Nonce& nB = init ? *s.peer_nonce : s.own_nonce;
    const int count = s.protocol == ProtocolId::EqdbMutual ? 3 : 2;
    s.registers = derive_registers(s.config.register_mode, s.key, nA, nB, n, count);
  }
  s.registers_ready = true;
}

void arm(Actions& out, Picoseconds delay, int tag) { out.timers.push_back(TimerRequest{delay, tag}); }

/// PartyB's wait for the next particle; tag -i stands for "particle i has not arrived".
Picoseconds idle_timeout(const SessionState& s) {
  return s.config.effective_timeout() * static_cast<std::int64_t>(s.config.rounds + 1);
}

Picoseconds non_negative(Picoseconds d) { return d.count() < 0 ? Picoseconds{0} : d; }

// ---- Verifier (one-way protocols) ------------------------------------------------

void verifier_challenge(SessionState& s, int round, Picoseconds now, QuantumRegistry& reg, Rng& rng,
                        Actions& out) {
  RoundRecord& rec = record(s, round);
  rec.t_s = now;
  switch (s.protocol) {
    case ProtocolId::BrandsChaum:
    case ProtocolId::HanckeKuhn: {
      const Bit c = random_bit(rng);
      rec.challenge = c;
      out.sends.push_back(Outgoing{ChallengeBit{c}, Picoseconds{0}, round});
      break;
    }
    case ProtocolId::QdbPrior: {
      const Bit c = random_bit(rng);
      rec.challenge = c;
      const QuantumHandle h = reg.make_single(encode(c, basis_from_bit(rec.a)));
      out.sends.push_back(Outgoing{QubitMsg{h}, Picoseconds{0}, round});
      break;
    }
    case ProtocolId::EqdbOneWay: {
      auto [local, remote] = reg.make_bell(s.config.bell);
      s.local_half = local;
      out.sends.push_back(Outgoing{EprHalf{remote}, Picoseconds{0}, round});
      break;
    }
    case ProtocolId::EqdbMutual:
      throw InvalidArgument("mutual protocol has no verifier role");
  }
  s.phase = Phase{PhaseTag::Rapid, round};
  arm(out, s.config.effective_timeout(), round);
}

void verifier_response(SessionState& s, const WireMessage& msg, Picoseconds now, QuantumRegistry& reg,
                       Rng& rng, Actions& out) {
  const int i = s.phase.round;
  RoundRecord& rec = record(s, i);
  const Basis a = basis_from_bit(rec.a);
  const Basis b = basis_from_bit(rec.b);

  switch (s.protocol) {
    case ProtocolId::BrandsChaum:
    case ProtocolId::HanckeKuhn: {
      const auto* resp = std::get_if<ResponseBit>(&msg);
      if (resp == nullptr) violation(s, msg);
      rec.decoded = resp->value;
      // Brands-Chaum bits are checked once N is opened.
      rec.ok = s.protocol == ProtocolId::BrandsChaum ||
               resp->value == hancke_kuhn_response(*rec.challenge, rec.a, rec.b);
      break;
    }
    case ProtocolId::QdbPrior: {
      const QuantumHandle& h = expect_qubit(s, msg);
      rec.decoded = reg.measure(h, b);
      rec.ok = *rec.decoded == *rec.challenge;
      break;
    }
    case ProtocolId::EqdbOneWay: {
      const QuantumHandle& h = expect_qubit(s, msg);
      const QuantumHandle local = *s.local_half;
      s.local_half.reset();
      if (rec.test_round) {
        const Basis beta = random_basis(rng);
        const Bit u = reg.measure(local, beta);
        const Bit w = reg.measure(h, beta);
        rec.test_basis = beta;
        rec.m = u;
        rec.decoded = w;
        rec.test_equal = static_cast<Bit>(u ^ same_basis_flip(s.config.bell, beta)) == w;
        rec.ok = true;
      } else {
        rec.m = reg.measure(local, a);
        rec.decoded = reg.measure(h, b);
        rec.ok = *rec.decoded == static_cast<Bit>(*rec.m ^ same_basis_flip(s.config.bell, a));
      }
      break;
    }
    case ProtocolId::EqdbMutual:
      violation(s, msg);
  }

  const bool in_time = stop_clock(s, rec, now);
  if (s.config.abort_policy == AbortPolicy::FirstFailure && (!rec.ok || !in_time)) {
    conclude(s, !rec.ok ? FailureReason::BitMismatch : FailureReason::TimingExceeded);
    return;
  }
  if (i < n_of(s)) {
    verifier_challenge(s, i + 1, now, reg, rng, out);
  } else if (s.protocol == ProtocolId::BrandsChaum) {
    s.phase = Phase{PhaseTag::Final, 0};
    arm(out, s.config.effective_timeout(), n_of(s) + 1);
  } else {
    conclude_from_records(s);
  }
}

void brands_chaum_open(SessionState& s, const FinalReveal& reveal) {
  s.reveal = reveal;
  if (reveal.r.size() != s.config.rounds || !open_commitment(*s.peer_commitment, reveal.r, reveal.salt)) {
    conclude(s, FailureReason::CommitmentInvalid);
    return;
  }
  for (auto& rec : s.rounds) {
    rec.ok = rec.decoded && *rec.decoded == brands_chaum_response(reveal.r[idx(rec.index)], *rec.challenge);
  }
  conclude_from_records(s);
}

// ---- Prover (one-way protocols) --------------------------------------------------

void prover_reply(SessionState& s, const WireMessage& msg, QuantumRegistry& reg, Rng& rng,
                  Behavior& behavior, Actions& out) {
  const int i = s.phase.round;
  RoundRecord& rec = record(s, i);
  const Basis a = basis_from_bit(rec.a);
  const Basis b = basis_from_bit(rec.b);

  switch (s.protocol) {
    case ProtocolId::BrandsChaum:
    case ProtocolId::HanckeKuhn: {
      const auto* ch = std::get_if<ChallengeBit>(&msg);
      if (ch == nullptr) violation(s, msg);
      rec.challenge = ch->value;
      break;
    }
    case ProtocolId::QdbPrior:
      if (!std::holds_alternative<QubitMsg>(msg)) violation(s, msg);
      break;
    case ProtocolId::EqdbOneWay:
      if (!std::holds_alternative<EprHalf>(msg)) violation(s, msg);
      break;
    case ProtocolId::EqdbMutual:
      violation(s, msg);
  }

  std::optional<RapidReply> reply = behavior.reply(view_of(s, i), msg, reg, rng);
  if (!reply) {
    RapidReply honest{ResponseBit{0}, s.config.alpha};
    switch (s.protocol) {
      case ProtocolId::BrandsChaum:
        honest.message = ResponseBit{brands_chaum_response((*s.r)[idx(i)], *rec.challenge)};
        break;
      case ProtocolId::HanckeKuhn:
        honest.message = ResponseBit{hancke_kuhn_response(*rec.challenge, rec.a, rec.b)};
        break;
      case ProtocolId::QdbPrior: {
        const Bit c_prime = reg.measure(std::get<QubitMsg>(msg).qubit, a);
        rec.m = c_prime;
        honest.message = QubitMsg{reg.make_single(encode(c_prime, b))};
        break;
      }
      case ProtocolId::EqdbOneWay: {
        const Bit m_prime = reg.measure(std::get<EprHalf>(msg).qubit, a);
        rec.m = m_prime;
        honest.message = QubitMsg{reg.make_single(encode(m_prime, b))};
        break;
      }
      case ProtocolId::EqdbMutual:
        break;
    }
    reply = std::move(honest);
  }
  rec.ok = true;
  const Picoseconds delay = reply->delay;
  out.sends.push_back(Outgoing{std::move(reply->message), delay, i});

  if (i < n_of(s)) {
    s.phase = Phase{PhaseTag::Rapid, i + 1};
    return;
  }
  if (s.protocol == ProtocolId::BrandsChaum) {
    out.sends.push_back(Outgoing{FinalReveal{Bits{}, *s.r, *s.salt}, non_negative(delay), n_of(s) + 1});
  }
  conclude(s, FailureReason::None);
}

// ---- Mutual protocol ---------------------------------------------------------------

void party_a_send_ep(SessionState& s, int round, Picoseconds now, Picoseconds delay, QuantumRegistry& reg,
                     Rng& rng, Behavior& behavior, Actions& out) {
  RoundRecord& rec = record(s, round);
  std::optional<RapidChallenge> ch = behavior.challenge(view_of(s, round), reg, rng);
  if (!ch) {
    auto [local, remote] = reg.make_bell(s.config.bell);
    ch = RapidChallenge{EprHalf{remote}, local};
  }
  s.local_half = ch->local;
  rec.t_s = now + delay;
  out.sends.push_back(Outgoing{std::move(ch->message), delay, round});
  s.phase = Phase{PhaseTag::Rapid, round};
  arm(out, delay + s.config.effective_timeout(), round);
}

void party_a_step6(SessionState& s, const WireMessage& msg, Picoseconds now, QuantumRegistry& reg,
                   Rng& rng, Behavior& behavior, Actions& out) {
  const int i = s.phase.round;
  RoundRecord& rec = record(s, i);
  const QuantumHandle& h = expect_qubit(s, msg);
  const bool in_time = stop_clock(s, rec, now);
  rec.ok = true;

  std::optional<RapidReply> reply = behavior.reply(view_of(s, i), msg, reg, rng);
  if (!reply) {
    const Basis a = basis_from_bit(rec.a);
    rec.decoded = reg.measure(h, basis_from_bit(rec.b));
    Bit r_prime = *rec.decoded;
    if (s.local_half) {
      rec.m = reg.measure(*s.local_half, a);
      r_prime ^= static_cast<Bit>(*rec.m ^ same_basis_flip(s.config.bell, a));
    }
    reply = RapidReply{QubitMsg{reg.make_single(encode(r_prime, basis_from_bit(*rec.c)))},
                       s.config.alpha};
  }
  s.local_half.reset();

  if (!in_time && s.config.abort_policy == AbortPolicy::FirstFailure) {
    conclude(s, FailureReason::TimingExceeded);
    return;
  }
  const Picoseconds delay = reply->delay;
  out.sends.push_back(Outgoing{std::move(reply->message), delay, i});
  if (i < n_of(s)) {
    party_a_send_ep(s, i + 1, now, non_negative(delay), reg, rng, behavior, out);
  } else {
    s.phase = Phase{PhaseTag::Final, 0};
    arm(out, non_negative(delay) + s.config.effective_timeout(), n_of(s) + 1);
  }
}

void party_a_final(SessionState& s, const FinalReveal& reveal) {
  s.reveal = reveal;
  const std::size_t n = s.config.rounds;
  if (reveal.r.size() != n || !open_commitment(*s.peer_commitment, reveal.r, reveal.salt)) {
    conclude(s, FailureReason::CommitmentInvalid);
    return;
  }
  bool consistent = true;
  for (auto& rec : s.rounds) {
    const std::size_t k = idx(rec.index);
    if (!rec.decoded || !rec.m) {
      consistent = false;
      continue;
    }
    const Bit recomputed = static_cast<Bit>(*rec.decoded ^ reveal.r[k]);
    const Bit expected = static_cast<Bit>(*rec.m ^ same_basis_flip(s.config.bell, basis_from_bit(rec.a)));
    bool ok = recomputed == expected;
    if (s.config.final_check == FinalCheck::Strict) {
      ok = ok && reveal.m_prime.size() == n && reveal.m_prime[k] == recomputed;
    }
    rec.ok = ok;
    consistent = consistent && ok;
  }
  if (s.rounds.size() != n) consistent = false;
  if (!consistent) {
    conclude(s, FailureReason::FinalCheckFailed);
    return;
  }
  conclude_from_records(s);
}

void party_b_step5(SessionState& s, const WireMessage& msg, Picoseconds now, QuantumRegistry& reg,
                   Rng& rng, Behavior& behavior, Actions& out) {
  const int i = s.phase.round;
  const auto* ep = std::get_if<EprHalf>(&msg);
  if (ep == nullptr) violation(s, msg);
  RoundRecord& rec = record(s, i);

  std::optional<RapidReply> reply = behavior.reply(view_of(s, i), msg, reg, rng);
  if (!reply) {
    const Bit m_prime = reg.measure(ep->qubit, basis_from_bit(rec.a));
    rec.m = m_prime;
    const Bit out_bit = static_cast<Bit>(m_prime ^ (*s.r)[idx(i)]);
    reply = RapidReply{QubitMsg{reg.make_single(encode(out_bit, basis_from_bit(rec.b)))}, s.config.alpha};
  }
  rec.t_s = now + reply->delay;
  const Picoseconds delay = reply->delay;
  out.sends.push_back(Outgoing{std::move(reply->message), delay, i});
  s.awaiting_reply = true;
  arm(out, non_negative(delay) + s.config.effective_timeout(), i);
}

void party_b_step6(SessionState& s, const WireMessage& msg, Picoseconds now, QuantumRegistry& reg,
                   Actions& out) {
  const int i = s.phase.round;
  const QuantumHandle& h = expect_qubit(s, msg);
  RoundRecord& rec = record(s, i);
  rec.decoded = reg.measure(h, basis_from_bit(*rec.c));
  rec.ok = *rec.decoded == (*s.r)[idx(i)];
  const bool in_time = stop_clock(s, rec, now);
  s.awaiting_reply = false;

  if (s.config.abort_policy == AbortPolicy::FirstFailure && (!rec.ok || !in_time)) {
    conclude(s, !rec.ok ? FailureReason::BitMismatch : FailureReason::TimingExceeded);
    return;
  }
  if (i < n_of(s)) {
    s.phase = Phase{PhaseTag::Rapid, i + 1};
    arm(out, idle_timeout(s), -(i + 1));
    return;
  }
  Bits m_prime(s.config.rounds, 0);
  for (const auto& r : s.rounds) {
    if (r.m) m_prime[idx(r.index)] = *r.m;
  }
  out.sends.push_back(Outgoing{FinalReveal{std::move(m_prime), *s.r, *s.salt}, s.config.alpha, n_of(s) + 1});
  conclude_from_records(s);
}

void choose_test_rounds(SessionState& s, Rng& rng) {
  const std::size_t n = s.config.rounds;
  const std::size_t k = test_round_count(*s.config.detection, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t span = n - j;
    const std::size_t pick = j + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(span));
    std::swap(order[j], order[std::min(pick, n - 1)]);
  }
  s.test_rounds.assign(n, false);
  for (std::size_t j = 0; j < k; ++j) s.test_rounds[order[j]] = true;
}

}  // namespace

Picoseconds SessionConfig::effective_timeout() const {
  if (response_timeout.count() > 0) return response_timeout;
  const Picoseconds one_way = propagation_delay(distance_budget_m, signal_speed);
  return 2 * one_way + 2 * alpha + Picoseconds{1000};
}

std::size_t test_round_count(const DetectionConfig& cfg, std::size_t rounds) {
  if (cfg.test_round_fraction <= 0.0) return 0;
  const double k = std::ceil(cfg.test_round_fraction * static_cast<double>(rounds) - 1e-9);
  return std::min(rounds, static_cast<std::size_t>(k));
}

DetectionResult detection_statistic(const std::vector<RoundRecord>& rounds, const DetectionConfig& cfg) {
  DetectionResult out;
  std::size_t equal = 0;
  for (const auto& rec : rounds) {
    if (!rec.test_equal) continue;
    ++out.samples;
    equal += *rec.test_equal ? 1 : 0;
  }
  if (out.samples > 0) out.equality_rate = static_cast<double>(equal) / static_cast<double>(out.samples);
  out.flagged = out.samples >= cfg.min_test_rounds && out.samples > 0 &&
                out.equality_rate >= cfg.equality_threshold;
  return out;
}

Bit hancke_kuhn_response(Bit c, Bit a, Bit b) noexcept { return c ? b : a; }

Bit brands_chaum_response(Bit n, Bit c) noexcept { return static_cast<Bit>(n ^ c); }

std::size_t message_count(ProtocolId protocol, std::size_t rounds) noexcept {
  switch (protocol) {
    case ProtocolId::BrandsChaum: return 2 * rounds + 3;  // nonce, commit, final opening
    case ProtocolId::HanckeKuhn:
    case ProtocolId::QdbPrior:
    case ProtocolId::EqdbOneWay: return 2 * rounds + 2;   // two nonces
    case ProtocolId::EqdbMutual: return 3 * rounds + 4;   // two nonces, commit, final opening
  }
  return 0;
}

std::size_t rapid_message_count(ProtocolId protocol, std::size_t rounds) noexcept {
  return protocol == ProtocolId::EqdbMutual ? 3 * rounds : 2 * rounds;
}

SessionState init_session(ProtocolId protocol, Role role, const SharedKey& key,
                          const SessionConfig& config, Rng& rng) {
  if (!role_valid_for(protocol, role)) {
    throw InvalidArgument(std::string(to_string(protocol)) + " has no " + std::string(to_string(role)) +
                          " role");
  }
  const std::size_t n = config.rounds;
  if (n == 0) throw InvalidArgument("a session needs at least one round");
  if (config.nonce_bits == 0) throw InvalidArgument("nonce length must be positive");
  if (!(config.distance_budget_m > 0.0)) throw InvalidArgument("distance budget must be positive");
  if (config.alpha.count() < 0) throw InvalidArgument("processing delay must be non-negative");
  if (protocol == ProtocolId::EqdbMutual && config.register_mode == RegisterMode::TfResistant) {
    throw InvalidArgument("tf-resistant registers support exactly two registers");
  }
  if (const auto& pinned = config.pinned_registers) {
    const bool c_needed = protocol == ProtocolId::EqdbMutual;
    if (pinned->a.size() != n || pinned->b.size() != n || (c_needed && (!pinned->c || pinned->c->size() != n))) {
      throw InvalidArgument("pinned registers must all have length n");
    }
  }
  if (config.detection) {
    if (protocol != ProtocolId::EqdbOneWay) {
      throw InvalidArgument("reflection test rounds are supported on the one-way entangled protocol only");
    }
    const auto& d = *config.detection;
    if (!(d.test_round_fraction >= 0.0 && d.test_round_fraction <= 1.0) ||
        !(d.equality_threshold > 0.625 && d.equality_threshold < 1.0)) {
      throw InvalidArgument("detection fraction must lie in [0,1] and threshold in (5/8, 1)");
    }
    if (role == Role::Verifier && test_round_count(d, n) < d.min_test_rounds) {
      throw InsufficientTestRounds("configuration yields " + std::to_string(test_round_count(d, n)) +
                                   " test rounds, fewer than " + std::to_string(d.min_test_rounds));
    }
  }

  SessionState s;
  s.protocol = protocol;
  s.role = role;
  s.config = config;
  s.key = key;
  s.own_nonce = Nonce::random(rng, config.nonce_bits);
  if ((protocol == ProtocolId::EqdbMutual && role == Role::PartyB) ||
      (protocol == ProtocolId::BrandsChaum && role == Role::Prover)) {
    s.r = random_bits(rng, n);
    s.salt = random_salt(rng);
  }
  if (config.detection && role == Role::Verifier) choose_test_rounds(s, rng);
  return s;
}

Actions start(SessionState& s, Picoseconds /*now*/, QuantumRegistry& /*registry*/, Rng& /*rng*/,
              Behavior& /*behavior*/) {
  Actions out;
  if (is_initiator(s.role) && s.phase.tag == PhaseTag::Init && !s.peer_nonce) {
    out.sends.push_back(Outgoing{NonceMsg{s.own_nonce}, Picoseconds{0}, 0});
  }
  return out;
}

Actions on_message(SessionState& s, const WireMessage& msg, Picoseconds now, QuantumRegistry& reg,
                   Rng& rng, Behavior& behavior) {
  Actions out;
  if (s.done()) return out;

  switch (s.phase.tag) {
    case PhaseTag::Init: {
      if (const auto* nonce = std::get_if<NonceMsg>(&msg)) {
        if (s.peer_nonce) violation(s, msg);
        if (s.protocol == ProtocolId::BrandsChaum && s.role == Role::Verifier) violation(s, msg);
        s.peer_nonce = nonce->nonce;
        derive(s);
        if (s.role == Role::Prover) {
          if (s.protocol == ProtocolId::BrandsChaum) {
            out.sends.push_back(Outgoing{CommitMsg{commit(*s.r, *s.salt)}, Picoseconds{0}, 0});
          } else {
            out.sends.push_back(Outgoing{NonceMsg{s.own_nonce}, Picoseconds{0}, 0});
          }
          s.phase = Phase{PhaseTag::Rapid, 1};
        } else if (s.role == Role::PartyB) {
          out.sends.push_back(Outgoing{NonceMsg{s.own_nonce}, Picoseconds{0}, 0});
          out.sends.push_back(Outgoing{CommitMsg{commit(*s.r, *s.salt)}, Picoseconds{0}, 0});
          s.phase = Phase{PhaseTag::Rapid, 1};
          arm(out, idle_timeout(s), -1);
        } else if (s.role == Role::Verifier) {
          verifier_challenge(s, 1, now, reg, rng, out);
        }
        // PartyA waits for the commitment.
        return out;
      }
      if (const auto* cm = std::get_if<CommitMsg>(&msg)) {
        if (s.protocol == ProtocolId::BrandsChaum && s.role == Role::Verifier && !s.peer_commitment) {
          s.peer_commitment = cm->commitment;
          derive(s);
          verifier_challenge(s, 1, now, reg, rng, out);
          return out;
        }
        if (s.role == Role::PartyA && s.peer_nonce && !s.peer_commitment) {
          s.peer_commitment = cm->commitment;
          party_a_send_ep(s, 1, now, Picoseconds{0}, reg, rng, behavior, out);
          return out;
        }
      }
      violation(s, msg);
    }
    case PhaseTag::Rapid:
      // A later-stage message overtaking the awaited one means the awaited one was lost.
      if ((s.role == Role::Verifier && std::holds_alternative<FinalReveal>(msg) &&
           s.protocol == ProtocolId::BrandsChaum && s.phase.round == n_of(s)) ||
          (s.role == Role::PartyB && s.awaiting_reply && std::holds_alternative<EprHalf>(msg))) {
        conclude(s, FailureReason::TimingExceeded);
        return out;
      }
      switch (s.role) {
        case Role::Verifier: verifier_response(s, msg, now, reg, rng, out); break;
        case Role::Prover: prover_reply(s, msg, reg, rng, behavior, out); break;
        case Role::PartyA: party_a_step6(s, msg, now, reg, rng, behavior, out); break;
        case Role::PartyB:
          if (s.awaiting_reply) {
            party_b_step6(s, msg, now, reg, out);
          } else {
            party_b_step5(s, msg, now, reg, rng, behavior, out);
          }
          break;
      }
      return out;
    case PhaseTag::Final: {
      const auto* reveal = std::get_if<FinalReveal>(&msg);
      if (reveal == nullptr) violation(s, msg);
      if (s.role == Role::Verifier && s.protocol == ProtocolId::BrandsChaum) {
        brands_chaum_open(s, *reveal);
      } else if (s.role == Role::PartyA) {
        party_a_final(s, *reveal);
      } else {
        violation(s, msg);
      }
      return out;
    }
    case PhaseTag::Done:
      break;
  }
  return out;
}

Actions on_timer(SessionState& s, int tag, Picoseconds /*now*/) {
  Actions out;
  if (s.done()) return out;
  const bool final_wait = s.phase.tag == PhaseTag::Final && tag == n_of(s) + 1;
  bool rapid_wait = s.phase.tag == PhaseTag::Rapid && s.phase.round == tag;
  if (s.role == Role::PartyB) {
    const bool idle = s.phase.tag == PhaseTag::Rapid && s.phase.round == -tag && !s.awaiting_reply;
    rapid_wait = (rapid_wait && s.awaiting_reply) || idle;
  }
  if (s.role == Role::Prover) rapid_wait = false;
  if (final_wait || rapid_wait) conclude(s, FailureReason::TimingExceeded);
  return out;
}

Verdict finalize(SessionState& s) {
  if (s.verdict) return *s.verdict;

  Verdict v;
  v.distance_bound = max_estimate(s);
  if (s.role == Role::Prover) {
    v.accepted = true;
    s.verdict = v;
    return v;
  }

  FailureReason reason = FailureReason::None;
  if (s.rounds.size() < s.config.rounds) reason = FailureReason::TimingExceeded;
  for (const auto& rec : s.rounds) {
    if (!rec.ok) {
      reason = FailureReason::BitMismatch;
      break;
    }
  }
  if (reason == FailureReason::None) {
    for (const auto& rec : s.rounds) {
      if (!timing_ok(rec, s.config)) {
        reason = FailureReason::TimingExceeded;
        break;
      }
    }
  }
  if (s.config.detection && s.role == Role::Verifier) {
    s.detection = detection_statistic(s.rounds, *s.config.detection);
    if (reason == FailureReason::None && s.detection->flagged) reason = FailureReason::ReflectionDetected;
  }
  v.accepted = reason == FailureReason::None;
  v.failure_reason = reason;
  s.verdict = v;
  return v;
}

}  // namespace qdb

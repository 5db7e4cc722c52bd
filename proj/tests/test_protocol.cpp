#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <memory>

#include "qdb/errors.hpp"
#include "qdb/harness.hpp"
#include "qdb/protocol.hpp"

using namespace qdb;

namespace {

const ProtocolId kAll[] = {ProtocolId::BrandsChaum, ProtocolId::HanckeKuhn, ProtocolId::QdbPrior,
                           ProtocolId::EqdbOneWay, ProtocolId::EqdbMutual};

SharedKey test_key(std::uint64_t seed) {
  Rng rng = make_stream(seed, 0, "key");
  return SharedKey::random(rng);
}

std::pair<Role, Role> roles_of(ProtocolId p) {
  return p == ProtocolId::EqdbMutual ? std::pair{Role::PartyA, Role::PartyB} : std::pair{Role::Verifier, Role::Prover};
}

// Relays every A<->B message and lets a test rewrite final openings on the way.
class TamperingRelay : public Endpoint {
 public:
  std::function<void(FinalReveal&)> tamper;
  void on_message(Node from, const WireMessage& msg, int round, Context& ctx) override {
    WireMessage copy = msg;
    if (auto* fr = std::get_if<FinalReveal>(&copy); fr && tamper) tamper(*fr);
    ctx.send_direct(from == Node::A ? Node::B : Node::A, std::move(copy), Picoseconds{0}, round);
  }
  bool done() const override { return true; }
};

struct Run {
  Simulator sim;
  std::unique_ptr<PartyEndpoint> a;
  std::unique_ptr<PartyEndpoint> b;
  TrialTrace trace;

  Run(ProtocolId p, SessionConfig cfg, Topology topo = {}, std::uint64_t seed = 1, std::uint64_t trial = 0,
      Behavior& behavior_a = honest_behavior(), Behavior& behavior_b = honest_behavior())
      : sim(topo, ChannelConfig{cfg.alpha, cfg.distance_budget_m, 0.0}, seed, trial, true) {
    const auto [ra, rb] = roles_of(p);
    const SharedKey key = test_key(seed * 1000 + trial);
    a = std::make_unique<PartyEndpoint>(init_session(p, ra, key, cfg, sim.stream(Node::A)), Node::B, behavior_a);
    b = std::make_unique<PartyEndpoint>(init_session(p, rb, key, cfg, sim.stream(Node::B)), Node::A, behavior_b);
    sim.attach(Node::A, *a);
    sim.attach(Node::B, *b);
  }

  void go(bool require_both = true) {
    sim.require(Node::A);
    if (require_both) sim.require(Node::B);
    trace = sim.run();
  }
  Verdict va() { return finalize(a->state()); }
  Verdict vb() { return finalize(b->state()); }
};

SessionConfig config_n(std::size_t n) {
  SessionConfig c;
  c.rounds = n;
  return c;
}

}  // namespace

TEST_CASE("init_session sets up each role") {
  Rng rng = make_stream(1, 0, "init");
  const SharedKey key = test_key(1);
  const auto cfg = config_n(8);

  auto b = init_session(ProtocolId::EqdbMutual, Role::PartyB, key, cfg, rng);
  REQUIRE(b.r.has_value());
  CHECK(b.r->size() == 8);
  CHECK(b.salt.has_value());
  CHECK(b.phase.tag == PhaseTag::Init);
  CHECK(b.own_nonce.bits.size() == kDefaultNonceBits);

  QuantumRegistry reg(make_stream(1, 0, "registry"));
  const Nonce na = Nonce::random(rng);
  const Actions acts = on_message(b, NonceMsg{na}, Picoseconds{0}, reg, rng);
  REQUIRE(acts.sends.size() == 2);
  CHECK(std::holds_alternative<NonceMsg>(acts.sends[0].message));
  CHECK(std::holds_alternative<CommitMsg>(acts.sends[1].message));
  CHECK(open_commitment(std::get<CommitMsg>(acts.sends[1].message).commitment, *b.r, *b.salt));

  auto v = init_session(ProtocolId::EqdbOneWay, Role::Verifier, key, cfg, rng);
  CHECK_FALSE(v.r.has_value());
  CHECK_FALSE(v.salt.has_value());

  CHECK_THROWS_AS(init_session(ProtocolId::HanckeKuhn, Role::PartyB, key, cfg, rng), InvalidArgument);
  CHECK_THROWS_AS(init_session(ProtocolId::EqdbMutual, Role::Verifier, key, cfg, rng), InvalidArgument);
}

TEST_CASE("init_session validates the configuration") {
  Rng rng = make_stream(2, 0, "init");
  const SharedKey key = test_key(2);
  CHECK_THROWS_AS(init_session(ProtocolId::EqdbOneWay, Role::Verifier, key, config_n(0), rng), InvalidArgument);

  auto tf = config_n(8);
  tf.register_mode = RegisterMode::TfResistant;
  CHECK_THROWS_AS(init_session(ProtocolId::EqdbMutual, Role::PartyA, key, tf, rng), InvalidArgument);
  CHECK_NOTHROW(init_session(ProtocolId::EqdbOneWay, Role::Verifier, key, tf, rng));

  auto pinned = config_n(4);
  pinned.pinned_registers = Registers{{1, 0, 1, 0}, {1, 0}, std::nullopt};
  CHECK_THROWS_AS(init_session(ProtocolId::QdbPrior, Role::Verifier, key, pinned, rng), InvalidArgument);

  auto det = config_n(64);
  det.detection = DetectionConfig{};
  CHECK_THROWS_AS(init_session(ProtocolId::EqdbMutual, Role::PartyA, key, det, rng), InvalidArgument);
  CHECK_THROWS_AS(init_session(ProtocolId::EqdbOneWay, Role::Verifier, key, det, rng), InsufficientTestRounds);
  det.rounds = 128;
  CHECK_NOTHROW(init_session(ProtocolId::EqdbOneWay, Role::Verifier, key, det, rng));
  det.detection->equality_threshold = 0.6;
  CHECK_THROWS_AS(init_session(ProtocolId::EqdbOneWay, Role::Verifier, key, det, rng), InvalidArgument);
}

TEST_CASE("classical response formulas") {
  CHECK(hancke_kuhn_response(0, 1, 0) == 1);
  CHECK(hancke_kuhn_response(1, 1, 0) == 0);
  CHECK(brands_chaum_response(1, 1) == 0);
  CHECK(brands_chaum_response(1, 0) == 1);
}

TEST_CASE("honest runs of every protocol are accepted") {
  for (ProtocolId p : kAll) {
    CAPTURE(to_string(p));
    for (std::uint64_t trial = 0; trial < 25; ++trial) {
      Run run(p, config_n(16), {}, 3, trial);
      run.go();
      const Verdict va = run.va();
      const Verdict vb = run.vb();
      CHECK(va.accepted);
      CHECK(vb.accepted);
      CHECK(run.a->state().done());
      CHECK(run.b->state().done());
      CHECK(run.sim.registry().live_count() == 0);
      CHECK(run.trace.messages_sent == message_count(p, 16));
    }
  }
}

TEST_CASE("every Bell label gives an honest acceptance") {
  for (int l = 0; l < 4; ++l) {
    for (ProtocolId p : {ProtocolId::EqdbOneWay, ProtocolId::EqdbMutual}) {
      auto cfg = config_n(16);
      cfg.bell = static_cast<BellLabel>(l);
      for (std::uint64_t trial = 0; trial < 10; ++trial) {
        Run run(p, cfg, {}, 4, trial);
        run.go();
        CHECK(run.va().accepted);
        CHECK(run.vb().accepted);
      }
    }
  }
}

TEST_CASE("honest distance bound equals the separation") {
  Topology topo;
  topo.position_b = 150.0;
  Run run(ProtocolId::EqdbOneWay, config_n(8), topo);
  run.go();
  const Verdict v = run.va();
  REQUIRE(v.distance_bound.has_value());
  CHECK(*v.distance_bound >= 150.0);
  CHECK(*v.distance_bound - 150.0 <= 0.0003);
  for (const auto& rec : run.a->state().rounds) CHECK(rec.estimate == v.distance_bound);
}

TEST_CASE("the mutual protocol gives both parties a bound in one run") {
  Topology topo;
  topo.position_b = 1000.0;
  auto cfg = config_n(8);
  cfg.distance_budget_m = 2000.0;
  Run run(ProtocolId::EqdbMutual, cfg, topo);
  run.go();
  const Verdict va = run.va();
  const Verdict vb = run.vb();
  REQUIRE(va.distance_bound.has_value());
  REQUIRE(vb.distance_bound.has_value());
  CHECK(std::fabs(*va.distance_bound - 1000.0) <= 0.0003);
  CHECK(std::fabs(*vb.distance_bound - 1000.0) <= 0.0003);
}

TEST_CASE("mutual honest runs reveal A's outcomes bit for bit") {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Run run(ProtocolId::EqdbMutual, config_n(16), {}, 5, trial);
    run.go();
    const auto& a = run.a->state();
    REQUIRE(a.reveal.has_value());
    Bits m;
    for (const auto& rec : a.rounds) m.push_back(*rec.m);
    CHECK(m == a.reveal->m_prime);
  }
}

TEST_CASE("a prover beyond the budget fails on timing") {
  Topology topo;
  topo.position_b = 1500.0;
  for (ProtocolId p : kAll) {
    CAPTURE(to_string(p));
    SUBCASE("the response timer expires first") {
      Run run(p, config_n(4), topo);
      run.go(false);
      const Verdict v = run.va();
      CHECK_FALSE(v.accepted);
      CHECK(v.failure_reason == FailureReason::TimingExceeded);
      CHECK_FALSE(v.distance_bound.has_value());
    }
    SUBCASE("a patient verifier measures the excess") {
      auto cfg = config_n(4);
      cfg.response_timeout = Picoseconds{100'000'000};
      Run run(p, cfg, topo);
      run.go(false);
      const Verdict v = run.va();
      CHECK_FALSE(v.accepted);
      CHECK(v.failure_reason == FailureReason::TimingExceeded);
      REQUIRE(v.distance_bound.has_value());
      CHECK(std::fabs(*v.distance_bound - 1500.0) <= 0.0003);
    }
  }
}

TEST_CASE("one-way verifier decodes a returned qubit and checks it") {
  Rng vr = make_stream(6, 0, "party-A");
  Rng pr = make_stream(6, 0, "party-B");
  QuantumRegistry reg(make_stream(6, 0, "registry"));
  const SharedKey key = test_key(6);
  auto cfg = config_n(2);
  cfg.pinned_registers = Registers{{0, 1}, {1, 0}, std::nullopt};

  auto v = init_session(ProtocolId::EqdbOneWay, Role::Verifier, key, cfg, vr);
  const Actions first = start(v, Picoseconds{0}, reg, vr);
  REQUIRE(first.sends.size() == 1);
  const Actions ch = on_message(v, NonceMsg{Nonce::random(pr)}, Picoseconds{0}, reg, vr);
  REQUIRE(ch.sends.size() == 1);
  REQUIRE(ch.timers.size() == 1);
  const auto& half = std::get<EprHalf>(ch.sends[0].message).qubit;
  CHECK(v.phase == Phase{PhaseTag::Rapid, 1});

  // Prover side by hand: measure in a_1, answer in b_1.
  const Bit m_prime = reg.measure(half, Basis::Computational);
  const QuantumHandle back = reg.make_single(encode(m_prime, Basis::Hadamard));
  const Actions next = on_message(v, QubitMsg{back}, Picoseconds{5000}, reg, vr);
  const RoundRecord& rec = v.rounds[0];
  CHECK(rec.ok);
  CHECK(rec.m == m_prime);
  CHECK(rec.decoded == m_prime);
  CHECK(rec.t_s == Picoseconds{0});
  CHECK(rec.t_r == Picoseconds{5000});
  CHECK(v.phase == Phase{PhaseTag::Rapid, 2});
  REQUIRE(next.sends.size() == 1);

  // A wrong answer in round 2 aborts.
  const auto& half2 = std::get<EprHalf>(next.sends[0].message).qubit;
  const Bit m2 = reg.measure(half2, Basis::Hadamard);
  on_message(v, QubitMsg{reg.make_single(encode(static_cast<Bit>(m2 ^ 1), Basis::Computational))},
             Picoseconds{10000}, reg, vr);
  CHECK(v.done());
  CHECK(finalize(v).failure_reason == FailureReason::BitMismatch);
}

TEST_CASE("mutual PartyB answers with m' xor r and checks the echo") {
  Rng ar = make_stream(7, 0, "party-A");
  Rng br = make_stream(7, 0, "party-B");
  QuantumRegistry reg(make_stream(7, 0, "registry"));
  const SharedKey key = test_key(7);
  auto cfg = config_n(2);
  cfg.pinned_registers = Registers{{1, 0}, {0, 1}, Bits{1, 1}};
  auto b = init_session(ProtocolId::EqdbMutual, Role::PartyB, key, cfg, br);
  on_message(b, NonceMsg{Nonce::random(ar)}, Picoseconds{0}, reg, br);

  auto [local, remote] = reg.make_bell(BellLabel::B00);
  const Actions step5 = on_message(b, EprHalf{remote}, Picoseconds{100}, reg, br);
  REQUIRE(step5.sends.size() == 1);
  REQUIRE(step5.timers.size() == 1);
  const Bit m = reg.measure(local, Basis::Hadamard);
  const RoundRecord& rec = b.rounds[0];
  CHECK(rec.m == m);
  CHECK(rec.t_s == Picoseconds{100} + cfg.alpha);
  const auto& q = std::get<QubitMsg>(step5.sends[0].message).qubit;
  const Bit carried = reg.measure(q, Basis::Computational);
  CHECK(carried == static_cast<Bit>(m ^ (*b.r)[0]));
  CHECK(b.awaiting_reply);

  // Echo r_1 correctly in c_1.
  on_message(b, QubitMsg{reg.make_single(encode((*b.r)[0], Basis::Hadamard))}, Picoseconds{300}, reg, br);
  CHECK(b.rounds[0].ok);
  CHECK(b.phase == Phase{PhaseTag::Rapid, 2});

  // Round 2: a wrong echo aborts with BitMismatch.
  auto [l2, r2] = reg.make_bell(BellLabel::B00);
  on_message(b, EprHalf{r2}, Picoseconds{400}, reg, br);
  on_message(b, QubitMsg{reg.make_single(encode(static_cast<Bit>((*b.r)[1] ^ 1), Basis::Hadamard))},
             Picoseconds{600}, reg, br);
  CHECK(b.done());
  CHECK(finalize(b).failure_reason == FailureReason::BitMismatch);
  (void)l2;
}

TEST_CASE("mutual final phase rejects a bad opening") {
  Topology topo;
  topo.position_m = 0.0;
  SUBCASE("different r") {
    Run run(ProtocolId::EqdbMutual, config_n(8), topo);
    TamperingRelay relay;
    relay.tamper = [](FinalReveal& fr) { fr.r[3] ^= 1U; };
    run.sim.attach(Node::M, relay);
    run.sim.set_interception(true);
    run.go();
    CHECK(run.vb().accepted);
    const Verdict va = run.va();
    CHECK_FALSE(va.accepted);
    CHECK(va.failure_reason == FailureReason::CommitmentInvalid);
  }
  SUBCASE("flipped m' under the strict check") {
    auto cfg = config_n(8);
    cfg.final_check = FinalCheck::Strict;
    Run run(ProtocolId::EqdbMutual, cfg, topo);
    TamperingRelay relay;
    relay.tamper = [](FinalReveal& fr) { fr.m_prime[0] ^= 1U; };
    run.sim.attach(Node::M, relay);
    run.sim.set_interception(true);
    run.go();
    const Verdict va = run.va();
    CHECK_FALSE(va.accepted);
    CHECK(va.failure_reason == FailureReason::FinalCheckFailed);
  }
  SUBCASE("untouched opening passes the strict check") {
    auto cfg = config_n(8);
    cfg.final_check = FinalCheck::Strict;
    Run run(ProtocolId::EqdbMutual, cfg, topo);
    TamperingRelay relay;
    run.sim.attach(Node::M, relay);
    run.sim.set_interception(true);
    run.go();
    CHECK(run.va().accepted);
  }
}

TEST_CASE("Brands-Chaum rejects a forged opening of N") {
  Topology topo;
  topo.position_m = 0.0;
  Run run(ProtocolId::BrandsChaum, config_n(8), topo);
  TamperingRelay relay;
  relay.tamper = [](FinalReveal& fr) { fr.r[0] ^= 1U; };
  run.sim.attach(Node::M, relay);
  run.sim.set_interception(true);
  run.go();
  CHECK(run.va().failure_reason == FailureReason::CommitmentInvalid);
}

TEST_CASE("a missing response times out") {
  Rng rng = make_stream(8, 0, "party-A");
  QuantumRegistry reg(make_stream(8, 0, "registry"));
  auto v = init_session(ProtocolId::HanckeKuhn, Role::Verifier, test_key(8), config_n(4), rng);
  const Actions acts = on_message(v, NonceMsg{Nonce::random(rng)}, Picoseconds{0}, reg, rng);
  REQUIRE(acts.timers.size() == 1);
  CHECK(acts.timers[0].tag == 1);
  on_timer(v, 2, Picoseconds{1});  // stale tag: ignored
  CHECK_FALSE(v.done());
  on_timer(v, 1, acts.timers[0].delay);
  CHECK(v.done());
  CHECK(finalize(v).failure_reason == FailureReason::TimingExceeded);
}

TEST_CASE("finalize aggregates with the maximum estimate") {
  SessionState s;
  s.role = Role::Verifier;
  s.config = config_n(3);
  for (int i = 1; i <= 3; ++i) {
    RoundRecord r;
    r.index = i;
    r.ok = true;
    r.estimate = 10.0 * i;
    s.rounds.push_back(r);
  }
  Verdict v = finalize(s);
  CHECK(v.accepted);
  CHECK(v.failure_reason == FailureReason::None);
  CHECK(v.distance_bound == 30.0);

  s.verdict.reset();
  s.rounds[1].ok = false;
  v = finalize(s);
  CHECK_FALSE(v.accepted);
  CHECK(v.failure_reason == FailureReason::BitMismatch);

  s.verdict.reset();
  s.rounds[1].ok = true;
  s.rounds[2].estimate = 5000.0;
  v = finalize(s);
  CHECK(v.failure_reason == FailureReason::TimingExceeded);
}

TEST_CASE("tally policy records every round") {
  ExperimentConfig cfg;
  cfg.protocol = ProtocolId::EqdbOneWay;
  cfg.attack = StrategyId::MafiaInterceptResend;
  cfg.n = 32;
  cfg.abort_policy = AbortPolicy::Tally;
  const auto r = run_trial(cfg, 0);
  CHECK(r.party(Node::A).rounds.size() == 32);
}

TEST_CASE("out-of-phase messages are protocol violations") {
  Rng rng = make_stream(9, 0, "party-A");
  QuantumRegistry reg(make_stream(9, 0, "registry"));
  auto v = init_session(ProtocolId::EqdbOneWay, Role::Verifier, test_key(9), config_n(2), rng);
  CHECK_THROWS_AS(on_message(v, ResponseBit{1}, Picoseconds{0}, reg, rng), ProtocolViolation);
  CHECK_THROWS_AS(on_message(v, FinalReveal{}, Picoseconds{0}, reg, rng), ProtocolViolation);
  on_message(v, NonceMsg{Nonce::random(rng)}, Picoseconds{0}, reg, rng);
  CHECK_THROWS_AS(on_message(v, NonceMsg{Nonce::random(rng)}, Picoseconds{0}, reg, rng), ProtocolViolation);
  CHECK_THROWS_AS(on_message(v, ResponseBit{0}, Picoseconds{0}, reg, rng), ProtocolViolation);
}

TEST_CASE("random message sequences never move a phase backwards") {
  Rng rng = make_stream(10, 0, "fuzz");
  for (int trial = 0; trial < 400; ++trial) {
    const ProtocolId p = kAll[rng() % 5];
    const auto [ra, rb] = roles_of(p);
    const Role role = random_bit(rng) ? ra : rb;
    QuantumRegistry reg(make_stream(10, trial, "registry"));
    auto s = init_session(p, role, test_key(10), config_n(3), rng);
    start(s, Picoseconds{0}, reg, rng);
    Phase last = s.phase;
    for (int step = 0; step < 12; ++step) {
      WireMessage msg;
      switch (rng() % 7) {
        case 0: msg = NonceMsg{Nonce::random(rng)}; break;
        case 1: msg = CommitMsg{commit({1, 0, 1}, random_salt(rng))}; break;
        case 2: msg = ChallengeBit{random_bit(rng)}; break;
        case 3: msg = ResponseBit{random_bit(rng)}; break;
        case 4: msg = QubitMsg{reg.make_single(encode(random_bit(rng), random_basis(rng)))}; break;
        case 5: msg = EprHalf{reg.make_bell(BellLabel::B00).second}; break;
        default: msg = FinalReveal{{1, 0, 1}, {0, 1, 1}, random_salt(rng)}; break;
      }
      try {
        on_message(s, msg, Picoseconds{step * 1000}, reg, rng);
      } catch (const ProtocolViolation&) {
        CHECK(s.phase == last);
        continue;
      }
      CHECK_FALSE(phase_before(s.phase, last));
      last = s.phase;
    }
  }
}

TEST_CASE("phase order") {
  CHECK(phase_before({PhaseTag::Init, 0}, {PhaseTag::Rapid, 1}));
  CHECK(phase_before({PhaseTag::Rapid, 1}, {PhaseTag::Rapid, 2}));
  CHECK(phase_before({PhaseTag::Rapid, 9}, {PhaseTag::Final, 0}));
  CHECK(phase_before({PhaseTag::Final, 0}, {PhaseTag::Done, 0}));
  CHECK_FALSE(phase_before({PhaseTag::Done, 0}, {PhaseTag::Init, 0}));
  CHECK_FALSE(phase_before({PhaseTag::Rapid, 2}, {PhaseTag::Rapid, 2}));
}

TEST_CASE("message counts") {
  for (std::size_t n : {1, 8, 16}) {
    CHECK(message_count(ProtocolId::HanckeKuhn, n) == 2 * n + 2);
    CHECK(message_count(ProtocolId::QdbPrior, n) == 2 * n + 2);
    CHECK(message_count(ProtocolId::EqdbOneWay, n) == 2 * n + 2);
    CHECK(message_count(ProtocolId::BrandsChaum, n) == 2 * n + 3);
    CHECK(message_count(ProtocolId::EqdbMutual, n) == 3 * n + 4);
    CHECK(rapid_message_count(ProtocolId::EqdbMutual, n) == 3 * n);
    CHECK(rapid_message_count(ProtocolId::EqdbOneWay, n) == 2 * n);
  }
}

TEST_CASE("role reversal bounds the other party independently") {
  ExperimentConfig cfg;
  cfg.protocol = ProtocolId::EqdbOneWay;
  cfg.n = 8;
  cfg.channel.alpha = Picoseconds{0};
  const auto [first, second] = run_with_role_reversal(cfg, 0);
  CHECK(first.party(Node::A).role == Role::Verifier);
  CHECK(second.party(Node::B).role == Role::Verifier);
  CHECK(first.party(Node::A).verdict.accepted);
  CHECK(second.party(Node::B).verdict.accepted);
  REQUIRE(second.party(Node::B).verdict.distance_bound.has_value());
  CHECK(std::fabs(*second.party(Node::B).verdict.distance_bound - 150.0) <= 0.0003);
  CHECK(first.registers.a != second.registers.a);
  CHECK(first.trace.messages_sent + second.trace.messages_sent == 4 * 8 + 4);
}

TEST_CASE("protocol and role names") {
  for (ProtocolId p : kAll) CHECK(protocol_from_string(to_string(p)) == p);
  CHECK(protocol_from_string("EqdbMutual") == ProtocolId::EqdbMutual);
  CHECK_THROWS(protocol_from_string("swiss-knife"));
  CHECK(role_valid_for(ProtocolId::QdbPrior, Role::Prover));
  CHECK_FALSE(role_valid_for(ProtocolId::QdbPrior, Role::PartyA));
  CHECK(is_quantum(ProtocolId::QdbPrior));
  CHECK_FALSE(is_quantum(ProtocolId::BrandsChaum));
}

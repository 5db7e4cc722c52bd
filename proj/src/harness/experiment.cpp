#include <cmath>
#include <memory>
#include <string>

#include "qdb/errors.hpp"
#include "qdb/harness.hpp"

namespace qdb {

namespace {

Node opposite(Node n) { return n == Node::A ? Node::B : Node::A; }

SessionConfig session_config(const ExperimentConfig& cfg) {
  SessionConfig s;
  s.rounds = cfg.n;
  s.nonce_bits = cfg.nonce_bits;
  s.bell = cfg.bell;
  s.register_mode = cfg.register_mode;
  s.pinned_registers = cfg.registers;
  s.alpha = cfg.channel.alpha;
  s.distance_budget_m = cfg.channel.distance_budget_m;
  s.signal_speed = cfg.topology.signal_speed;
  s.abort_policy = cfg.abort_policy;
  s.final_check = cfg.final_check;
  s.detection = cfg.detection;
  return s;
}

PartyReport report_of(Node node, PartyEndpoint& ep) {
  PartyReport r;
  r.node = node;
  r.role = ep.state().role;
  r.finished = ep.done();
  r.verdict = finalize(ep.state());
  r.rounds = ep.state().rounds;
  r.detection = ep.state().detection;
  r.reveal = ep.state().reveal;
  return r;
}

std::unique_ptr<MitmEndpoint> make_mitm(const ExperimentConfig& cfg, Node target) {
  if (cfg.attack == StrategyId::MafiaPreAsk) {
    return std::make_unique<PreAskMitm>(cfg.protocol, target, cfg.n, cfg.channel.alpha);
  }
  return std::make_unique<InterceptResendMitm>(cfg.protocol, target, cfg.n, cfg.channel.alpha);
}

}  // namespace

std::string_view to_string(OutputFormat f) { return f == OutputFormat::Csv ? "csv" : "json"; }

OutputFormat output_format_from_string(std::string_view s) {
  if (s == "csv") return OutputFormat::Csv;
  if (s == "json") return OutputFormat::Json;
  throw InvalidArgument("unknown output format: " + std::string(s));
}

void ExperimentConfig::validate() const {
  if (trials < 1) throw InvalidArgument("trials must be at least 1");
  if (n < 1) throw InvalidArgument("n must be at least 1");
  if (!supports(protocol, attack)) {
    throw InvalidArgument(std::string(to_string(attack)) + " is not simulated against " +
                          std::string(to_string(protocol)));
  }
  if (registers) {
    if (registers->a.size() != n || registers->b.size() != n || (registers->c && registers->c->size() != n)) {
      throw InvalidArgument("pinned registers must have length n");
    }
    if (protocol == ProtocolId::EqdbMutual && !registers->c) {
      throw InvalidArgument("the mutual protocol needs a pinned c register as well");
    }
  }
  if (detection && protocol != ProtocolId::EqdbOneWay) {
    throw InvalidArgument("reflection test rounds are supported on the one-way entangled protocol only");
  }
  if (verifier_node != Node::A && verifier_node != Node::B) {
    throw InvalidArgument("the verifier must sit on node A or B");
  }
  if (channel.alpha.count() < 0) throw InvalidArgument("alpha must be non-negative");
  if (!(channel.distance_budget_m > 0.0)) throw InvalidArgument("distance budget must be positive");
  if (!(channel.loss_probability >= 0.0 && channel.loss_probability <= 1.0)) {
    throw InvalidArgument("loss probability must lie in [0, 1]");
  }
  if (!(topology.signal_speed > 0.0)) throw InvalidArgument("signal speed must be positive");
}

const PartyReport& TrialResult::party(Node node) const {
  for (const auto& p : parties) {
    if (p.node == node) return p;
  }
  throw InvalidArgument("trial has no party on node " + std::string(to_string(node)));
}

TrialResult run_trial(const ExperimentConfig& cfg, std::uint64_t trial, bool record_trace,
                      std::string_view run_label) {
  Topology topology = cfg.topology;
  const bool mafia = is_mafia(cfg.attack);
  const bool mutual = cfg.protocol == ProtocolId::EqdbMutual;
  const Node verifier = mutual ? Node::A : cfg.verifier_node;
  const Node target = mafia ? mafia_target(cfg.protocol, cfg.attack, verifier) : verifier;
  if (mafia && !topology.position_m) topology.position_m = topology.position(target);

  std::string label(run_label);
  Rng key_rng = make_stream(cfg.seed, trial, "key");
  const SharedKey key = SharedKey::random(key_rng, cfg.key_bytes);
  Simulator sim(topology, cfg.channel, cfg.seed, trial, record_trace, label);
  const SessionConfig scfg = session_config(cfg);

  const double true_distance = topology.distance(Node::A, Node::B);
  const Picoseconds one_way = propagation_delay(true_distance, topology.signal_speed);

  std::unique_ptr<Behavior> dishonest;
  switch (cfg.attack) {
    case StrategyId::DistanceFraudGuess:
      dishonest = std::make_unique<GuessingResponder>(cfg.guess_advance.value_or(one_way));
      break;
    case StrategyId::DistanceFraudReflect:
      dishonest = std::make_unique<ReflectingResponder>();
      break;
    case StrategyId::MutualFraudUnentangled:
      dishonest = std::make_unique<UnentangledPartyA>();
      break;
    default:
      break;
  }
  Behavior& cheat = dishonest ? *dishonest : honest_behavior();

  const Role role_a = mutual ? Role::PartyA : (verifier == Node::A ? Role::Verifier : Role::Prover);
  const Role role_b = mutual ? Role::PartyB : (verifier == Node::B ? Role::Verifier : Role::Prover);
  // The dishonest party is the prover (one-way) or PartyA (mutual).
  const bool a_cheats = dishonest && (mutual || role_a == Role::Prover);
  const bool b_cheats = dishonest && !a_cheats;

  PartyEndpoint party_a(init_session(cfg.protocol, role_a, key, scfg, sim.stream(Node::A)), Node::B,
                        a_cheats ? cheat : honest_behavior());
  PartyEndpoint party_b(init_session(cfg.protocol, role_b, key, scfg, sim.stream(Node::B)), Node::A,
                        b_cheats ? cheat : honest_behavior());
  sim.attach(Node::A, party_a);
  sim.attach(Node::B, party_b);

  std::unique_ptr<MitmEndpoint> mitm;
  if (mafia) {
    mitm = make_mitm(cfg, target);
    sim.attach(Node::M, *mitm);
    sim.set_interception(true);
    sim.require(target);
  } else if (mutual) {
    sim.require(Node::A);
    sim.require(Node::B);
  } else {
    sim.require(verifier);
  }

  TrialResult result;
  result.trial = trial;
  result.trace = sim.run();
  result.parties.push_back(report_of(Node::A, party_a));
  result.parties.push_back(report_of(Node::B, party_b));
  result.registers = party_a.state().registers_ready ? party_a.state().registers : party_b.state().registers;

  const PartyReport& judged = result.party(cfg.attack == StrategyId::MutualFraudUnentangled ? Node::B : target);
  const bool detected = judged.detection && judged.detection->flagged;
  result.outcome = judge(cfg.attack, judged.verdict, true_distance, detected);
  if (cfg.attack == StrategyId::HonestBaseline && mutual) {
    result.outcome.succeeded = result.party(Node::A).verdict.accepted && result.party(Node::B).verdict.accepted;
  }
  return result;
}

std::pair<TrialResult, TrialResult> run_with_role_reversal(const ExperimentConfig& config,
                                                           std::uint64_t trial, bool record_trace) {
  if (config.protocol == ProtocolId::EqdbMutual) {
    throw InvalidArgument("role reversal applies to one-way protocols");
  }
  ExperimentConfig second = config;
  second.verifier_node = opposite(config.verifier_node);
  TrialResult first_run = run_trial(config, trial, record_trace, "");
  TrialResult second_run = run_trial(second, trial, record_trace, "reversed/");
  return {std::move(first_run), std::move(second_run)};
}

AttackStats run_trials(const ExperimentConfig& config) {
  config.validate();
  AttackStats stats;
  stats.protocol = std::string(to_string(config.protocol));
  stats.attack = std::string(to_string(config.attack));
  stats.n = config.n;
  if (config.registers) {
    stats.hd_ab = hamming_distance(config.registers->a, config.registers->b);
    if (config.registers->c) stats.hd_bc = hamming_distance(config.registers->b, *config.registers->c);
  }
  stats.trials = config.trials;
  stats.seed = config.seed;
  stats.closed_form = closed_form_for(config);

  std::uint64_t flagged = 0;
  for (std::uint64_t t = 0; t < config.trials; ++t) {
    try {
      const TrialResult r = run_trial(config, t);
      stats.successes += r.outcome.succeeded ? 1 : 0;
      flagged += r.outcome.detected ? 1 : 0;
    } catch (const TrialError&) {
      throw;
    } catch (const std::exception& e) {
      throw TrialError(t, e.what());
    }
  }
  stats.empirical = static_cast<double>(stats.successes) / static_cast<double>(stats.trials);
  const double p = stats.closed_form;
  const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(stats.trials));
  if (se > 0.0) {
    stats.z = (stats.empirical - p) / se;
  } else {
    stats.z = stats.empirical == p ? 0.0 : std::copysign(INFINITY, stats.empirical - p);
  }
  if (config.detection) stats.detect_rate = static_cast<double>(flagged) / static_cast<double>(config.trials);
  return stats;
}

}  // namespace qdb

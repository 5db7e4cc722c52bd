// Acceptance run: one [PASS]/[FAIL] line per criterion, exit status 1 if any fails.

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "qdb/crypto.hpp"
#include "qdb/harness.hpp"
#include "qdb/rng.hpp"

using namespace qdb;

namespace {

struct Check {
  bool ok = true;
  std::vector<std::string> notes;

  void expect(bool cond, const std::string& what) {
    if (!cond) ok = false;
    notes.push_back(std::string(cond ? "ok   " : "FAIL ") + what);
  }
};

std::string fmt(const char* spec, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, x);
  return buf;
}

std::string describe(const AttackStats& s) {
  std::ostringstream out;
  out << s.protocol << " " << s.attack << " n=" << s.n;
  if (s.hd_ab) out << " hd_ab=" << *s.hd_ab;
  if (s.hd_bc) out << " hd_bc=" << *s.hd_bc;
  out << " trials=" << s.trials << " empirical=" << fmt("%.6g", s.empirical)
      << " expected=" << fmt("%.6g", s.closed_form) << " band=" << fmt("%.3g", acceptance_band(s.closed_form, s.trials))
      << " z=" << fmt("%.3f", s.z);
  return out.str();
}

ExperimentConfig make(ProtocolId p, StrategyId s, std::size_t n, std::uint64_t trials, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.protocol = p;
  cfg.attack = s;
  cfg.n = n;
  cfg.trials = trials;
  cfg.seed = seed;
  return cfg;
}

// Runs cfg and checks the estimate against an independently written expectation.
void expect_band(Check& c, const ExperimentConfig& cfg, double expected) {
  const AttackStats s = run_trials(cfg);
  c.expect(std::fabs(s.closed_form - expected) <= 1e-15 && within_band(s), describe(s));
}

bool exact(double x, double y) { return std::fabs(x - y) <= 1e-12; }

std::string run_cli(const std::string& args) {
  const std::string cmd = std::string(QDB_SIM_PATH) + " " + args;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return "<popen failed>";
  std::string out;
  std::array<char, 4096> buf{};
  std::size_t got = 0;
  while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), got);
  const int status = pclose(pipe);
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) out += "<exit " + std::to_string(status) + ">";
  return out;
}

constexpr std::uint64_t kMonteCarloTrials = 200000;

Check c1_completeness() {
  Check c;
  const auto start = std::chrono::steady_clock::now();
  for (ProtocolId p : {ProtocolId::BrandsChaum, ProtocolId::HanckeKuhn, ProtocolId::QdbPrior, ProtocolId::EqdbOneWay,
                       ProtocolId::EqdbMutual}) {
    const auto s = run_trials(make(p, StrategyId::HonestBaseline, 16, 10000, 101));
    c.expect(s.successes == 10000 && s.empirical == 1.0,
             s.protocol + " honest n=16: " + std::to_string(s.successes) + "/10000 accepted");
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.expect(secs < 30.0, "total runtime " + fmt("%.2f", secs) + " s (target < 30 s)");
  return c;
}

Check c2_distance_recovery() {
  Check c;
  for (ProtocolId p : {ProtocolId::EqdbOneWay, ProtocolId::EqdbMutual}) {
    for (double d : {1.0, 150.0, 10000.0}) {
      ExperimentConfig cfg = make(p, StrategyId::HonestBaseline, 16, 1, 102);
      cfg.channel.alpha = Picoseconds{0};
      cfg.channel.distance_budget_m = 20000.0;
      cfg.topology.position_a = 0.0;
      cfg.topology.position_b = d;
      double worst = 0.0;
      bool all_present = true;
      bool accepted = true;
      std::size_t parties_with_bounds = 0;
      for (std::uint64_t t = 0; t < 25; ++t) {
        const TrialResult r = run_trial(cfg, t);
        std::size_t with_bound = 0;
        for (const auto& party : r.parties) {
          if (p == ProtocolId::EqdbOneWay && party.role != Role::Verifier) continue;
          accepted = accepted && party.verdict.accepted;
          if (party.verdict.distance_bound) ++with_bound;
          for (const auto& rec : party.rounds) {
            if (!rec.estimate) {
              all_present = false;
              continue;
            }
            worst = std::max(worst, std::fabs(*rec.estimate - d));
          }
        }
        parties_with_bounds = t == 0 ? with_bound : std::min(parties_with_bounds, with_bound);
      }
      const std::size_t needed = p == ProtocolId::EqdbMutual ? 2 : 1;
      c.expect(all_present && accepted && worst <= 0.0003 && parties_with_bounds == needed,
               std::string(to_string(p)) + " d=" + fmt("%g", d) + " m: max |estimate - d| = " + fmt("%.3e", worst) +
                   " m over 25 runs, parties with a bound per run: " + std::to_string(parties_with_bounds));
    }
  }
  return c;
}

Check c3_intercept_resend() {
  Check c;
  for (ProtocolId p : {ProtocolId::EqdbOneWay, ProtocolId::EqdbMutual}) {
    for (std::size_t n : {1U, 4U, 8U}) {
      expect_band(c, make(p, StrategyId::MafiaInterceptResend, n, kMonteCarloTrials, 103), std::pow(5.0 / 8.0, n));
    }
  }
  return c;
}

Check c4_preask() {
  Check c;
  for (ProtocolId p : {ProtocolId::EqdbOneWay, ProtocolId::EqdbMutual}) {
    for (std::size_t n : {1U, 4U, 8U}) {
      expect_band(c, make(p, StrategyId::MafiaPreAsk, n, kMonteCarloTrials, 104), std::pow(0.5, n));
    }
  }
  return c;
}

Check c5_reflect_prior() {
  Check c;
  for (std::size_t hd : {0U, 1U, 2U, 4U}) {
    ExperimentConfig cfg = make(ProtocolId::QdbPrior, StrategyId::DistanceFraudReflect, 8, kMonteCarloTrials, 105);
    cfg.registers = registers_with_distance(8, hd, std::nullopt);
    expect_band(c, cfg, std::pow(0.5, hd));
  }
  return c;
}

Check c6_unentangled() {
  Check c;
  for (std::size_t hd : {0U, 1U, 2U, 4U}) {
    ExperimentConfig cfg = make(ProtocolId::EqdbMutual, StrategyId::MutualFraudUnentangled, 8, kMonteCarloTrials, 106);
    cfg.registers = registers_with_distance(8, 3, hd);
    expect_band(c, cfg, std::pow(0.5, hd));
  }
  return c;
}

Check c7_reflect_one_way() {
  Check c;
  const double pass = per_round_oracle(ProtocolId::EqdbOneWay, StrategyId::DistanceFraudReflect);
  c.expect(exact(pass, 0.5), "reflect per-round pass probability = " + fmt("%.17g", pass) + " (required 1/2)");
  c.notes.push_back("     conditioned: a_i = b_i -> " +
                    fmt("%.17g", per_round_oracle(ProtocolId::EqdbOneWay, StrategyId::DistanceFraudReflect,
                                                  registers_equal(true))) +
                    ", a_i != b_i -> " +
                    fmt("%.17g", per_round_oracle(ProtocolId::EqdbOneWay, StrategyId::DistanceFraudReflect,
                                                  registers_equal(false))));
  const double reflect_eq = detection_oracle(StrategyId::DistanceFraudReflect);
  const double honest_eq = detection_oracle(StrategyId::HonestBaseline);
  c.expect(exact(reflect_eq, 1.0), "reflect equality statistic = " + fmt("%.17g", reflect_eq));
  c.expect(exact(honest_eq, 5.0 / 8.0), "honest equality statistic = " + fmt("%.17g", honest_eq));

  ExperimentConfig cfg = make(ProtocolId::EqdbOneWay, StrategyId::HonestBaseline, 512, 10000, 107);
  cfg.detection = DetectionConfig{0.25, 0.85, 32};
  cfg.abort_policy = AbortPolicy::Tally;
  const auto honest = run_trials(cfg);
  const std::size_t per_trial = test_round_count(*cfg.detection, cfg.n);
  c.expect(honest.detect_rate && *honest.detect_rate == 0.0,
           "honest: " + fmt("%.0f", *honest.detect_rate * 10000.0) + " of 10000 trials flagged (" +
               std::to_string(per_trial) + " test rounds each)");
  cfg.attack = StrategyId::DistanceFraudReflect;
  cfg.trials = 1000;
  const auto reflect = run_trials(cfg);
  c.expect(reflect.detect_rate && *reflect.detect_rate == 1.0,
           "reflect: " + fmt("%.0f", *reflect.detect_rate * 1000.0) + " of 1000 trials flagged (" +
               std::to_string(1000 * per_trial) + " test rounds)");
  return c;
}

Check c8_oracle_agreement() {
  Check c;
  struct Row {
    ProtocolId protocol;
    StrategyId attack;
    ComparisonRow row;
    FraudKind fraud;
    OracleCondition condition;
    std::size_t hd;  // per-round Hamming distance the condition implies
    std::string label;
  };
  const std::vector<Row> rows{
      {ProtocolId::BrandsChaum, StrategyId::DistanceFraudGuess, ComparisonRow::BrandsChaum, FraudKind::Distance, {}, 0, ""},
      {ProtocolId::BrandsChaum, StrategyId::MafiaPreAsk, ComparisonRow::BrandsChaum, FraudKind::Mafia, {}, 0, ""},
      {ProtocolId::HanckeKuhn, StrategyId::DistanceFraudGuess, ComparisonRow::HanckeKuhn, FraudKind::Distance, {}, 0, ""},
      {ProtocolId::HanckeKuhn, StrategyId::MafiaPreAsk, ComparisonRow::HanckeKuhn, FraudKind::Mafia, {}, 0, ""},
      {ProtocolId::QdbPrior, StrategyId::DistanceFraudReflect, ComparisonRow::QdbPrior, FraudKind::Distance,
       registers_equal(true), 0, " a=b"},
      {ProtocolId::QdbPrior, StrategyId::DistanceFraudReflect, ComparisonRow::QdbPrior, FraudKind::Distance,
       registers_equal(false), 1, " a!=b"},
      {ProtocolId::EqdbOneWay, StrategyId::DistanceFraudReflect, ComparisonRow::EqdbOneWay, FraudKind::Distance,
       registers_equal(true), 0, " a=b"},
      {ProtocolId::EqdbOneWay, StrategyId::DistanceFraudReflect, ComparisonRow::EqdbOneWay, FraudKind::Distance,
       registers_equal(false), 1, " a!=b"},
      {ProtocolId::EqdbOneWay, StrategyId::MafiaInterceptResend, ComparisonRow::EqdbOneWay, FraudKind::Mafia, {}, 0, ""},
      {ProtocolId::EqdbMutual, StrategyId::MutualFraudUnentangled, ComparisonRow::EqdbMutual, FraudKind::Distance,
       registers_bc_equal(true), 0, " b=c"},
      {ProtocolId::EqdbMutual, StrategyId::MutualFraudUnentangled, ComparisonRow::EqdbMutual, FraudKind::Distance,
       registers_bc_equal(false), 1, " b!=c"},
      {ProtocolId::EqdbMutual, StrategyId::MafiaInterceptResend, ComparisonRow::EqdbMutual, FraudKind::Mafia, {}, 0, ""},
  };
  for (const auto& r : rows) {
    const double oracle = per_round_oracle(r.protocol, r.attack, r.condition);
    const double table = closed_form(r.row, r.fraud, 1, r.hd, r.hd);
    c.expect(exact(oracle, table), std::string(to_string(r.protocol)) + " " + std::string(to_string(r.attack)) +
                                       r.label + ": oracle " + fmt("%.17g", oracle) + ", table " + fmt("%.17g", table));
  }
  return c;
}

Check c9_baselines() {
  Check c;
  for (std::size_t n : {4U, 8U}) {
    for (StrategyId s : {StrategyId::DistanceFraudGuess, StrategyId::MafiaPreAsk}) {
      expect_band(c, make(ProtocolId::HanckeKuhn, s, n, kMonteCarloTrials, 109), std::pow(0.75, n));
      expect_band(c, make(ProtocolId::BrandsChaum, s, n, kMonteCarloTrials, 109), std::pow(0.5, n));
    }
  }
  return c;
}

Check c10_terrorist_fraud() {
  Check c;
  Rng rng = make_stream(110, 0, "acceptance-tf");
  int recovered = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto key = SharedKey::random(rng);
    const auto regs = derive_registers(RegisterMode::TfResistant, key, Nonce::random(rng), Nonce::random(rng), 16, 2);
    const Bits bits = key.bits();
    if (recover_key(regs.a, regs.b) == Bits(bits.begin(), bits.begin() + 16)) ++recovered;
  }
  c.expect(recovered == 1000, "recover_key returned the key bits for " + std::to_string(recovered) + " of 1000 keys");
  return c;
}

Check c11_message_counts() {
  Check c;
  const std::size_t n = 16;
  const std::size_t mutual = message_count(ProtocolId::EqdbMutual, n);
  const std::size_t one_way = message_count(ProtocolId::EqdbOneWay, n);
  const std::size_t big_c = mutual - 3 * n;
  const std::size_t small_c = one_way - 2 * n;
  c.expect(mutual == 3 * n + big_c && 2 * one_way == 4 * n + 2 * small_c,
           "mutual " + std::to_string(mutual) + " = 3n + " + std::to_string(big_c) + "; two one-way runs " +
               std::to_string(2 * one_way) + " = 4n + 2*" + std::to_string(small_c));

  ExperimentConfig cfg = make(ProtocolId::EqdbMutual, StrategyId::HonestBaseline, n, 1, 111);
  const auto m = run_trial(cfg, 0, true);
  cfg.protocol = ProtocolId::EqdbOneWay;
  const auto [forward, reversed] = run_with_role_reversal(cfg, 0, true);
  const std::size_t sent_mutual = m.trace.messages_sent;
  const std::size_t sent_pair = forward.trace.messages_sent + reversed.trace.messages_sent;
  c.expect(sent_mutual == mutual && sent_pair == 2 * one_way,
           "simulated: mutual sent " + std::to_string(sent_mutual) + ", reversed one-way pair sent " +
               std::to_string(sent_pair));

  const std::size_t rapid_mutual = rapid_message_count(ProtocolId::EqdbMutual, n);
  const std::size_t rapid_pair = 2 * rapid_message_count(ProtocolId::EqdbOneWay, n);
  c.expect(4 * rapid_mutual == 3 * rapid_pair, "rapid-phase messages " + std::to_string(rapid_mutual) + " vs " +
                                                   std::to_string(rapid_pair) + ", ratio " +
                                                   std::to_string(rapid_mutual) + "/" + std::to_string(rapid_pair));
  return c;
}

Check c12_determinism() {
  Check c;
  std::vector<ExperimentConfig> configs{
      make(ProtocolId::EqdbMutual, StrategyId::MafiaInterceptResend, 8, kMonteCarloTrials, 103),
      make(ProtocolId::HanckeKuhn, StrategyId::DistanceFraudGuess, 4, kMonteCarloTrials, 109),
  };
  configs.push_back(make(ProtocolId::EqdbMutual, StrategyId::MutualFraudUnentangled, 8, kMonteCarloTrials, 106));
  configs.back().registers = registers_with_distance(8, 3, 2);
  for (const auto& cfg : configs) {
    const std::string first = to_csv({run_trials(cfg)});
    const std::string second = to_csv({run_trials(cfg)});
    c.expect(first == second, "in-process CSV identical for " + std::string(to_string(cfg.protocol)) + " " +
                                  std::string(to_string(cfg.attack)));
  }

  const std::string args = "run --protocol eqdb-oneway --attack mafia-preask --rounds 4 --trials 200000 --seed 104";
  const std::string a = run_cli(args);
  const std::string b = run_cli(args);
  c.expect(a == b && a.find("<exit") == std::string::npos && !a.empty(), "two qdb-sim invocations, identical stdout");

  const std::string t1 = run_cli("trace --protocol eqdb-mutual --rounds 16 --seed 112 --trial 7");
  const std::string t2 = run_cli("trace --protocol eqdb-mutual --rounds 16 --seed 112 --trial 7");
  c.expect(t1 == t2 && !t1.empty(), "two trace invocations, identical JSON lines");
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria{
      {"C1 honest completeness", c1_completeness},
      {"C2 distance recovery", c2_distance_recovery},
      {"C3 mafia intercept-resend (5/8)^n", c3_intercept_resend},
      {"C4 mafia pre-ask (1/2)^n", c4_preask},
      {"C5 reflect vs prior protocol 2^-HD(a,b)", c5_reflect_prior},
      {"C6 mutual unentangled fraud 2^-HD(b,c)", c6_unentangled},
      {"C7 reflect vs one-way protocol and detection", c7_reflect_one_way},
      {"C8 oracle agrees with the comparison table", c8_oracle_agreement},
      {"C9 Hancke-Kuhn and Brands-Chaum baselines", c9_baselines},
      {"C10 terrorist-fraud key derivation", c10_terrorist_fraud},
      {"C11 message counts", c11_message_counts},
      {"C12 determinism", c12_determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Check c;
    try {
      c = fn();
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %s (%.1f s)\n", c.ok ? "PASS" : "FAIL", name.c_str(), secs);
    for (const auto& note : c.notes) std::printf("       %s\n", note.c_str());
    std::fflush(stdout);
    failed += c.ok ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

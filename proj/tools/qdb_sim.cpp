#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "qdb/errors.hpp"
#include "qdb/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitOutOfBand = 2;

struct Overrides {
  std::string config_path;
  std::optional<std::string> protocol;
  std::optional<std::string> attack;
  std::optional<std::size_t> rounds;
  std::optional<std::uint64_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<double> distance_m;
  std::optional<std::int64_t> alpha_ps;
  std::optional<std::string> format;
  std::optional<std::string> out;
  std::optional<std::size_t> hd_ab;
  std::optional<std::size_t> hd_bc;
  std::optional<std::string> bell;
  std::optional<std::string> verifier;
  bool detection = false;
};

void add_experiment_flags(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--config", o.config_path, "JSON experiment description")->check(CLI::ExistingFile);
  cmd.add_option("--protocol", o.protocol, "brands-chaum | hancke-kuhn | qdb-prior | eqdb-oneway | eqdb-mutual");
  cmd.add_option("--attack", o.attack,
                 "honest | df-guess | df-reflect | mutual-unentangled | mafia-preask | mafia-intercept-resend");
  cmd.add_option("--rounds", o.rounds, "rapid-phase rounds n");
  cmd.add_option("--trials", o.trials, "number of Monte Carlo trials");
  cmd.add_option("--seed", o.seed, "master seed");
  cmd.add_option("--distance-m", o.distance_m, "separation between A and B in meters");
  cmd.add_option("--alpha-ps", o.alpha_ps, "processing delay in picoseconds");
  cmd.add_option("--format", o.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  cmd.add_option("--out", o.out, "output file (standard output when omitted)");
  cmd.add_option("--hd-ab", o.hd_ab, "pin registers so that HD(a,b) equals this value");
  cmd.add_option("--hd-bc", o.hd_bc, "pin registers so that HD(b,c) equals this value");
  cmd.add_option("--bell", o.bell, "Bell label of the verifier's pairs: B00 | B01 | B10 | B11");
  cmd.add_option("--verifier", o.verifier, "node hosting the one-way verifier: A | B")
      ->check(CLI::IsMember({"A", "B"}));
  cmd.add_flag("--detection", o.detection, "enable reflection detection with default settings");
}

qdb::ExperimentConfig build_config(const Overrides& o) {
  qdb::ExperimentConfig cfg = o.config_path.empty() ? qdb::ExperimentConfig{} : qdb::load_config(o.config_path);
  if (o.protocol) cfg.protocol = qdb::protocol_from_string(*o.protocol);
  if (o.attack) cfg.attack = qdb::strategy_from_string(*o.attack);
  if (o.rounds) cfg.n = *o.rounds;
  if (o.trials) cfg.trials = *o.trials;
  if (o.seed) cfg.seed = *o.seed;
  if (o.distance_m) cfg.topology.position_b = cfg.topology.position_a + *o.distance_m;
  if (o.alpha_ps) cfg.channel.alpha = qdb::Picoseconds{*o.alpha_ps};
  if (o.format) cfg.format = qdb::output_format_from_string(*o.format);
  if (o.out) cfg.output_path = *o.out;
  if (o.bell) cfg.bell = qdb::bell_label_from_string(*o.bell);
  if (o.verifier) cfg.verifier_node = *o.verifier == "A" ? qdb::Node::A : qdb::Node::B;
  if (o.detection && !cfg.detection) cfg.detection = qdb::DetectionConfig{};
  if (o.hd_ab || o.hd_bc) {
    std::optional<std::size_t> bc = o.hd_bc;
    if (!bc && cfg.protocol == qdb::ProtocolId::EqdbMutual) bc = 0;
    cfg.registers = qdb::registers_with_distance(cfg.n, o.hd_ab.value_or(0), bc);
  } else if (cfg.registers && cfg.registers->a.size() != cfg.n) {
    throw qdb::InvalidArgument("pinned registers from the config do not match --rounds");
  }
  cfg.validate();
  return cfg;
}

void write_out(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw qdb::Error("cannot open " + path + " for writing");
  f << text;
  if (!f) throw qdb::Error("failed while writing " + path);
}

void report_band(const qdb::AttackStats& s) {
  std::fprintf(stderr, "%s/%s n=%zu: empirical %s, closed form %s, band +-%s\n", s.protocol.c_str(),
               s.attack.c_str(), s.n, qdb::format_double(s.empirical).c_str(),
               qdb::format_double(s.closed_form).c_str(),
               qdb::format_double(qdb::acceptance_band(s.closed_form, s.trials)).c_str());
}

int cmd_run(const Overrides& o, bool check) {
  const qdb::ExperimentConfig cfg = build_config(o);
  const qdb::AttackStats stats = qdb::run_trials(cfg);
  qdb::emit({stats}, cfg.format, cfg.output_path);
  if (check && !qdb::within_band(stats)) {
    report_band(stats);
    return kExitOutOfBand;
  }
  return kExitOk;
}

int cmd_oracle(const Overrides& o, bool check) {
  qdb::ExperimentConfig cfg = build_config(o);
  const double per_round = qdb::per_round_oracle(cfg.protocol, cfg.attack, {}, cfg.bell);

  qdb::ExperimentConfig one = cfg;
  one.n = 1;
  one.registers.reset();
  const double reference = qdb::closed_form_for(one);

  nlohmann::ordered_json j;
  j["protocol"] = std::string(qdb::to_string(cfg.protocol));
  j["attack"] = std::string(qdb::to_string(cfg.attack));
  j["bell"] = std::string(qdb::to_string(cfg.bell));
  j["per_round"] = per_round;
  j["per_round_closed_form"] = reference;
  j["n"] = cfg.n;
  j["n_rounds"] = std::pow(per_round, static_cast<double>(cfg.n));
  if (qdb::is_quantum(cfg.protocol) && cfg.protocol != qdb::ProtocolId::EqdbMutual &&
      (cfg.attack == qdb::StrategyId::HonestBaseline || cfg.attack == qdb::StrategyId::DistanceFraudReflect)) {
    j["test_round_equality"] = qdb::detection_oracle(cfg.attack, cfg.bell);
  }

  if (cfg.format == qdb::OutputFormat::Json) {
    write_out(j.dump(2) + "\n", cfg.output_path);
  } else {
    std::ostringstream csv;
    csv << "protocol,attack,bell,per_round,per_round_closed_form,n,n_rounds\n"
        << j["protocol"].get<std::string>() << ',' << j["attack"].get<std::string>() << ','
        << j["bell"].get<std::string>() << ',' << qdb::format_double(per_round) << ','
        << qdb::format_double(reference) << ',' << cfg.n << ','
        << qdb::format_double(j["n_rounds"].get<double>()) << '\n';
    write_out(csv.str(), cfg.output_path);
  }
  if (check && std::fabs(per_round - reference) > 1e-12) {
    std::fprintf(stderr, "oracle %s differs from closed form %s\n", qdb::format_double(per_round).c_str(),
                 qdb::format_double(reference).c_str());
    return kExitOutOfBand;
  }
  return kExitOk;
}

int cmd_table2(const Overrides& o, bool check) {
  qdb::ComparisonOptions opt;
  if (o.rounds) opt.n = *o.rounds;
  if (o.trials) opt.trials = *o.trials;
  if (o.seed) opt.seed = *o.seed;
  if (o.hd_ab) opt.hd_ab = *o.hd_ab;
  if (o.hd_bc) opt.hd_bc = *o.hd_bc;
  const auto format = o.format ? qdb::output_format_from_string(*o.format) : qdb::OutputFormat::Csv;

  const auto rows = qdb::comparison_table(opt);
  write_out(format == qdb::OutputFormat::Csv ? qdb::comparison_to_csv(rows) : qdb::comparison_to_json(rows),
            o.out.value_or(""));

  int code = kExitOk;
  if (check) {
    for (const auto& r : rows) {
      for (const auto* s : {&r.distance_empirical, &r.mafia_empirical}) {
        if (*s && !qdb::within_band(**s)) {
          report_band(**s);
          code = kExitOutOfBand;
        }
      }
    }
  }
  return code;
}

int cmd_trace(const Overrides& o, std::uint64_t trial, bool reversed) {
  const qdb::ExperimentConfig cfg = build_config(o);
  std::ostringstream out;
  auto dump = [&](const qdb::TrialResult& r) {
    for (const auto& rec : r.trace.records) out << qdb::to_json_line(rec) << '\n';
  };
  if (reversed) {
    const auto [first, second] = qdb::run_with_role_reversal(cfg, trial, true);
    dump(first);
    dump(second);
  } else {
    dump(qdb::run_trial(cfg, trial, true));
  }
  write_out(out.str(), cfg.output_path);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qdb-sim: seeded simulator for classical and quantum distance-bounding protocols"};
  app.require_subcommand(1);

  Overrides o;
  bool check = false;
  std::uint64_t trace_trial = 0;
  bool trace_reversed = false;

  auto* run = app.add_subcommand("run", "Monte Carlo estimate of one attack against one protocol");
  add_experiment_flags(*run, o);
  run->add_flag("--check", check, "exit with status 2 when the estimate leaves the 3.29-sigma band");

  auto* oracle = app.add_subcommand("oracle", "exact per-round success probability by enumeration");
  add_experiment_flags(*oracle, o);
  oracle->add_flag("--check", check, "exit with status 2 when the oracle disagrees with the closed form");

  auto* table2 = app.add_subcommand("table2", "all comparison rows, closed form next to simulation");
  add_experiment_flags(*table2, o);
  table2->add_flag("--check", check, "exit with status 2 when a simulated entry leaves its band");

  auto* trace = app.add_subcommand("trace", "JSON-lines message trace of a single trial");
  add_experiment_flags(*trace, o);
  trace->add_option("--trial", trace_trial, "trial index");
  trace->add_flag("--reversed", trace_reversed, "one-way protocols: also run with the roles exchanged");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) return cmd_run(o, check);
    if (*oracle) return cmd_oracle(o, check);
    if (*table2) return cmd_table2(o, check);
    if (*trace) return cmd_trace(o, trace_trial, trace_reversed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "qdb-sim: %s\n", e.what());
    return kExitError;
  }
  return kExitError;
}

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "qdb/errors.hpp"
#include "qdb/harness.hpp"

namespace qdb {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

Bits bits_from_string(const std::string& s, const std::string& field) {
  Bits out;
  out.reserve(s.size());
  for (char ch : s) {
    if (ch != '0' && ch != '1') throw ConfigError(field + " must be a string of 0/1 characters");
    out.push_back(static_cast<Bit>(ch - '0'));
  }
  return out;
}

Node node_from_string(const std::string& s) {
  if (s == "A") return Node::A;
  if (s == "B") return Node::B;
  throw ConfigError("verifier must be \"A\" or \"B\", got \"" + s + "\"");
}

AbortPolicy abort_policy_from_string(const std::string& s) {
  if (s == "first-failure") return AbortPolicy::FirstFailure;
  if (s == "tally") return AbortPolicy::Tally;
  throw ConfigError("abort_policy must be first-failure or tally");
}

FinalCheck final_check_from_string(const std::string& s) {
  if (s == "recomputed") return FinalCheck::Recomputed;
  if (s == "strict") return FinalCheck::Strict;
  throw ConfigError("final_check must be recomputed or strict");
}

template <typename T>
T non_negative(const json& v) {
  if (!v.is_number_unsigned()) throw ConfigError("expected a non-negative integer, got " + v.dump());
  return v.get<T>();
}

template <typename F>
auto wrap(const std::string& field, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(field + ": " + e.what());
  } catch (const Error& e) {
    throw ConfigError(field + ": " + e.what());
  }
}

void apply_topology(const json& t, ExperimentConfig& cfg) {
  if (!t.is_object()) throw ConfigError("topology must be an object");
  reject_unknown(t, {"positions", "adversary", "signal_speed"}, "topology");
  if (t.contains("positions")) {
    const json& p = t.at("positions");
    if (!p.is_object()) throw ConfigError("topology.positions must be an object");
    reject_unknown(p, {"A", "B"}, "topology.positions");
    if (p.contains("A")) cfg.topology.position_a = p.at("A").get<double>();
    if (p.contains("B")) cfg.topology.position_b = p.at("B").get<double>();
  }
  if (t.contains("adversary") && !t.at("adversary").is_null()) {
    cfg.topology.position_m = t.at("adversary").get<double>();
  }
  if (t.contains("signal_speed")) cfg.topology.signal_speed = t.at("signal_speed").get<double>();
}

void apply_registers(const json& r, ExperimentConfig& cfg) {
  if (!r.is_object()) throw ConfigError("registers must be an object");
  reject_unknown(r, {"a", "b", "c"}, "registers");
  cfg.registers.emplace();
  cfg.registers->a = bits_from_string(r.at("a").get<std::string>(), "registers.a");
  cfg.registers->b = bits_from_string(r.at("b").get<std::string>(), "registers.b");
  if (r.contains("c")) cfg.registers->c = bits_from_string(r.at("c").get<std::string>(), "registers.c");
}

void apply_detection(const json& d, ExperimentConfig& cfg) {
  if (d.is_boolean()) {
    if (d.get<bool>()) {
      cfg.detection = DetectionConfig{};
    } else {
      cfg.detection.reset();
    }
    return;
  }
  if (!d.is_object()) throw ConfigError("detection must be a boolean or an object");
  reject_unknown(d, {"test_round_fraction", "equality_threshold", "min_test_rounds"}, "detection");
  DetectionConfig dc;
  if (d.contains("test_round_fraction")) dc.test_round_fraction = d.at("test_round_fraction").get<double>();
  if (d.contains("equality_threshold")) dc.equality_threshold = d.at("equality_threshold").get<double>();
  if (d.contains("min_test_rounds")) dc.min_test_rounds = non_negative<std::size_t>(d.at("min_test_rounds"));
  cfg.detection = dc;
}

}  // namespace

ExperimentConfig parse_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(root,
                 {"protocol", "attack", "n", "trials", "seed", "topology", "alpha_ps", "distance_budget_m",
                  "loss_probability", "bell_label", "register_mode", "registers", "detection",
                  "abort_policy", "final_check", "verifier", "guess_advance_ps", "key_bytes", "nonce_bits",
                  "format", "out"},
                 "config");

  ExperimentConfig cfg;
  auto str = [&](const char* key) { return root.at(key).get<std::string>(); };

  if (root.contains("protocol")) cfg.protocol = wrap("protocol", [&] { return protocol_from_string(str("protocol")); });
  if (root.contains("attack")) cfg.attack = wrap("attack", [&] { return strategy_from_string(str("attack")); });
  if (root.contains("n")) cfg.n = wrap("n", [&] { return non_negative<std::size_t>(root.at("n")); });
  if (root.contains("trials")) cfg.trials = wrap("trials", [&] { return non_negative<std::uint64_t>(root.at("trials")); });
  if (root.contains("seed")) cfg.seed = wrap("seed", [&] { return non_negative<std::uint64_t>(root.at("seed")); });
  if (root.contains("topology")) wrap("topology", [&] { apply_topology(root.at("topology"), cfg); });
  if (root.contains("alpha_ps")) {
    cfg.channel.alpha = Picoseconds{wrap("alpha_ps", [&] { return root.at("alpha_ps").get<std::int64_t>(); })};
  }
  if (root.contains("distance_budget_m")) {
    cfg.channel.distance_budget_m = wrap("distance_budget_m", [&] { return root.at("distance_budget_m").get<double>(); });
  }
  if (root.contains("loss_probability")) {
    cfg.channel.loss_probability = wrap("loss_probability", [&] { return root.at("loss_probability").get<double>(); });
  }
  if (root.contains("bell_label")) cfg.bell = wrap("bell_label", [&] { return bell_label_from_string(str("bell_label")); });
  if (root.contains("register_mode")) {
    cfg.register_mode = wrap("register_mode", [&] { return register_mode_from_string(str("register_mode")); });
  }
  if (root.contains("registers")) wrap("registers", [&] { apply_registers(root.at("registers"), cfg); });
  if (root.contains("detection")) wrap("detection", [&] { apply_detection(root.at("detection"), cfg); });
  if (root.contains("abort_policy")) {
    cfg.abort_policy = wrap("abort_policy", [&] { return abort_policy_from_string(str("abort_policy")); });
  }
  if (root.contains("final_check")) {
    cfg.final_check = wrap("final_check", [&] { return final_check_from_string(str("final_check")); });
  }
  if (root.contains("verifier")) cfg.verifier_node = wrap("verifier", [&] { return node_from_string(str("verifier")); });
  if (root.contains("guess_advance_ps")) {
    cfg.guess_advance = Picoseconds{wrap("guess_advance_ps", [&] { return root.at("guess_advance_ps").get<std::int64_t>(); })};
  }
  if (root.contains("key_bytes")) cfg.key_bytes = wrap("key_bytes", [&] { return non_negative<std::size_t>(root.at("key_bytes")); });
  if (root.contains("nonce_bits")) cfg.nonce_bits = wrap("nonce_bits", [&] { return non_negative<std::size_t>(root.at("nonce_bits")); });
  if (root.contains("format")) cfg.format = wrap("format", [&] { return output_format_from_string(str("format")); });
  if (root.contains("out")) cfg.output_path = wrap("out", [&] { return str("out"); });

  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace qdb

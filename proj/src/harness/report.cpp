#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "qdb/errors.hpp"
#include "qdb/harness.hpp"

namespace qdb {

namespace {

using nlohmann::ordered_json;

std::string opt_size(const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : ""; }
std::string opt_double(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& s) {
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  if (s == "nan") return NAN;
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw ConfigError("malformed number: " + s);
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  std::size_t used = 0;
  const unsigned long long v = std::stoull(s, &used);
  if (used != s.size()) throw ConfigError("malformed integer: " + s);
  return static_cast<std::uint64_t>(v);
}

ordered_json number_json(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

double number_from_json(const ordered_json& j) {
  if (j.is_string()) return parse_double(j.get<std::string>());
  return j.get<double>();
}

void write_text(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    if (!std::cout) throw Error("failed to write to standard output");
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << text;
  out.close();
  if (!out) throw Error("failed while writing " + path);
}

std::string cell_of(const std::optional<AttackStats>& s, bool rate) {
  if (!s) return "analytic";
  return rate ? format_double(s->empirical) : std::to_string(s->trials);
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{"protocol", "attack",      "n",         "hd_ab",
                                             "hd_bc",    "trials",      "successes", "empirical",
                                             "closed_form", "z",        "detect_rate", "seed"};
  return cols;
}

std::string to_csv(const std::vector<AttackStats>& rows) {
  std::ostringstream out;
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : rows) {
    out << r.protocol << ',' << r.attack << ',' << r.n << ',' << opt_size(r.hd_ab) << ','
        << opt_size(r.hd_bc) << ',' << r.trials << ',' << r.successes << ',' << format_double(r.empirical)
        << ',' << format_double(r.closed_form) << ',' << format_double(r.z) << ','
        << opt_double(r.detect_rate) << ',' << r.seed << '\n';
  }
  return out.str();
}

std::vector<AttackStats> parse_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty CSV input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  if (header != csv_columns()) throw ConfigError("unexpected CSV header: " + line);

  std::vector<AttackStats> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c = split_csv_line(line);
    if (c.size() != header.size()) throw ConfigError("CSV row has " + std::to_string(c.size()) + " cells");
    AttackStats s;
    s.protocol = c[0];
    s.attack = c[1];
    s.n = static_cast<std::size_t>(parse_u64(c[2]));
    if (!c[3].empty()) s.hd_ab = static_cast<std::size_t>(parse_u64(c[3]));
    if (!c[4].empty()) s.hd_bc = static_cast<std::size_t>(parse_u64(c[4]));
    s.trials = parse_u64(c[5]);
    s.successes = parse_u64(c[6]);
    s.empirical = parse_double(c[7]);
    s.closed_form = parse_double(c[8]);
    s.z = parse_double(c[9]);
    if (!c[10].empty()) s.detect_rate = parse_double(c[10]);
    s.seed = parse_u64(c[11]);
    rows.push_back(std::move(s));
  }
  return rows;
}

std::string to_json(const std::vector<AttackStats>& rows) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json j;
    j["protocol"] = r.protocol;
    j["attack"] = r.attack;
    j["n"] = r.n;
    j["hd_ab"] = r.hd_ab ? ordered_json(*r.hd_ab) : ordered_json(nullptr);
    j["hd_bc"] = r.hd_bc ? ordered_json(*r.hd_bc) : ordered_json(nullptr);
    j["trials"] = r.trials;
    j["successes"] = r.successes;
    j["empirical"] = number_json(r.empirical);
    j["closed_form"] = number_json(r.closed_form);
    j["z"] = number_json(r.z);
    j["detect_rate"] = r.detect_rate ? number_json(*r.detect_rate) : ordered_json(nullptr);
    j["seed"] = r.seed;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::vector<AttackStats> parse_json(std::string_view text) {
  std::vector<AttackStats> rows;
  try {
    const auto arr = ordered_json::parse(text);
    if (!arr.is_array()) throw ConfigError("expected a JSON array of result rows");
    for (const auto& j : arr) {
      AttackStats s;
      s.protocol = j.at("protocol").get<std::string>();
      s.attack = j.at("attack").get<std::string>();
      s.n = j.at("n").get<std::size_t>();
      if (!j.at("hd_ab").is_null()) s.hd_ab = j.at("hd_ab").get<std::size_t>();
      if (!j.at("hd_bc").is_null()) s.hd_bc = j.at("hd_bc").get<std::size_t>();
      s.trials = j.at("trials").get<std::uint64_t>();
      s.successes = j.at("successes").get<std::uint64_t>();
      s.empirical = number_from_json(j.at("empirical"));
      s.closed_form = number_from_json(j.at("closed_form"));
      s.z = number_from_json(j.at("z"));
      if (!j.at("detect_rate").is_null()) s.detect_rate = number_from_json(j.at("detect_rate"));
      s.seed = j.at("seed").get<std::uint64_t>();
      rows.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed result JSON: ") + e.what());
  }
  return rows;
}

void emit(const std::vector<AttackStats>& rows, OutputFormat format, const std::string& path) {
  write_text(format == OutputFormat::Csv ? to_csv(rows) : to_json(rows), path);
}

std::vector<ComparisonEntry> comparison_table(const ComparisonOptions& opt) {
  const Registers pinned_ab = registers_with_distance(opt.n, opt.hd_ab, std::nullopt);
  const Registers pinned_bc = registers_with_distance(opt.n, opt.hd_ab, opt.hd_bc);

  auto simulate = [&](ProtocolId p, StrategyId s, std::optional<Registers> regs) {
    ExperimentConfig cfg;
    cfg.protocol = p;
    cfg.attack = s;
    cfg.n = opt.n;
    cfg.trials = opt.trials;
    cfg.seed = opt.seed;
    cfg.registers = std::move(regs);
    return run_trials(cfg);
  };

  std::vector<ComparisonEntry> rows;
  for (ComparisonRow row : all_comparison_rows()) {
    ComparisonEntry e;
    e.row = row;
    e.distance_closed_form = closed_form(row, FraudKind::Distance, opt.n, opt.hd_ab, opt.hd_bc);
    e.mafia_closed_form = closed_form(row, FraudKind::Mafia, opt.n, opt.hd_ab, opt.hd_bc);
    switch (row) {
      case ComparisonRow::BrandsChaum:
        e.distance_empirical = simulate(ProtocolId::BrandsChaum, StrategyId::DistanceFraudGuess, std::nullopt);
        e.mafia_empirical = simulate(ProtocolId::BrandsChaum, StrategyId::MafiaPreAsk, std::nullopt);
        break;
      case ComparisonRow::HanckeKuhn:
        e.distance_empirical = simulate(ProtocolId::HanckeKuhn, StrategyId::DistanceFraudGuess, std::nullopt);
        e.mafia_empirical = simulate(ProtocolId::HanckeKuhn, StrategyId::MafiaPreAsk, std::nullopt);
        break;
      case ComparisonRow::QdbPrior:
        e.distance_empirical = simulate(ProtocolId::QdbPrior, StrategyId::DistanceFraudReflect, pinned_ab);
        break;
      case ComparisonRow::EqdbOneWay:
        e.distance_empirical = simulate(ProtocolId::EqdbOneWay, StrategyId::DistanceFraudReflect, pinned_ab);
        e.mafia_empirical = simulate(ProtocolId::EqdbOneWay, StrategyId::MafiaInterceptResend, std::nullopt);
        break;
      case ComparisonRow::EqdbMutual:
        e.distance_empirical =
            simulate(ProtocolId::EqdbMutual, StrategyId::MutualFraudUnentangled, pinned_bc);
        e.mafia_empirical = simulate(ProtocolId::EqdbMutual, StrategyId::MafiaInterceptResend, std::nullopt);
        break;
      case ComparisonRow::QdbMac:
      case ComparisonRow::HybridDb:
        break;
    }
    rows.push_back(std::move(e));
  }
  return rows;
}

std::string comparison_to_csv(const std::vector<ComparisonEntry>& rows) {
  std::ostringstream out;
  out << "row,df_closed_form,df_empirical,df_trials,mf_closed_form,mf_empirical,mf_trials\n";
  for (const auto& r : rows) {
    out << to_string(r.row) << ',' << format_double(r.distance_closed_form) << ','
        << cell_of(r.distance_empirical, true) << ',' << cell_of(r.distance_empirical, false) << ','
        << format_double(r.mafia_closed_form) << ',' << cell_of(r.mafia_empirical, true) << ','
        << cell_of(r.mafia_empirical, false) << '\n';
  }
  return out.str();
}

std::string comparison_to_json(const std::vector<ComparisonEntry>& rows) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json j;
    j["row"] = std::string(to_string(r.row));
    auto side = [](double closed, const std::optional<AttackStats>& s) {
      ordered_json k;
      k["closed_form"] = closed;
      if (s) {
        k["empirical"] = s->empirical;
        k["trials"] = s->trials;
        k["attack"] = s->attack;
      } else {
        k["empirical"] = "analytic";
      }
      return k;
    };
    j["distance_fraud"] = side(r.distance_closed_form, r.distance_empirical);
    j["mafia_fraud"] = side(r.mafia_closed_form, r.mafia_empirical);
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

}  // namespace qdb

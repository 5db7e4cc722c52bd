#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "qdb/errors.hpp"
#include "qdb/harness.hpp"

namespace qdb {

namespace {

struct RowName {
  ComparisonRow row;
  std::string_view name;
};

constexpr std::array<RowName, 7> kRowNames{{
    {ComparisonRow::BrandsChaum, "brands-chaum"},
    {ComparisonRow::HanckeKuhn, "hancke-kuhn"},
    {ComparisonRow::QdbMac, "qdb-mac"},
    {ComparisonRow::QdbPrior, "qdb-prior"},
    {ComparisonRow::HybridDb, "hybrid-db"},
    {ComparisonRow::EqdbOneWay, "eqdb-oneway"},
    {ComparisonRow::EqdbMutual, "eqdb-mutual"},
}};

double pow_n(double base, std::size_t n) { return std::pow(base, static_cast<double>(n)); }

std::size_t hd(const Bits& x, const Bits& y) { return hamming_distance(x, y); }

}  // namespace

std::string_view to_string(ComparisonRow row) {
  for (const auto& e : kRowNames) {
    if (e.row == row) return e.name;
  }
  return "unknown";
}

ComparisonRow comparison_row_from_string(std::string_view s) {
  for (const auto& e : kRowNames) {
    if (e.name == s) return e.row;
  }
  throw InvalidArgument("unknown comparison row: " + std::string(s));
}

std::string_view to_string(FraudKind f) { return f == FraudKind::Distance ? "distance" : "mafia"; }

const std::vector<ComparisonRow>& all_comparison_rows() {
  static const std::vector<ComparisonRow> rows{
      ComparisonRow::BrandsChaum, ComparisonRow::HanckeKuhn, ComparisonRow::QdbMac,
      ComparisonRow::QdbPrior,    ComparisonRow::HybridDb,   ComparisonRow::EqdbOneWay,
      ComparisonRow::EqdbMutual,
  };
  return rows;
}

std::optional<ComparisonRow> comparison_row_for(ProtocolId p) noexcept {
  switch (p) {
    case ProtocolId::BrandsChaum: return ComparisonRow::BrandsChaum;
    case ProtocolId::HanckeKuhn: return ComparisonRow::HanckeKuhn;
    case ProtocolId::QdbPrior: return ComparisonRow::QdbPrior;
    case ProtocolId::EqdbOneWay: return ComparisonRow::EqdbOneWay;
    case ProtocolId::EqdbMutual: return ComparisonRow::EqdbMutual;
  }
  return std::nullopt;
}

double closed_form(ComparisonRow row, FraudKind fraud, std::size_t n, std::size_t hd_ab, std::size_t hd_bc) {
  if (hd_ab > n || hd_bc > n) throw InvalidArgument("Hamming distance exceeds n");
  const bool df = fraud == FraudKind::Distance;
  switch (row) {
    case ComparisonRow::BrandsChaum: return pow_n(0.5, n);
    case ComparisonRow::HanckeKuhn:
    case ComparisonRow::QdbMac: return pow_n(0.75, n);
    case ComparisonRow::QdbPrior:
      return df ? pow_n(0.5, hd_ab) : std::max(pow_n(0.5, hd_ab), pow_n(0.625, n));
    case ComparisonRow::HybridDb: return df ? pow_n(0.5, n) : pow_n(0.75, n);
    case ComparisonRow::EqdbOneWay: return df ? pow_n(0.5, hd_ab) : pow_n(0.625, n);
    case ComparisonRow::EqdbMutual: return df ? pow_n(0.5, hd_bc) : pow_n(0.625, n);
  }
  throw InvalidArgument("unknown comparison row");
}

double closed_form_for(const ExperimentConfig& cfg) {
  const std::size_t n = cfg.n;
  const auto& regs = cfg.registers;
  // Register-dependent expressions average to (3/4)^n over uniform registers.
  auto by_ab = [&] { return regs ? pow_n(0.5, hd(regs->a, regs->b)) : pow_n(0.75, n); };
  auto by_bc = [&] { return regs && regs->c ? pow_n(0.5, hd(regs->b, *regs->c)) : pow_n(0.75, n); };

  switch (cfg.attack) {
    case StrategyId::HonestBaseline:
      return 1.0;
    case StrategyId::DistanceFraudGuess:
      return cfg.protocol == ProtocolId::HanckeKuhn ? by_ab() : pow_n(0.5, n);
    case StrategyId::DistanceFraudReflect:
      if (cfg.detection) return 0.0;
      return by_ab();
    case StrategyId::MutualFraudUnentangled:
      return by_bc();
    case StrategyId::MafiaPreAsk:
      return cfg.protocol == ProtocolId::HanckeKuhn ? by_ab() : pow_n(0.5, n);
    case StrategyId::MafiaInterceptResend:
      return pow_n(0.625, n);
  }
  throw InvalidArgument("unknown attack");
}

double acceptance_band(double p, std::uint64_t trials) {
  if (trials == 0) return 0.0;
  return 3.29 * std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

bool within_band(const AttackStats& s) {
  return std::fabs(s.empirical - s.closed_form) <= acceptance_band(s.closed_form, s.trials) + 1e-12;
}

Registers registers_with_distance(std::size_t n, std::size_t hd_ab, std::optional<std::size_t> hd_bc) {
  if (hd_ab > n || (hd_bc && *hd_bc > n)) throw InvalidArgument("Hamming distance exceeds n");
  Registers regs;
  regs.a.resize(n);
  for (std::size_t i = 0; i < n; ++i) regs.a[i] = static_cast<Bit>((i + 1) % 2);
  regs.b = regs.a;
  for (std::size_t i = 0; i < hd_ab; ++i) regs.b[i] ^= 1U;
  if (hd_bc) {
    Bits c = regs.b;
    for (std::size_t i = 0; i < *hd_bc; ++i) c[i] ^= 1U;
    regs.c = std::move(c);
  }
  return regs;
}

}  // namespace qdb

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qdb/adversary.hpp"
#include "qdb/channel.hpp"
#include "qdb/protocol.hpp"

namespace qdb {

// ---- Closed forms ---------------------------------------------------------------------

/// Rows of the protocol comparison table. QdbMac (quantum DB with a final MAC phase)
/// and HybridDb (hybrid classical/quantum DB) are analytic only.
enum class ComparisonRow : std::uint8_t {
  BrandsChaum,
  HanckeKuhn,
  QdbMac,
  QdbPrior,
  HybridDb,
  EqdbOneWay,
  EqdbMutual,
};

enum class FraudKind : std::uint8_t { Distance, Mafia };

std::string_view to_string(ComparisonRow row);
ComparisonRow comparison_row_from_string(std::string_view s);
std::string_view to_string(FraudKind f);
const std::vector<ComparisonRow>& all_comparison_rows();
std::optional<ComparisonRow> comparison_row_for(ProtocolId p) noexcept;

double closed_form(ComparisonRow row, FraudKind fraud, std::size_t n, std::size_t hd_ab = 0,
                   std::size_t hd_bc = 0);

// ---- Experiments ----------------------------------------------------------------------

enum class OutputFormat : std::uint8_t { Csv, Json };

std::string_view to_string(OutputFormat f);
OutputFormat output_format_from_string(std::string_view s);

struct ExperimentConfig {
  ProtocolId protocol = ProtocolId::EqdbOneWay;
  StrategyId attack = StrategyId::HonestBaseline;
  std::size_t n = 16;
  std::uint64_t trials = 1000;
  std::uint64_t seed = 1;
  std::optional<Registers> registers;  // pinned a/b[/c], each of length n
  ChannelConfig channel{Picoseconds{1000}, 1000.0, 0.0};
  Topology topology;
  std::optional<DetectionConfig> detection;
  AbortPolicy abort_policy = AbortPolicy::FirstFailure;
  FinalCheck final_check = FinalCheck::Recomputed;
  BellLabel bell = BellLabel::B00;
  RegisterMode register_mode = RegisterMode::Prf;
  std::size_t key_bytes = kDefaultKeyBytes;
  std::size_t nonce_bits = kDefaultNonceBits;
  /// Node hosting the verifier of a one-way protocol; the other node is the prover.
  Node verifier_node = Node::A;
  /// Time a guessing prover answers ahead of the honest schedule; defaults to the
  /// one-way propagation delay between the parties.
  std::optional<Picoseconds> guess_advance;
  OutputFormat format = OutputFormat::Csv;
  std::string output_path;  // empty: standard output

  /// Throws InvalidArgument for inconsistent settings.
  void validate() const;
  double true_distance() const { return topology.distance(Node::A, Node::B); }
};

/// Verdict and records of one party at the end of a trial.
struct PartyReport {
  Node node = Node::A;
  Role role = Role::Verifier;
  bool finished = false;
  Verdict verdict;
  std::vector<RoundRecord> rounds;
  std::optional<DetectionResult> detection;
  std::optional<FinalReveal> reveal;  // opening received by this party, if any
};

struct TrialResult {
  std::uint64_t trial = 0;
  AttackOutcome outcome;
  Registers registers;
  std::vector<PartyReport> parties;  // A first, then B
  TrialTrace trace;

  const PartyReport& party(Node node) const;
};

/// One trial; all randomness comes from streams derived from (config.seed, trial).
/// `run_label` keeps the streams of several runs within one trial apart.
TrialResult run_trial(const ExperimentConfig& config, std::uint64_t trial, bool record_trace = false,
                      std::string_view run_label = "");

/// One-way protocol run twice in the same trial, the second time with the roles of
/// the two nodes exchanged.
std::pair<TrialResult, TrialResult> run_with_role_reversal(const ExperimentConfig& config,
                                                           std::uint64_t trial, bool record_trace = false);

struct AttackStats {
  std::string protocol;
  std::string attack;
  std::size_t n = 0;
  std::optional<std::size_t> hd_ab;
  std::optional<std::size_t> hd_bc;
  std::uint64_t trials = 0;
  std::uint64_t successes = 0;
  double empirical = 0.0;
  double closed_form = 0.0;
  double z = 0.0;
  std::optional<double> detect_rate;
  std::uint64_t seed = 0;

  friend bool operator==(const AttackStats&, const AttackStats&) = default;
};

/// Reference probability for a configuration: the table expression for pinned registers,
/// or its expectation over uniformly random registers otherwise.
double closed_form_for(const ExperimentConfig& config);

/// 3.29 binomial standard errors around p.
double acceptance_band(double p, std::uint64_t trials);
bool within_band(const AttackStats& stats);

/// Runs config.trials trials. Errors raised inside a trial come back as TrialError.
AttackStats run_trials(const ExperimentConfig& config);

/// Deterministic registers with the requested Hamming distances:
/// a alternates 1010..., b flips the first hd_ab bits of a, c flips the first hd_bc bits of b.
Registers registers_with_distance(std::size_t n, std::size_t hd_ab, std::optional<std::size_t> hd_bc);

// ---- Enumeration oracle ---------------------------------------------------------------

/// Variables of one enumerated round. Unused fields stay empty.
struct RoundAssignment {
  Bit a = 0;
  Bit b = 0;
  std::optional<Bit> c;
  std::optional<Bit> r;
  std::optional<Bit> challenge;        // bit the target's challenge carries
  std::optional<Basis> challenge_basis;  // basis it is carried in
  std::optional<Basis> response_basis;   // basis the target decodes the answer in
  std::optional<Bit> guess_bit;
  std::optional<Basis> guess_basis;
  std::optional<Basis> measure_basis;  // intercept basis
  std::optional<Basis> resend_basis;
  std::optional<Basis> test_basis;
};

struct OracleBranch {
  RoundAssignment vars;
  double weight = 0.0;
  bool success = false;
};

using OracleCondition = std::function<bool(const RoundAssignment&)>;

/// Every branch of one round with its exact probability; weights sum to 1.
std::vector<OracleBranch> enumerate_round(ProtocolId protocol, StrategyId attack,
                                          BellLabel bell = BellLabel::B00);

/// P(round passes | condition). Throws InvalidArgument for unsupported pairs or an
/// impossible condition.
double per_round_oracle(ProtocolId protocol, StrategyId attack, const OracleCondition& condition = {},
                        BellLabel bell = BellLabel::B00);

/// Probability that a test round reports equal outcomes against an honest or reflecting prover.
double detection_oracle(StrategyId prover, BellLabel bell = BellLabel::B00);

/// Pre-ask scenarios 1..4: basis right/bit wrong, both right, basis wrong/bit right, both wrong.
OracleCondition preask_subcase(int k);
/// Intercept-resend scenarios 1..4: both bases right, resend wrong, measure wrong, both wrong.
OracleCondition intercept_subcase(int k);
OracleCondition registers_equal(bool equal_ab);
OracleCondition registers_bc_equal(bool equal_bc);

// ---- Reports --------------------------------------------------------------------------

const std::vector<std::string>& csv_columns();
std::string to_csv(const std::vector<AttackStats>& rows);
std::string to_json(const std::vector<AttackStats>& rows);
std::vector<AttackStats> parse_csv(std::string_view text);
std::vector<AttackStats> parse_json(std::string_view text);
/// Writes rows in `format` to `path` (standard output when empty). Throws Error on IO failure.
void emit(const std::vector<AttackStats>& rows, OutputFormat format, const std::string& path);

struct ComparisonEntry {
  ComparisonRow row = ComparisonRow::BrandsChaum;
  double distance_closed_form = 0.0;
  double mafia_closed_form = 0.0;
  std::optional<AttackStats> distance_empirical;
  std::optional<AttackStats> mafia_empirical;
};

struct ComparisonOptions {
  std::size_t n = 8;
  std::size_t hd_ab = 1;
  std::size_t hd_bc = 1;
  std::uint64_t trials = 10000;
  std::uint64_t seed = 1;
};

/// All seven comparison rows, simulating every entry that has a simulated strategy.
std::vector<ComparisonEntry> comparison_table(const ComparisonOptions& options);
std::string comparison_to_csv(const std::vector<ComparisonEntry>& rows);
std::string comparison_to_json(const std::vector<ComparisonEntry>& rows);

/// Formats a double with enough digits to round-trip.
std::string format_double(double x);

// ---- Configuration files --------------------------------------------------------------

/// Parses the JSON experiment description; throws ConfigError on malformed input.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::string& path);

}  // namespace qdb

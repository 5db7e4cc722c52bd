#pragma once

// Deterministic discrete-event scheduler on a 1-D line.
//
// Time is an integer picosecond clock. A message emitted at t from src arrives
// at t + ceil(distance(src, dst) / signal_speed). Events with equal time are
// processed in insertion order.

#include <array>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

#include "qdb/messages.hpp"
#include "qdb/qstate.hpp"
#include "qdb/rng.hpp"

namespace qdb {

using Picoseconds = std::chrono::duration<std::int64_t, std::pico>;

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s

enum class Node : std::uint8_t { A, B, M };

std::string_view to_string(Node node);

struct Topology {
  double position_a = 0.0;  // meters
  double position_b = 150.0;
  std::optional<double> position_m;  // adversary, anywhere on the line
  double signal_speed = kSpeedOfLight;

  double position(Node node) const;
  double distance(Node x, Node y) const;
  bool has(Node node) const { return node != Node::M || position_m.has_value(); }
};

struct ChannelConfig {
  Picoseconds alpha{0};  // processing delay charged at responding parties
  double distance_budget_m = 1000.0;
  /// Applies to timed messages only (round >= 1); setup messages are always delivered.
  double loss_probability = 0.0;
};

/// Propagation time over `meters`, rounded up to a whole picosecond.
Picoseconds propagation_delay(double meters, double signal_speed = kSpeedOfLight);

/// (t_r - t_s - alpha) / 2 * c, in meters. Throws NegativeElapsed if t_r < t_s + alpha.
double rtt_to_distance(Picoseconds t_s, Picoseconds t_r, Picoseconds alpha,
                       double signal_speed = kSpeedOfLight);

struct TraceRecord {
  std::uint64_t trial = 0;
  Picoseconds time{0};    // emission
  Picoseconds arrive{0};  // scheduled delivery
  Node src = Node::A;
  Node dst = Node::B;
  std::string kind;
  int round = 0;
  std::string payload;
  bool dropped = false;
};

/// One JSON object per line: {trial, time_ps, arrive_ps, src, dst, kind, round, payload}.
std::string to_json_line(const TraceRecord& record);

class Simulator;

/// Handle an endpoint uses to act on the simulation while it is being called.
class Context {
 public:
  Context(Simulator& sim, Node self) : sim_(sim), self_(self) {}

  Node self() const noexcept { return self_; }
  Picoseconds now() const noexcept;
  QuantumRegistry& registry() noexcept;
  Rng& rng() noexcept;  // the calling party's own stream
  const Topology& topology() const noexcept;
  const ChannelConfig& channel() const noexcept;

  /// Emit at now + delay. Negative delays model pre-emitted (guessed) responses;
  /// delivery is never scheduled before the current instant.
  void send(Node dst, WireMessage msg, Picoseconds delay = Picoseconds{0}, int round = 0);
  /// Like send, but bypasses interception (used by the adversary itself).
  void send_direct(Node dst, WireMessage msg, Picoseconds delay = Picoseconds{0}, int round = 0);
  void set_timer(Picoseconds delay, int tag);

 private:
  Simulator& sim_;
  Node self_;
};

class Endpoint {
 public:
  virtual ~Endpoint() = default;
  virtual void start(Context&) {}
  virtual void on_message(Node from, const WireMessage& msg, int round, Context& ctx) = 0;
  virtual void on_timer(int /*tag*/, Context&) {}
  virtual bool done() const = 0;
};

struct TrialTrace {
  std::vector<TraceRecord> records;  // filled only when tracing is enabled
  std::size_t messages_sent = 0;
  std::size_t messages_delivered = 0;
  Picoseconds finished_at{0};
};

class Simulator {
 public:
  /// Party streams are labeled stream_prefix + "party-A" and so on.
  Simulator(Topology topology, ChannelConfig channel, std::uint64_t master_seed,
            std::uint64_t trial, bool record_trace = false, std::string_view stream_prefix = "");

  void attach(Node node, Endpoint& endpoint);
  /// Route every A<->B message to M instead (man-in-the-middle placement).
  void set_interception(bool on) { intercept_ = on; }
  /// The run fails with DeadlockedTrial if a required endpoint is unfinished at the end.
  void require(Node node) { required_[index(node)] = true; }

  TrialTrace run();

  Picoseconds now() const noexcept { return now_; }
  QuantumRegistry& registry() noexcept { return registry_; }
  Rng& stream(Node node) noexcept { return streams_[index(node)]; }
  const Topology& topology() const noexcept { return topology_; }
  const ChannelConfig& channel() const noexcept { return channel_; }

  void send(Node src, Node dst, WireMessage msg, Picoseconds delay, int round, bool direct);
  void set_timer(Node owner, Picoseconds delay, int tag);

 private:
  struct Event {
    Picoseconds time;
    std::uint64_t seq;
    bool is_timer;
    Node src;
    Node dst;
    int round_or_tag;
    std::shared_ptr<WireMessage> msg;
  };
  struct Later {
    bool operator()(const Event& x, const Event& y) const noexcept {
      return x.time != y.time ? x.time > y.time : x.seq > y.seq;
    }
  };

  static std::size_t index(Node n) noexcept { return static_cast<std::size_t>(n); }

  Topology topology_;
  ChannelConfig channel_;
  std::uint64_t trial_;
  bool record_trace_;
  bool intercept_ = false;
  Picoseconds now_{0};
  std::uint64_t seq_ = 0;
  std::array<Endpoint*, 3> endpoints_{};
  std::array<bool, 3> required_{};
  std::array<Rng, 3> streams_;
  Rng channel_rng_;
  QuantumRegistry registry_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  TrialTrace trace_;
};

}  // namespace qdb

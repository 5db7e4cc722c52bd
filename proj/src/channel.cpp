#include "qdb/channel.hpp"

#include <cmath>
#include <limits>

#include "json.hpp"
#include "qdb/errors.hpp"

namespace qdb {

std::string_view to_string(Node node) {
  switch (node) {
    case Node::A: return "A";
    case Node::B: return "B";
    case Node::M: return "M";
  }
  return "?";
}

double Topology::position(Node node) const {
  switch (node) {
    case Node::A: return position_a;
    case Node::B: return position_b;
    case Node::M:
      if (!position_m) throw InvalidArgument("topology has no adversary position");
      return *position_m;
  }
  throw InvalidArgument("unknown node");
}

double Topology::distance(Node x, Node y) const { return std::fabs(position(x) - position(y)); }

Picoseconds propagation_delay(double meters, double signal_speed) {
  if (!(meters >= 0.0) || !std::isfinite(meters)) {
    throw InvalidArgument("propagation_delay: distance must be finite and non-negative");
  }
  if (!(signal_speed > 0.0)) throw InvalidArgument("propagation_delay: signal speed must be positive");
  // Values within 1e-6 ps of an integer snap to it; anything else rounds up.
  const long double ps = static_cast<long double>(meters) * 1e12L / static_cast<long double>(signal_speed);
  const long double nearest = std::nearbyint(ps);
  if (std::fabs(ps - nearest) <= 1e-6L) {
    return Picoseconds{static_cast<std::int64_t>(nearest)};
  }
  return Picoseconds{static_cast<std::int64_t>(std::ceil(ps))};
}

double rtt_to_distance(Picoseconds t_s, Picoseconds t_r, Picoseconds alpha, double signal_speed) {
  const auto flight = t_r - t_s - alpha;
  if (flight.count() < 0) {
    throw NegativeElapsed("rtt_to_distance: t_r - t_s is shorter than the processing delay");
  }
  return static_cast<double>(flight.count()) * 1e-12 / 2.0 * signal_speed;
}

std::string to_json_line(const TraceRecord& record) {
  nlohmann::ordered_json j;
  j["trial"] = record.trial;
  j["time_ps"] = record.time.count();
  j["arrive_ps"] = record.arrive.count();
  j["src"] = std::string(to_string(record.src));
  j["dst"] = std::string(to_string(record.dst));
  j["kind"] = record.kind;
  j["round"] = record.round;
  j["payload"] = record.payload;
  if (record.dropped) j["dropped"] = true;
  return j.dump();
}

Picoseconds Context::now() const noexcept { return sim_.now(); }
QuantumRegistry& Context::registry() noexcept { return sim_.registry(); }
Rng& Context::rng() noexcept { return sim_.stream(self_); }
const Topology& Context::topology() const noexcept { return sim_.topology(); }
const ChannelConfig& Context::channel() const noexcept { return sim_.channel(); }

void Context::send(Node dst, WireMessage msg, Picoseconds delay, int round) {
  sim_.send(self_, dst, std::move(msg), delay, round, false);
}

void Context::send_direct(Node dst, WireMessage msg, Picoseconds delay, int round) {
  sim_.send(self_, dst, std::move(msg), delay, round, true);
}

void Context::set_timer(Picoseconds delay, int tag) { sim_.set_timer(self_, delay, tag); }

Simulator::Simulator(Topology topology, ChannelConfig channel, std::uint64_t master_seed,
                     std::uint64_t trial, bool record_trace, std::string_view stream_prefix)
    : topology_(std::move(topology)),
      channel_(channel),
      trial_(trial),
      record_trace_(record_trace),
      streams_{make_stream(master_seed, trial, std::string(stream_prefix) + "party-A"),
               make_stream(master_seed, trial, std::string(stream_prefix) + "party-B"),
               make_stream(master_seed, trial, std::string(stream_prefix) + "adversary")},
      channel_rng_(make_stream(master_seed, trial, std::string(stream_prefix) + "channel")),
      registry_(make_stream(master_seed, trial, std::string(stream_prefix) + "registry")) {
  if (channel_.alpha.count() < 0) throw InvalidArgument("processing delay must be non-negative");
  if (!(channel_.distance_budget_m > 0.0)) throw InvalidArgument("distance budget must be positive");
  if (!(channel_.loss_probability >= 0.0 && channel_.loss_probability <= 1.0)) {
    throw InvalidArgument("loss probability must lie in [0, 1]");
  }
  if (!std::isfinite(topology_.position_a) || !std::isfinite(topology_.position_b) ||
      (topology_.position_m && !std::isfinite(*topology_.position_m))) {
    throw InvalidArgument("positions must be finite");
  }
}

void Simulator::attach(Node node, Endpoint& endpoint) {
  if (!topology_.has(node)) throw InvalidArgument("node is not part of the topology");
  endpoints_[index(node)] = &endpoint;
}

void Simulator::send(Node src, Node dst, WireMessage msg, Picoseconds delay, int round, bool direct) {
  if (!topology_.has(dst) || endpoints_[index(dst)] == nullptr) {
    throw InvalidArgument("send: unknown destination " + std::string(to_string(dst)));
  }
  if (const QuantumHandle* q = carried_qubit(msg); q != nullptr && !registry_.is_live(*q)) {
    throw ProtocolViolation("send: qubit handle is not live");
  }

  Node to = dst;
  if (intercept_ && !direct && src != Node::M && dst != Node::M && endpoints_[index(Node::M)]) {
    to = Node::M;
  }

  const Picoseconds emitted = now_ + delay;
  Picoseconds arrive = emitted + propagation_delay(topology_.distance(src, to), topology_.signal_speed);
  if (arrive < now_) arrive = now_;

  bool dropped = false;
  if (channel_.loss_probability > 0.0 && round >= 1) dropped = uniform01(channel_rng_) < channel_.loss_probability;

  ++trace_.messages_sent;
  if (record_trace_) {
    trace_.records.push_back(TraceRecord{trial_, emitted, arrive, src, to, std::string(kind_name(msg)),
                                         round, payload_summary(msg), dropped});
  }
  if (dropped) return;
  queue_.push(Event{arrive, seq_++, false, src, to, round,
                    std::make_shared<WireMessage>(std::move(msg))});
}

void Simulator::set_timer(Node owner, Picoseconds delay, int tag) {
  if (delay.count() < 0) throw InvalidArgument("set_timer: negative delay");
  queue_.push(Event{now_ + delay, seq_++, true, owner, owner, tag, nullptr});
}

TrialTrace Simulator::run() {
  bool any_required = false;
  for (bool r : required_) any_required = any_required || r;
  auto finished = [&] {
    for (std::size_t i = 0; i < endpoints_.size(); ++i) {
      if (endpoints_[i] == nullptr) continue;
      const bool counts = any_required ? required_[i] : true;
      if (counts && !endpoints_[i]->done()) return false;
    }
    return true;
  };

  for (std::size_t i = 0; i < endpoints_.size(); ++i) {
    if (endpoints_[i] == nullptr) continue;
    Context ctx(*this, static_cast<Node>(i));
    endpoints_[i]->start(ctx);
  }
  if (queue_.empty() && !finished()) throw DeadlockedTrial("no initial events");

  while (!queue_.empty() && !finished()) {
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.time;
    Endpoint* target = endpoints_[index(ev.dst)];
    if (target == nullptr) continue;
    Context ctx(*this, ev.dst);
    if (ev.is_timer) {
      target->on_timer(ev.round_or_tag, ctx);
    } else {
      ++trace_.messages_delivered;
      target->on_message(ev.src, *ev.msg, ev.round_or_tag, ctx);
    }
  }

  if (!finished()) {
    for (std::size_t i = 0; i < endpoints_.size(); ++i) {
      const bool counts = any_required ? required_[i] : endpoints_[i] != nullptr;
      if (counts && endpoints_[i] && !endpoints_[i]->done()) {
        throw DeadlockedTrial("event queue drained while party " +
                              std::string(to_string(static_cast<Node>(i))) + " was still running");
      }
    }
  }
  trace_.finished_at = now_;
  return std::move(trace_);
}

}  // namespace qdb

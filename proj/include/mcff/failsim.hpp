#pragma once

// Failure injection on an emulated fabric: single-packet delivery runs,
// exhaustive F-link verification, depth hopcounts and a recovery-time model.

#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dataplane.hpp"

namespace mcff {

class EnumerationLimit : public Error {
public:
  using Error::Error;
};

struct FailureSet {
  std::set<Link> links;

  bool empty() const noexcept { return links.empty(); }
  std::size_t size() const noexcept { return links.size(); }
  bool contains(const Link& l) const { return links.count(l) != 0; }

  friend bool operator==(const FailureSet&, const FailureSet&) = default;
  friend auto operator<=>(const FailureSet&, const FailureSet&) = default;
};

inline std::string to_string(const FailureSet& fs) {
  std::string s;
  for (const auto& l : fs.links) {
    if (!s.empty()) s += " ";
    s += to_string(l);
  }
  return s.empty() ? "-" : s;
}

struct SubscriberDelivery {
  bool delivered = false;
  std::size_t hopcount = 0;  // shortest delivering copy
  std::size_t duplicates = 0;

  friend bool operator==(const SubscriberDelivery&, const SubscriberDelivery&) = default;
};

struct DeliveryReport {
  FailureSet failures;
  std::map<NodeId, SubscriberDelivery> subscribers;
  std::size_t unmatched = 0;
  std::size_t spurious = 0;  // host deliveries at non-subscribers
  std::size_t lost_on_down_link = 0;
  bool loop_detected = false;

  bool all_delivered() const {
    for (const auto& [n, d] : subscribers)
      if (!d.delivered) return false;
    return true;
  }
  std::size_t duplicate_total() const {
    std::size_t s = 0;
    for (const auto& [n, d] : subscribers) s += d.duplicates;
    return s;
  }

  friend bool operator==(const DeliveryReport&, const DeliveryReport&) = default;
};

/// Injects one untagged packet at the source host with `fs` failed on top of
/// the fabric's current link state, and follows every copy. Link state is
/// restored before returning.
inline DeliveryReport simulate_delivery(Fabric& f, const GroupState& gs, const FailureSet& fs = {}) {
  const Network& g = f.network();
  std::map<Link, bool> saved;
  for (const auto& l : fs.links) {
    saved.emplace(l, f.link_up(l));
    f.set_link_state(l, false);
  }

  DeliveryReport rep;
  rep.failures = fs;
  std::map<NodeId, std::size_t> copies;
  for (const auto& s : gs.subscribers()) rep.subscribers[s] = {};

  struct InFlight {
    NodeId at;
    Packet pkt;
    PortNo ingress;
  };
  std::deque<InFlight> wire;
  wire.push_back({gs.source(), Packet{gs.key(), std::nullopt, {}}, f.host_port(gs.source())});
  while (!wire.empty()) {
    InFlight cur = std::move(wire.front());
    wire.pop_front();
    const SwitchState& sw = f.at(cur.at);
    const ForwardResult out = forward(sw, cur.pkt, cur.ingress);
    if (out.unmatched) ++rep.unmatched;
    for (const auto& eg : out.egress) {
      const Port& port = sw.ports().at(eg.port);
      if (port.is_host()) {
        auto it = rep.subscribers.find(cur.at);
        if (it == rep.subscribers.end() || cur.at == gs.source()) {
          ++rep.spurious;
          continue;
        }
        auto& d = it->second;
        const std::size_t hops = cur.pkt.hop_trace.size();
        d.hopcount = d.delivered ? std::min(d.hopcount, hops) : hops;
        d.delivered = true;
        ++copies[cur.at];
        continue;
      }
      if (!port.live) {
        ++rep.lost_on_down_link;
        continue;
      }
      Packet next{cur.pkt.key, eg.tag, cur.pkt.hop_trace};
      next.hop_trace.emplace_back(cur.at, *port.peer);
      if (next.hop_trace.size() > g.link_count()) {
        rep.loop_detected = true;
        continue;
      }
      wire.push_back({*port.peer, std::move(next), f.port_to(*port.peer, cur.at)});
    }
  }
  for (const auto& [n, c] : copies) rep.subscribers[n].duplicates = c - 1;

  for (const auto& [l, up] : saved) f.set_link_state(l, up);
  return rep;
}

/// Outcome the protection structure promises for v under fs, computed from
/// the trees alone (no dataplane).
struct Expectation {
  enum class Kind { Deliver, Excused, Inconsistent } kind = Kind::Deliver;
  std::size_t hopcount = 0;
  std::string reason;
};

/// Walks route(T, v); at the first failed edge it continues in that edge's
/// backup tree from the edge's upstream switch. A branch without a backup
/// path for v (recorded at install time) excuses the failure.
inline Expectation expected_delivery(const GroupState& gs, const NodeId& v, const FailureSet& fs) {
  const MulticastTree* t = &gs.primary();
  std::size_t hops = 0;
  for (std::size_t guard = 0; guard <= fs.size(); ++guard) {
    if (!t->is_terminal(v)) return {Expectation::Kind::Inconsistent, 0, "not a terminal of tree " + std::to_string(t->tag())};
    const Path route = *t->route_to(v);
    std::optional<DirectedEdge> cut;
    std::size_t prefix = 0;
    for (const auto& e : route.edges) {
      if (fs.contains(e.link())) {
        cut = e;
        break;
      }
      ++prefix;
    }
    if (!cut) return {Expectation::Kind::Deliver, hops + route.size(), ""};
    hops += prefix;
    const MulticastTree* b = gs.backup(*t, *cut);
    if (!b || !b->is_terminal(v)) {
      if (t->backup_absent(*cut, v))
        return {Expectation::Kind::Excused, 0, "no backup path around " + to_string(*cut)};
      if (!b && t->depth() >= gs.config().fault_tolerance)
        return {Expectation::Kind::Excused, 0, "more failures than protected"};
      return {Expectation::Kind::Inconsistent, 0, "backup of " + to_string(*cut) + " missing without a recorded absence"};
    }
    t = b;
  }
  return {Expectation::Kind::Excused, 0, "more failures than protected"};
}

struct ToleranceViolation {
  FailureSet failures;
  NodeId subscriber;
  std::string reason;
};

struct ToleranceReport {
  std::size_t sets_checked = 0;
  std::size_t excused = 0;  // (set, subscriber) pairs excused by a recorded absence
  std::size_t duplicates = 0;
  std::size_t loops = 0;
  std::vector<ToleranceViolation> violations;

  bool ok() const noexcept { return violations.empty() && loops == 0; }
};

inline std::uint64_t combinations_up_to(std::size_t n, std::size_t k) {
  std::uint64_t total = 0;
  for (std::size_t i = 0; i <= k && i <= n; ++i) {
    std::uint64_t c = 1;
    for (std::size_t j = 0; j < i; ++j) c = c * (n - j) / (j + 1);
    total += c;
  }
  return total;
}

/// Checks one simulated delivery against the structural expectation.
inline void check_report(const GroupState& gs, const DeliveryReport& rep, ToleranceReport& out) {
  ++out.sets_checked;
  out.duplicates += rep.duplicate_total();
  if (rep.loop_detected) ++out.loops;
  for (const auto& [v, d] : rep.subscribers) {
    const Expectation exp = expected_delivery(gs, v, rep.failures);
    switch (exp.kind) {
      case Expectation::Kind::Excused:
        ++out.excused;
        break;
      case Expectation::Kind::Inconsistent:
        out.violations.push_back({rep.failures, v, exp.reason});
        break;
      case Expectation::Kind::Deliver:
        if (!d.delivered) out.violations.push_back({rep.failures, v, "not delivered"});
        break;
    }
  }
}

/// Every failure set of at most F links, in sorted order.
inline ToleranceReport verify_tolerance(Fabric& f, const GroupState& gs, std::size_t F,
                                        std::uint64_t max_sets = 1'000'000) {
  const auto& links = f.network().links();
  const std::uint64_t total = combinations_up_to(links.size(), F);
  if (total > max_sets)
    throw EnumerationLimit(std::to_string(total) + " failure sets exceed the cap of " + std::to_string(max_sets));

  ToleranceReport out;
  std::vector<std::size_t> pick;
  for (std::size_t k = 0; k <= F && k <= links.size(); ++k) {
    pick.resize(k);
    for (std::size_t i = 0; i < k; ++i) pick[i] = i;
    while (true) {
      FailureSet fs;
      for (auto i : pick) fs.links.insert(links[i]);
      check_report(gs, simulate_delivery(f, gs, fs), out);
      // next combination
      std::size_t i = k;
      while (i > 0 && pick[i - 1] == links.size() - k + i - 1) --i;
      if (i == 0) break;
      ++pick[i - 1];
      for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
    }
  }
  return out;
}

struct DepthHopcount {
  std::size_t depth = 0;
  std::size_t chains = 0;
  std::size_t undelivered = 0;
  double average = 0.0;
};

namespace detail {

inline void collect_chains(const GroupState& gs, const MulticastTree& t, const NodeId& v, std::size_t remaining,
                           std::set<Link>& down, std::vector<FailureSet>& out) {
  if (remaining == 0) {
    out.push_back({down});
    return;
  }
  const Path route = *t.route_to(v);
  for (const auto& e : route.edges) {
    const MulticastTree* b = gs.backup(t, e);
    if (!b || !b->is_terminal(v)) continue;
    down.insert(e.link());
    collect_chains(gs, *b, v, remaining - 1, down, out);
    down.erase(e.link());
  }
}

}  // namespace detail

/// Average delivery hopcount over every chain of k nested backup trees that
/// actually serves a subscriber, failing exactly the chain's links.
inline DepthHopcount depth_hopcounts(Fabric& f, const GroupState& gs, std::size_t k) {
  if (k > gs.config().fault_tolerance)
    throw Error("depth " + std::to_string(k) + " exceeds the fault tolerance " +
                std::to_string(gs.config().fault_tolerance));
  DepthHopcount out;
  out.depth = k;
  std::size_t sum = 0;
  for (const auto& v : gs.subscribers()) {
    std::vector<FailureSet> chains;
    std::set<Link> down;
    detail::collect_chains(gs, gs.primary(), v, k, down, chains);
    for (const auto& fs : chains) {
      ++out.chains;
      const auto rep = simulate_delivery(f, gs, fs);
      const auto& d = rep.subscribers.at(v);
      if (!d.delivered) {
        ++out.undelivered;
        continue;
      }
      sum += d.hopcount;
    }
  }
  const std::size_t counted = out.chains - out.undelivered;
  out.average = counted ? static_cast<double>(sum) / static_cast<double>(counted) : 0.0;
  return out;
}

enum class RecoveryKind { FastFailover, FastTreeSwitching, Restoration };

inline std::string to_string(RecoveryKind k) {
  switch (k) {
    case RecoveryKind::FastFailover: return "ff";
    case RecoveryKind::FastTreeSwitching: return "switch";
    case RecoveryKind::Restoration: return "restore";
  }
  return "?";
}

struct RecoveryModel {
  RecoveryKind kind = RecoveryKind::FastFailover;
  double detection_ms = 0.0;
  double controller_rtt_ms = 0.0;
  double per_flowmod_ms = 0.0;
  double compute_ms = 0.0;
  double packet_rate_hz = 120.0;
};

struct OutageScenario {
  std::size_t cuts = 1;
  std::size_t affected_groups = 1;    // root flows rewritten per cut
  std::size_t entries_to_restore = 1; // flow mods per cut for restoration
  double duration_ms = 10'000.0;
};

struct RecoveryResult {
  double outage_ms_per_cut = 0.0;
  std::uint64_t lost_per_cut = 0;
  std::uint64_t lost_total = 0;  // per affected subscriber
};

inline double outage_ms(const RecoveryModel& m, const OutageScenario& s) {
  switch (m.kind) {
    case RecoveryKind::FastFailover:
      return m.detection_ms;
    case RecoveryKind::FastTreeSwitching:
      return m.detection_ms + m.controller_rtt_ms + m.per_flowmod_ms * static_cast<double>(s.affected_groups);
    case RecoveryKind::Restoration:
      return m.detection_ms + m.controller_rtt_ms + m.compute_ms +
             m.per_flowmod_ms * static_cast<double>(s.entries_to_restore);
  }
  return 0.0;
}

/// Packets a subscriber misses while each cut is being repaired, for a
/// constant-rate stream. The outage never exceeds the stream duration.
inline RecoveryResult simulate_recovery(const RecoveryModel& m, const OutageScenario& s) {
  for (double x : {m.detection_ms, m.controller_rtt_ms, m.per_flowmod_ms, m.compute_ms, s.duration_ms})
    if (x < 0 || !std::isfinite(x)) throw Error("recovery parameters must be finite and nonnegative");
  if (!(m.packet_rate_hz > 0) || !std::isfinite(m.packet_rate_hz)) throw Error("packet rate must be positive");
  RecoveryResult r;
  r.outage_ms_per_cut = std::min(outage_ms(m, s), s.duration_ms);
  r.lost_per_cut = static_cast<std::uint64_t>(std::floor(r.outage_ms_per_cut * m.packet_rate_hz / 1000.0));
  r.lost_total = r.lost_per_cut * s.cuts;
  return r;
}

}  // namespace mcff

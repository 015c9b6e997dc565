#pragma once

// Scenario replay, resource metrics, CSV output and the randomized
// join-order experiments.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "failsim.hpp"
#include "topology.hpp"

namespace mcff {

class ScenarioError : public Error {
public:
  using Error::Error;
};

struct ScenarioEvent {
  enum class Op { Join, Leave, Fail, Restore, Inject };
  Op op = Op::Inject;
  NodeId node;        // join / leave
  Link link;          // fail / restore
  std::size_t count = 1;  // inject
};

inline std::string to_string(ScenarioEvent::Op op) {
  switch (op) {
    case ScenarioEvent::Op::Join: return "join";
    case ScenarioEvent::Op::Leave: return "leave";
    case ScenarioEvent::Op::Fail: return "fail";
    case ScenarioEvent::Op::Restore: return "restore";
    case ScenarioEvent::Op::Inject: return "inject";
  }
  return "?";
}

inline std::string describe(const ScenarioEvent& e) {
  switch (e.op) {
    case ScenarioEvent::Op::Join:
    case ScenarioEvent::Op::Leave: return to_string(e.op) + " " + e.node.str();
    case ScenarioEvent::Op::Fail:
    case ScenarioEvent::Op::Restore: return to_string(e.op) + " " + to_string(e.link);
    case ScenarioEvent::Op::Inject: return "inject " + std::to_string(e.count);
  }
  return "?";
}

struct Scenario {
  NodeId source;
  GroupKey group = "g0";
  ProtectionConfig config;
  std::vector<ScenarioEvent> events;
};

inline Strategy parse_strategy(const std::string& s) {
  if (s == "spt") return Strategy::Spt;
  if (s == "dst") return Strategy::Dst;
  throw ScenarioError("unknown tree strategy '" + s + "' (expected spt or dst)");
}

/// {"source": "AT", "group": "g0", "tree": "spt", "F": 1,
///  "events": [{"op": "join", "arg": "BE"}, {"op": "fail", "arg": ["AT", "BE"]}, {"op": "inject", "arg": 1}]}
inline Scenario load_scenario(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ScenarioError("scenario must be an object");
  Scenario sc;
  if (!doc.contains("source") || !doc["source"].is_string()) throw ScenarioError("scenario needs a 'source' string");
  sc.source = doc["source"].get<std::string>();
  if (doc.contains("group")) sc.group = doc["group"].get<std::string>();
  if (doc.contains("tree")) sc.config.strategy = parse_strategy(doc["tree"].get<std::string>());
  if (doc.contains("F")) sc.config.fault_tolerance = doc["F"].get<std::size_t>();
  if (!doc.contains("events") || !doc["events"].is_array()) throw ScenarioError("scenario needs an 'events' array");
  for (const auto& ev : doc["events"]) {
    if (!ev.is_object() || !ev.contains("op") || !ev["op"].is_string())
      throw ScenarioError("each event needs an 'op' string");
    const std::string op = ev["op"].get<std::string>();
    const nlohmann::json arg = ev.value("arg", nlohmann::json());
    ScenarioEvent e;
    if (op == "join" || op == "leave") {
      if (!arg.is_string()) throw ScenarioError(op + " needs a node id");
      e.op = op == "join" ? ScenarioEvent::Op::Join : ScenarioEvent::Op::Leave;
      e.node = arg.get<std::string>();
    } else if (op == "fail" || op == "restore") {
      if (!arg.is_array() || arg.size() != 2 || !arg[0].is_string() || !arg[1].is_string())
        throw ScenarioError(op + " needs a [node, node] link");
      e.op = op == "fail" ? ScenarioEvent::Op::Fail : ScenarioEvent::Op::Restore;
      e.link = Link(arg[0].get<std::string>(), arg[1].get<std::string>());
    } else if (op == "inject") {
      e.op = ScenarioEvent::Op::Inject;
      if (!arg.is_null()) {
        if (!arg.is_number_unsigned() || arg.get<std::size_t>() == 0) throw ScenarioError("inject needs a positive count");
        e.count = arg.get<std::size_t>();
      }
    } else {
      throw ScenarioError("unknown event op '" + op + "'");
    }
    sc.events.push_back(std::move(e));
  }
  return sc;
}

inline Scenario parse_scenario(std::string_view text) {
  try {
    return load_scenario(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("malformed scenario: ") + e.what());
  }
}

inline Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

struct MetricsSnapshot {
  std::size_t index = 0;
  std::string label;
  std::map<NodeId, std::array<std::size_t, kTableCount>> flows;
  std::map<NodeId, std::size_t> groups;
  std::size_t tags_in_use = 0;
  std::size_t join_calls = 0;
  std::size_t subscribers = 0;
  double build_ms = 0.0;  // wall clock, not deterministic

  std::size_t flow_total() const {
    std::size_t s = 0;
    for (const auto& [n, f] : flows) s += f[0] + f[1] + f[2];
    return s;
  }
  std::size_t table_total(std::size_t t) const {
    std::size_t s = 0;
    for (const auto& [n, f] : flows) s += f.at(t);
    return s;
  }
  std::size_t group_total() const {
    std::size_t s = 0;
    for (const auto& [n, g] : groups) s += g;
    return s;
  }
  std::size_t max_flows() const {
    std::size_t m = 0;
    for (const auto& [n, f] : flows) m = std::max(m, f[0] + f[1] + f[2]);
    return m;
  }
  std::size_t max_groups() const {
    std::size_t m = 0;
    for (const auto& [n, g] : groups) m = std::max(m, g);
    return m;
  }
};

inline MetricsSnapshot snapshot(const Fabric& f, const GroupState& gs, std::size_t index, std::string label) {
  MetricsSnapshot s;
  s.index = index;
  s.label = std::move(label);
  for (const auto& [n, sw] : f.switches()) {
    s.flows[n] = sw.flow_counts();
    s.groups[n] = sw.group_count();
  }
  s.tags_in_use = gs.tags_in_use();
  s.join_calls = gs.stats().join_calls;
  s.subscribers = gs.subscribers().size();
  return s;
}

/// Ordered (name, value) pairs; per-switch values use name[switch].
inline std::vector<std::pair<std::string, std::size_t>> metric_rows(const MetricsSnapshot& s) {
  std::vector<std::pair<std::string, std::size_t>> rows{
      {"subscribers", s.subscribers},
      {"flow_entries_total", s.flow_total()},
      {"flow_entries_table0", s.table_total(0)},
      {"flow_entries_table1", s.table_total(1)},
      {"flow_entries_table2", s.table_total(2)},
      {"flow_entries_max_switch", s.max_flows()},
      {"ff_groups_total", s.group_total()},
      {"ff_groups_max_switch", s.max_groups()},
      {"tags_in_use", s.tags_in_use},
      {"join_calls", s.join_calls},
  };
  for (const auto& [n, f] : s.flows) rows.emplace_back("flow_entries[" + n.str() + "]", f[0] + f[1] + f[2]);
  for (const auto& [n, g] : s.groups) rows.emplace_back("ff_groups[" + n.str() + "]", g);
  return rows;
}

struct ScenarioResult {
  std::vector<MetricsSnapshot> snapshots;
  std::vector<DeliveryReport> deliveries;
  std::vector<std::string> violations;

  bool ok() const noexcept { return violations.empty(); }
};

/// Live replay state: one group on a fresh fabric.
class Replay {
public:
  Replay(const Network& g, const Scenario& sc)
      : g_(&g), sc_(sc), gs_(sc.group, sc.source, sc.config), fabric_(g), installer_(fabric_) {
    if (!g.contains(sc.source)) throw ScenarioError("unknown source '" + sc.source.str() + "'");
    fabric_.register_group(gs_);
  }
  Replay(const Replay&) = delete;
  Replay& operator=(const Replay&) = delete;

  const GroupState& group() const noexcept { return gs_; }
  Fabric& fabric() noexcept { return fabric_; }
  const std::set<Link>& down() const noexcept { return down_; }

  /// Applies event i. Membership events append a snapshot; every injected
  /// packet is checked against the protection structure's expectation for
  /// the links that are currently down.
  void apply(std::size_t i, ScenarioResult& out) {
    const ScenarioEvent& ev = sc_.events.at(i);
    const std::string where = "event " + std::to_string(i + 1) + " (" + describe(ev) + ")";
    switch (ev.op) {
      case ScenarioEvent::Op::Join:
      case ScenarioEvent::Op::Leave: {
        if (!g_->contains(ev.node)) throw ScenarioError(where + ": unknown node");
        const auto t0 = std::chrono::steady_clock::now();
        if (ev.op == ScenarioEvent::Op::Join) {
          if (ev.node == gs_.source() || gs_.primary().is_terminal(ev.node))
            throw ScenarioError(where + ": host already in the group");
          if (!protect_join(gs_, *g_, ev.node, installer_)) out.violations.push_back(where + ": subscriber unreachable");
        } else {
          if (!gs_.primary().is_terminal(ev.node)) throw ScenarioError(where + ": host is not a subscriber");
          protect_leave(gs_, ev.node, installer_);
        }
        const auto t1 = std::chrono::steady_clock::now();
        auto snap = snapshot(fabric_, gs_, out.snapshots.size(), describe(ev));
        snap.build_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        out.snapshots.push_back(std::move(snap));
        break;
      }
      case ScenarioEvent::Op::Fail:
      case ScenarioEvent::Op::Restore:
        if (!g_->has_link(ev.link)) throw ScenarioError(where + ": unknown link");
        fabric_.set_link_state(ev.link, ev.op == ScenarioEvent::Op::Restore);
        if (ev.op == ScenarioEvent::Op::Fail) down_.insert(ev.link);
        else down_.erase(ev.link);
        break;
      case ScenarioEvent::Op::Inject: {
        DeliveryReport rep = simulate_delivery(fabric_, gs_);
        rep.failures.links = down_;
        ToleranceReport check;
        if (down_.size() <= gs_.config().fault_tolerance) check_report(gs_, rep, check);
        for (const auto& v : check.violations) out.violations.push_back(where + ": " + v.subscriber.str() + " " + v.reason);
        if (rep.loop_detected) out.violations.push_back(where + ": forwarding loop");
        if (down_.empty() && (rep.duplicate_total() > 0 || rep.spurious > 0))
          out.violations.push_back(where + ": duplicate or spurious delivery");
        for (std::size_t c = 0; c < ev.count; ++c) out.deliveries.push_back(rep);
        break;
      }
    }
  }

private:
  const Network* g_;
  Scenario sc_;
  GroupState gs_;
  Fabric fabric_;
  FabricInstaller installer_;
  std::set<Link> down_;
};

inline ScenarioResult run_scenario(const Network& g, const Scenario& sc) {
  Replay replay(g, sc);
  ScenarioResult out;
  out.snapshots.push_back(snapshot(replay.fabric(), replay.group(), 0, "initial"));
  for (std::size_t i = 0; i < sc.events.size(); ++i) replay.apply(i, out);
  return out;
}

inline void write_metrics_csv(std::ostream& os, const std::vector<MetricsSnapshot>& snaps) {
  os << "snapshot,event,metric,value\n";
  for (const auto& s : snaps)
    for (const auto& [name, value] : metric_rows(s)) os << s.index << "," << s.label << "," << name << "," << value << "\n";
}

inline void write_deliveries_csv(std::ostream& os, const std::vector<DeliveryReport>& reps) {
  os << "injection,failure_set,subscriber,delivered,hopcount,duplicates\n";
  for (std::size_t i = 0; i < reps.size(); ++i)
    for (const auto& [v, d] : reps[i].subscribers)
      os << i << "," << to_string(reps[i].failures) << "," << v << "," << (d.delivered ? 1 : 0) << ","
         << (d.delivered ? std::to_string(d.hopcount) : std::string()) << "," << d.duplicates << "\n";
}

inline void write_timing_csv(std::ostream& os, const std::vector<MetricsSnapshot>& snaps) {
  os << "snapshot,event,build_ms\n";
  for (const auto& s : snaps) os << s.index << "," << s.label << "," << s.build_ms << "\n";
}

/// Switches whose group count exceeds `limit`, in NodeId order.
inline std::vector<std::pair<NodeId, std::size_t>> capacity_check(const MetricsSnapshot& m, std::size_t limit) {
  if (limit == 0) throw Error("group limit must be positive");
  std::vector<std::pair<NodeId, std::size_t>> out;
  for (const auto& [n, c] : m.groups)
    if (c > limit) out.emplace_back(n, c);
  return out;
}

struct Preset {
  enum class Kind { Geant, Complete } kind = Kind::Geant;
  std::size_t n = 0;

  static Preset geant() { return {Kind::Geant, 0}; }
  static Preset complete(std::size_t n) { return {Kind::Complete, n}; }

  Network network() const { return kind == Kind::Geant ? geant_topology() : complete_graph(n); }
  NodeId source(const Network& g) const { return kind == Kind::Geant ? geant_source() : g.node(0); }
  std::string name() const { return kind == Kind::Geant ? "geant" : "complete(" + std::to_string(n) + ")"; }
};

struct GeoreplayConfig {
  Preset preset;
  Strategy strategy = Strategy::Spt;
  std::size_t fault_tolerance = 1;
  std::uint64_t seed = 1;
  std::size_t repetitions = 5;
  bool depth_hopcounts = true;
  bool parallel = true;
};

struct RepetitionResult {
  std::uint64_t seed = 0;
  std::vector<NodeId> join_order;
  MetricsSnapshot final;
  std::vector<DepthHopcount> depth;  // index k = number of failed links
  std::size_t max_join_calls = 0;    // largest single protect_join
};

struct GeoreplayResult {
  GeoreplayConfig config;
  std::vector<RepetitionResult> reps;

  double mean(auto&& metric) const {
    double s = 0;
    for (const auto& r : reps) s += static_cast<double>(metric(r));
    return reps.empty() ? 0.0 : s / static_cast<double>(reps.size());
  }
  double mean_depth(std::size_t k) const {
    return mean([k](const RepetitionResult& r) { return r.depth.at(k).average; });
  }
};

/// Seed of repetition i, derived from the experiment seed.
inline std::uint64_t repetition_seed(std::uint64_t seed, std::size_t i) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(i)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

/// One repetition: every non-source host joins in a shuffled order.
inline RepetitionResult run_repetition(const Network& g, const NodeId& source, Strategy strategy,
                                       std::size_t F, std::uint64_t seed, bool with_depth) {
  std::mt19937_64 rng(seed);
  RepetitionResult r;
  r.seed = seed;
  for (const auto& n : g.nodes())
    if (n != source) r.join_order.push_back(n);
  std::shuffle(r.join_order.begin(), r.join_order.end(), rng);

  ProtectionConfig cfg{F, strategy, {}};
  if (strategy == Strategy::Dst) {
    // DST attaches to the nearest tree node; ties are broken in a seeded
    // random order rather than by name.
    std::vector<NodeId> order(g.nodes());
    std::shuffle(order.begin(), order.end(), rng);
    cfg.dst_order = NodeOrder(order);
  }
  GroupState gs("g0", source, cfg);
  Fabric f(g);
  f.register_group(gs);
  FabricInstaller installer(f);
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& v : r.join_order) {
    protect_join(gs, g, v, installer);
    r.max_join_calls = std::max(r.max_join_calls, gs.stats().last_join_calls);
  }
  const auto t1 = std::chrono::steady_clock::now();
  r.final = snapshot(f, gs, r.join_order.size(), "final");
  r.final.build_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  if (with_depth)
    for (std::size_t k = 0; k <= F; ++k) r.depth.push_back(depth_hopcounts(f, gs, k));
  return r;
}

inline GeoreplayResult georeplay(const GeoreplayConfig& cfg) {
  const Network g = cfg.preset.network();
  const NodeId source = cfg.preset.source(g);
  GeoreplayResult out{cfg, {}};
  std::vector<std::future<RepetitionResult>> jobs;
  for (std::size_t i = 0; i < cfg.repetitions; ++i) {
    const auto seed = repetition_seed(cfg.seed, i);
    auto job = [&g, &source, &cfg, seed] {
      return run_repetition(g, source, cfg.strategy, cfg.fault_tolerance, seed, cfg.depth_hopcounts);
    };
    jobs.push_back(std::async(cfg.parallel ? std::launch::async : std::launch::deferred, job));
  }
  for (auto& j : jobs) out.reps.push_back(j.get());
  return out;
}

}  // namespace mcff

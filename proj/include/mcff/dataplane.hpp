#pragma once

// Emulated OpenFlow-style switches: three flow tables, fast-failover groups
// and VLAN tags, plus the compiler from protection trees to switch state.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "protect.hpp"

namespace mcff {

using PortNo = std::uint32_t;

inline constexpr std::size_t kTableCount = 3;

class DataplaneError : public Error {
public:
  using Error::Error;
};

/// Fast-failover group identity: the tree entry that owns it (key, tag), the
/// child port it protects and a copy index (0 = original).
struct GroupId {
  GroupKey key;
  Tag tag = 0;
  PortNo port = 0;
  std::uint32_t copy = 0;

  bool same_family(const GroupId& o) const { return key == o.key && tag == o.tag && port == o.port; }

  friend bool operator==(const GroupId&, const GroupId&) = default;
  friend auto operator<=>(const GroupId&, const GroupId&) = default;
};

inline std::string to_string(const GroupId& g) {
  return g.key + "/" + std::to_string(g.tag) + "/" + std::to_string(g.port) + "#" + std::to_string(g.copy);
}

namespace action {
struct Output {
  PortNo port;
  friend bool operator==(const Output&, const Output&) = default;
};
struct SetTag {
  Tag tag;
  friend bool operator==(const SetTag&, const SetTag&) = default;
};
struct PopTag {
  friend bool operator==(const PopTag&, const PopTag&) = default;
};
struct ToGroup {
  GroupId group;
  friend bool operator==(const ToGroup&, const ToGroup&) = default;
};
struct GotoTable {
  std::size_t table;
  friend bool operator==(const GotoTable&, const GotoTable&) = default;
};
struct Drop {
  friend bool operator==(const Drop&, const Drop&) = default;
};
}  // namespace action

using Action = std::variant<action::Output, action::SetTag, action::PopTag, action::ToGroup, action::GotoTable, action::Drop>;

inline std::string to_string(const Action& a) {
  struct Visitor {
    std::string operator()(const action::Output& o) const { return "output:" + std::to_string(o.port); }
    std::string operator()(const action::SetTag& s) const { return "tag=" + std::to_string(s.tag); }
    std::string operator()(const action::PopTag&) const { return "pop_tag"; }
    std::string operator()(const action::ToGroup& g) const { return "group:" + to_string(g.group); }
    std::string operator()(const action::GotoTable& g) const { return "goto:" + std::to_string(g.table); }
    std::string operator()(const action::Drop&) const { return "Drop"; }
  };
  return std::visit(Visitor{}, a);
}

inline std::string to_string(const std::vector<Action>& actions) {
  std::string s;
  for (const auto& a : actions) {
    if (!s.empty()) s += ",";
    s += to_string(a);
  }
  return s.empty() ? "Drop" : s;
}

/// Exact match on (multicast group, VLAN tag); tag 0 means untagged.
struct Match {
  GroupKey key;
  Tag tag = 0;

  friend bool operator==(const Match&, const Match&) = default;
  friend auto operator<=>(const Match&, const Match&) = default;
};

struct FlowEntry {
  std::size_t table = 0;
  Match match;
  int priority = 0;
  std::vector<Action> actions;

  friend bool operator==(const FlowEntry&, const FlowEntry&) = default;
};

struct Bucket {
  PortNo watch = 0;
  std::vector<Action> actions;

  friend bool operator==(const Bucket&, const Bucket&) = default;
};

struct FFGroup {
  GroupId id;
  std::vector<Bucket> buckets;

  friend bool operator==(const FFGroup&, const FFGroup&) = default;
};

struct Port {
  std::optional<NodeId> peer;  // nullopt: the attached host
  bool live = true;

  bool is_host() const noexcept { return !peer.has_value(); }
  friend bool operator==(const Port&, const Port&) = default;
};

/// One packet copy on the wire.
struct Packet {
  GroupKey key;
  std::optional<Tag> tag;
  std::vector<Link> hop_trace;
};

struct Egress {
  PortNo port;
  std::optional<Tag> tag;

  friend bool operator==(const Egress&, const Egress&) = default;
  friend auto operator<=>(const Egress&, const Egress&) = default;
};

struct ForwardResult {
  std::vector<Egress> egress;
  bool unmatched = false;
};

class SwitchState {
public:
  SwitchState() = default;
  explicit SwitchState(NodeId name) : name_(std::move(name)) {}

  const NodeId& name() const noexcept { return name_; }

  // -- ports --
  void add_port(PortNo no, Port p) { ports_[no] = std::move(p); }
  const std::map<PortNo, Port>& ports() const noexcept { return ports_; }
  bool has_port(PortNo no) const { return ports_.count(no) != 0; }
  bool port_live(PortNo no) const {
    auto it = ports_.find(no);
    return it != ports_.end() && it->second.live;
  }
  void set_port_live(PortNo no, bool live) {
    auto it = ports_.find(no);
    if (it == ports_.end()) throw DataplaneError("switch " + name_.str() + " has no port " + std::to_string(no));
    it->second.live = live;
  }

  // -- flow tables --
  void install(FlowEntry e) {
    if (e.table >= kTableCount) throw DataplaneError("table index " + std::to_string(e.table) + " out of range");
    for (const auto& a : e.actions) {
      if (auto g = std::get_if<action::GotoTable>(&a); g && g->table <= e.table)
        throw DataplaneError("goto must target a later table");
    }
    auto& table = tables_[e.table];
    table[{e.match, e.priority}] = std::move(e);
  }

  /// Highest-priority entry for the match in one table.
  const FlowEntry* lookup(std::size_t table, const Match& m) const {
    const FlowEntry* best = nullptr;
    for (const auto& [k, e] : tables_.at(table)) {
      if (k.first != m) continue;
      if (!best || e.priority > best->priority) best = &e;
    }
    return best;
  }

  const std::map<std::pair<Match, int>, FlowEntry>& table(std::size_t i) const { return tables_.at(i); }
  std::map<std::pair<Match, int>, FlowEntry>& table(std::size_t i) { return tables_.at(i); }

  /// Removes entries and groups of one (key, tag), or of the whole key when
  /// tag is nullopt. Entries with negative priority are kept.
  void erase(const GroupKey& key, std::optional<Tag> tag = std::nullopt) {
    for (auto& t : tables_) {
      std::erase_if(t, [&](const auto& kv) {
        return kv.first.first.key == key && (!tag || kv.first.first.tag == *tag) && kv.first.second >= 0;
      });
    }
    std::erase_if(groups_, [&](const auto& kv) { return kv.first.key == key && (!tag || kv.first.tag == *tag); });
  }

  void erase_entry(std::size_t table, const Match& m, int priority) { tables_.at(table).erase({m, priority}); }

  // -- groups --
  void add_group(FFGroup g) {
    if (g.buckets.empty()) throw DataplaneError("fast-failover group needs at least one bucket");
    groups_[g.id] = std::move(g);
  }
  bool has_group(const GroupId& id) const { return groups_.count(id) != 0; }
  const FFGroup& group(const GroupId& id) const {
    auto it = groups_.find(id);
    if (it == groups_.end()) throw DataplaneError("unknown group " + to_string(id));
    return it->second;
  }
  FFGroup& group(const GroupId& id) {
    auto it = groups_.find(id);
    if (it == groups_.end()) throw DataplaneError("unknown group " + to_string(id));
    return it->second;
  }
  const std::map<GroupId, FFGroup>& groups() const noexcept { return groups_; }

  /// Forwarding entries per table (controller defaults with negative priority excluded).
  std::array<std::size_t, kTableCount> flow_counts() const {
    std::array<std::size_t, kTableCount> out{};
    for (std::size_t i = 0; i < kTableCount; ++i)
      for (const auto& [k, e] : tables_[i])
        if (e.priority >= 0) ++out[i];
    return out;
  }
  std::size_t flow_count() const {
    auto c = flow_counts();
    return c[0] + c[1] + c[2];
  }
  std::size_t group_count() const noexcept { return groups_.size(); }

  friend bool operator==(const SwitchState&, const SwitchState&) = default;

private:
  NodeId name_;
  std::map<PortNo, Port> ports_;
  std::array<std::map<std::pair<Match, int>, FlowEntry>, kTableCount> tables_;
  std::map<GroupId, FFGroup> groups_;
};

namespace detail {

inline FlowEntry* owning_entry(SwitchState& sw, const GroupId& g) {
  for (std::size_t t = 0; t < kTableCount; ++t)
    for (auto& [k, e] : sw.table(t))
      for (const auto& a : e.actions)
        if (auto tg = std::get_if<action::ToGroup>(&a); tg && tg->group == g) return &e;
  return nullptr;
}

}  // namespace detail

/// Adds a backup bucket [tag=t, output:p...] for `protected_port` in group g.
/// If g already holds a backup after that port, a copy of g is made whose
/// earlier buckets drop the packet, the new bucket goes there and the owning
/// flow entry also jumps to the copy. Returns the group that got the bucket.
inline GroupId add_backup_bucket(SwitchState& sw, const GroupId& g, PortNo protected_port,
                                 std::span<const PortNo> backup_ports, Tag backup_tag) {
  if (backup_ports.empty()) throw DataplaneError("add_backup_bucket needs at least one port");
  FFGroup& group = sw.group(g);
  auto it = std::find_if(group.buckets.begin(), group.buckets.end(),
                         [&](const Bucket& b) { return b.watch == protected_port; });
  if (it == group.buckets.end())
    throw DataplaneError("group " + to_string(g) + " has no bucket watching port " + std::to_string(protected_port));

  Bucket fresh{backup_ports.front(), {action::SetTag{backup_tag}}};
  for (PortNo p : backup_ports) fresh.actions.push_back(action::Output{p});

  if (std::next(it) == group.buckets.end()) {
    group.buckets.push_back(std::move(fresh));
    return g;
  }

  GroupId copy_id = g;
  copy_id.copy = 0;
  for (const auto& [id, grp] : sw.groups())
    if (id.same_family(g)) copy_id.copy = std::max(copy_id.copy, id.copy + 1);
  FFGroup copy{copy_id, {}};
  for (auto b = group.buckets.begin(); b != std::next(it); ++b) copy.buckets.push_back({b->watch, {action::Drop{}}});
  copy.buckets.push_back(std::move(fresh));
  sw.add_group(std::move(copy));

  if (FlowEntry* owner = detail::owning_entry(sw, g)) {
    auto pos = owner->actions.begin();
    for (auto a = owner->actions.begin(); a != owner->actions.end(); ++a)
      if (auto tg = std::get_if<action::ToGroup>(&*a); tg && tg->group.same_family(g)) pos = std::next(a);
    owner->actions.insert(pos, action::ToGroup{copy_id});
  }
  return copy_id;
}

inline GroupId add_backup_bucket(SwitchState& sw, const GroupId& g, PortNo protected_port, PortNo backup_port,
                                 Tag backup_tag) {
  const PortNo ports[] = {backup_port};
  return add_backup_bucket(sw, g, protected_port, std::span<const PortNo>(ports), backup_tag);
}

/// One switch's forwarding decision. Within an action list that mixes group
/// and output actions only the group actions run; a fast-failover group
/// applies its first bucket whose watch port is live.
inline ForwardResult forward(const SwitchState& sw, const Packet& pkt, PortNo /*ingress*/) {
  ForwardResult out;
  std::optional<Tag> tag = pkt.tag;
  std::size_t table = 0;
  while (true) {
    const FlowEntry* entry = sw.lookup(table, {pkt.key, tag.value_or(0)});
    if (!entry) {
      out.unmatched = table == 0;
      break;
    }
    const bool has_group = std::any_of(entry->actions.begin(), entry->actions.end(),
                                       [](const Action& a) { return std::holds_alternative<action::ToGroup>(a); });
    std::optional<std::size_t> next;
    for (const auto& a : entry->actions) {
      if (auto o = std::get_if<action::Output>(&a)) {
        if (!has_group) out.egress.push_back({o->port, tag});
      } else if (auto s = std::get_if<action::SetTag>(&a)) {
        tag = s->tag;
      } else if (std::holds_alternative<action::PopTag>(a)) {
        tag.reset();
      } else if (auto g = std::get_if<action::ToGroup>(&a)) {
        const FFGroup& grp = sw.group(g->group);
        auto live = std::find_if(grp.buckets.begin(), grp.buckets.end(),
                                 [&](const Bucket& b) { return sw.port_live(b.watch); });
        if (live == grp.buckets.end()) continue;
        std::optional<Tag> bucket_tag = tag;
        for (const auto& ba : live->actions) {
          if (auto bo = std::get_if<action::Output>(&ba)) out.egress.push_back({bo->port, bucket_tag});
          else if (auto bs = std::get_if<action::SetTag>(&ba)) bucket_tag = bs->tag;
          else if (std::holds_alternative<action::PopTag>(ba)) bucket_tag.reset();
          // Drop and chained groups contribute nothing.
        }
      } else if (auto gt = std::get_if<action::GotoTable>(&a)) {
        next = gt->table;
      }
    }
    if (!next) break;
    if (*next <= table || *next >= kTableCount) throw DataplaneError("invalid goto target");
    table = *next;
  }
  return out;
}

std::string dump(const SwitchState& sw);

inline std::string dump_group(const FFGroup& g) {
  std::ostringstream os;
  os << "group " << to_string(g.id) << "\n";
  for (const auto& b : g.buckets) os << "  " << b.watch << " | " << to_string(b.actions) << "\n";
  return os.str();
}

/// Deterministic listing of ports, flow entries (by table) and groups.
inline std::string dump(const SwitchState& sw) {
  std::ostringstream os;
  os << "switch " << sw.name() << "\n";
  if (!sw.ports().empty()) {
    os << "  ports";
    for (const auto& [no, p] : sw.ports())
      os << " " << no << "=" << (p.is_host() ? std::string("host") : p.peer->str()) << (p.live ? "" : "(down)");
    os << "\n";
  }
  for (std::size_t t = 0; t < kTableCount; ++t)
    for (const auto& [k, e] : sw.table(t))
      os << "  table " << t << " key=" << e.match.key << " tag=" << e.match.tag << " prio=" << e.priority
         << " actions=" << to_string(e.actions) << "\n";
  for (const auto& [id, g] : sw.groups()) {
    std::istringstream lines(dump_group(g));
    for (std::string line; std::getline(lines, line);) os << "  " << line << "\n";
  }
  return os.str();
}

/// All switches of a network with ports wired to their neighbors. Ports
/// 1..deg face neighbors in NodeId order; port deg+1 faces the host.
class Fabric {
public:
  explicit Fabric(const Network& g) : g_(&g) {
    for (const auto& n : g.nodes()) {
      SwitchState sw(n);
      PortNo no = 1;
      for (const auto& peer : g.neighbors(n)) sw.add_port(no++, Port{peer, true});
      sw.add_port(no, Port{std::nullopt, true});
      switches_.emplace(n, std::move(sw));
    }
  }

  const Network& network() const noexcept { return *g_; }

  SwitchState& at(const NodeId& n) {
    auto it = switches_.find(n);
    if (it == switches_.end()) throw UnknownNode(n.str());
    return it->second;
  }
  const SwitchState& at(const NodeId& n) const {
    auto it = switches_.find(n);
    if (it == switches_.end()) throw UnknownNode(n.str());
    return it->second;
  }
  const std::map<NodeId, SwitchState>& switches() const noexcept { return switches_; }

  PortNo port_to(const NodeId& sw, const NodeId& peer) const {
    for (const auto& [no, p] : at(sw).ports())
      if (p.peer && *p.peer == peer) return no;
    throw DataplaneError("no port from " + sw.str() + " to " + peer.str());
  }
  PortNo host_port(const NodeId& sw) const { return static_cast<PortNo>(g_->degree(sw) + 1); }

  void set_link_state(const Link& l, bool up) {
    if (!g_->has_link(l)) throw TopologyError("unknown link " + to_string(l));
    at(l.a).set_port_live(port_to(l.a, l.b), up);
    at(l.b).set_port_live(port_to(l.b, l.a), up);
  }
  bool link_up(const Link& l) const { return at(l.a).port_live(port_to(l.a, l.b)); }

  /// Installs the low-priority drop rule at the source switch.
  void register_group(const GroupState& gs) {
    at(gs.source()).install({0, {gs.key(), 0}, -1, {action::Drop{}}});
  }
  void unregister_group(const GroupState& gs) {
    for (auto& [n, sw] : switches_) {
      sw.erase(gs.key());
      for (std::size_t t = 0; t < kTableCount; ++t) sw.erase_entry(t, {gs.key(), 0}, -1);
    }
  }

  friend bool operator==(const Fabric& a, const Fabric& b) { return a.switches_ == b.switches_; }

private:
  const Network* g_;
  std::map<NodeId, SwitchState> switches_;
};

inline std::string dump(const Fabric& f) {
  std::string s;
  for (const auto& [n, sw] : f.switches()) s += dump(sw);
  return s;
}

namespace detail {

inline bool protects(const GroupState& gs, const MulticastTree& t, const NodeId& x, const NodeId& c) {
  const MulticastTree* b = gs.backup(t, {x, c});
  return b && !b->children(x).empty();
}

// Appends buckets for the backup tree of (x, c) in `t`, recursing into the
// backup trees of that tree's own links out of x.
inline void extend_chain(SwitchState& sw, const Fabric& f, const GroupState& gs, const GroupId& gid,
                         const MulticastTree& t, const NodeId& x, const NodeId& c) {
  const MulticastTree* b = gs.backup(t, {x, c});
  if (!b || b->children(x).empty()) return;
  const PortNo protected_port = f.port_to(x, c);
  std::vector<PortNo> kids;
  for (const auto& k : b->children(x)) kids.push_back(f.port_to(x, k));
  // Links of a tree at full depth are never protected, so one bucket can
  // carry every output.
  if (b->depth() >= gs.config().fault_tolerance) {
    add_backup_bucket(sw, gid, protected_port, std::span<const PortNo>(kids), b->tag());
    return;
  }
  for (const auto& k : b->children(x)) {
    const GroupId target = add_backup_bucket(sw, gid, protected_port, f.port_to(x, k), b->tag());
    extend_chain(sw, f, gs, target, *b, x, k);
  }
}

}  // namespace detail

/// Builds the flow entries and groups of tree `t` at switch x into sw.
/// Action lists stay homogeneous: group actions, plain outputs and the
/// (tag-popping) host output each get their own table, linked by goto.
inline void compile_tree_at(SwitchState& sw, const Fabric& f, const GroupState& gs, const MulticastTree& t,
                            const NodeId& x) {
  sw.erase(gs.key(), t.tag());
  if (!t.contains(x)) return;
  std::vector<Action> groups, outputs, host;
  std::vector<NodeId> protected_children;
  for (const auto& c : t.children(x)) {
    if (detail::protects(gs, t, x, c)) {
      const GroupId gid{gs.key(), t.tag(), f.port_to(x, c), 0};
      groups.push_back(action::ToGroup{gid});
      protected_children.push_back(c);
    } else {
      outputs.push_back(action::Output{f.port_to(x, c)});
    }
  }
  if (t.is_terminal(x) && x != t.root()) {
    if (t.tag() != 0) host.push_back(action::PopTag{});
    host.push_back(action::Output{f.host_port(x)});
  }

  std::vector<std::vector<Action>*> lists;
  for (auto* l : {&groups, &outputs, &host})
    if (!l->empty()) lists.push_back(l);
  if (lists.size() > kTableCount) throw DataplaneError("more action lists than tables");
  for (std::size_t i = 0; i < lists.size(); ++i) {
    FlowEntry e{i, {gs.key(), t.tag()}, 0, *lists[i]};
    if (i + 1 < lists.size()) e.actions.push_back(action::GotoTable{i + 1});
    sw.install(std::move(e));
  }

  for (const auto& c : protected_children) {
    const PortNo port = f.port_to(x, c);
    const GroupId gid{gs.key(), t.tag(), port, 0};
    sw.add_group({gid, {Bucket{port, {action::Output{port}}}}});
    detail::extend_chain(sw, f, gs, gid, t, x, c);
  }
}

/// Compiles tree `t` on every switch the path touches.
inline void compile_path(Fabric& f, const GroupState& gs, const MulticastTree& t, const Path& p) {
  std::set<NodeId> touched;
  for (const auto& e : p.edges) {
    touched.insert(e.from);
    touched.insert(e.to);
  }
  for (const auto& n : touched) compile_tree_at(f.at(n), f, gs, t, n);
}

/// Rebuilds everything group gs needs at one switch.
inline void refresh_switch(Fabric& f, const GroupState& gs, const NodeId& x) {
  SwitchState& sw = f.at(x);
  sw.erase(gs.key());
  for (const auto& [tag, t] : gs.trees())
    if (t.contains(x)) compile_tree_at(sw, f, gs, t, x);
}

inline void refresh_all(Fabric& f, const GroupState& gs) {
  for (const auto& n : f.network().nodes()) refresh_switch(f, gs, n);
}

/// Protection sink that keeps a Fabric in sync and logs each event.
class FabricInstaller {
public:
  struct Event {
    enum class Kind { Install, Remove, Unsubscribe } kind;
    Tag tree;
    std::vector<DirectedEdge> edges;
    NodeId node;
  };

  explicit FabricInstaller(Fabric& f) : f_(&f) {}

  void installed(const GroupState& gs, const MulticastTree& t, const std::vector<DirectedEdge>& edges, const NodeId& v) {
    std::set<NodeId> touched{v, t.root()};
    for (const auto& e : edges) {
      touched.insert(e.from);
      touched.insert(e.to);
    }
    for (const auto& n : touched) refresh_switch(*f_, gs, n);
    log_.push_back({Event::Kind::Install, t.tag(), edges, v});
  }
  void removed(const GroupState& gs, const MulticastTree& t, const DirectedEdge& e) {
    refresh_switch(*f_, gs, e.from);
    refresh_switch(*f_, gs, e.to);
    log_.push_back({Event::Kind::Remove, t.tag(), {e}, e.to});
  }
  void unsubscribed(const GroupState& gs, const MulticastTree& t, const NodeId& v) {
    refresh_switch(*f_, gs, v);
    log_.push_back({Event::Kind::Unsubscribe, t.tag(), {}, v});
  }

  const std::vector<Event>& log() const noexcept { return log_; }
  void clear_log() { log_.clear(); }

private:
  Fabric* f_;
  std::vector<Event> log_;
};

static_assert(InstallSink<FabricInstaller>);

}  // namespace mcff

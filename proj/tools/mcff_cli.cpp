// mcff: replay multicast scenarios on an emulated fast-failover fabric.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcff/mcff.hpp"

namespace fs = std::filesystem;
using namespace mcff;

namespace {

struct Inputs {
  std::string topology;
  std::size_t complete = 0;
  std::string scenario;
  std::string tree;
  std::optional<std::size_t> F;
};

void add_inputs(CLI::App* cmd, Inputs& in) {
  auto* topo = cmd->add_option("--topology", in.topology, "topology JSON file")->check(CLI::ExistingFile);
  auto* comp = cmd->add_option("--complete", in.complete, "use the complete graph on N switches")->check(CLI::Range(2, 500));
  topo->excludes(comp);
  cmd->add_option("--scenario", in.scenario, "scenario JSON file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--tree", in.tree, "join strategy (overrides the scenario)")->check(CLI::IsMember({"spt", "dst"}));
  cmd->add_option("-F", in.F, "fault tolerance (overrides the scenario)");
}

Network load_network(const Inputs& in) {
  if (in.complete) return complete_graph(in.complete);
  if (!in.topology.empty()) return load_topology_file(in.topology);
  return geant_topology();
}

Scenario load(const Inputs& in) {
  Scenario sc = load_scenario_file(in.scenario);
  if (!in.tree.empty()) sc.config.strategy = parse_strategy(in.tree);
  if (in.F) sc.config.fault_tolerance = *in.F;
  return sc;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << content;
}

int cmd_run(const Inputs& in, const std::string& out_dir) {
  const Network g = load_network(in);
  const Scenario sc = load(in);
  const ScenarioResult res = run_scenario(g, sc);

  fs::create_directories(out_dir);
  std::ostringstream metrics, deliveries, timing;
  write_metrics_csv(metrics, res.snapshots);
  write_deliveries_csv(deliveries, res.deliveries);
  write_timing_csv(timing, res.snapshots);
  write_file(fs::path(out_dir) / "metrics.csv", metrics.str());
  write_file(fs::path(out_dir) / "deliveries.csv", deliveries.str());
  write_file(fs::path(out_dir) / "timing.csv", timing.str());

  const auto& last = res.snapshots.back();
  std::cout << "events " << sc.events.size() << ", snapshots " << res.snapshots.size() << ", injections "
            << res.deliveries.size() << "\n";
  std::cout << "final: subscribers " << last.subscribers << ", flow entries " << last.flow_total() << ", groups "
            << last.group_total() << ", tags " << last.tags_in_use << "\n";
  for (const auto& v : res.violations) std::cout << "violation: " << v << "\n";
  return res.ok() ? 0 : 1;
}

int cmd_verify(const Inputs& in, std::uint64_t max_sets) {
  const Network g = load_network(in);
  Scenario sc = load(in);
  // Only membership matters for the exhaustive check.
  std::erase_if(sc.events, [](const ScenarioEvent& e) {
    return e.op != ScenarioEvent::Op::Join && e.op != ScenarioEvent::Op::Leave;
  });
  Replay replay(g, sc);
  ScenarioResult scratch;
  for (std::size_t i = 0; i < sc.events.size(); ++i) replay.apply(i, scratch);
  const std::size_t F = sc.config.fault_tolerance;
  const ToleranceReport rep = verify_tolerance(replay.fabric(), replay.group(), F, max_sets);
  std::cout << "subscribers " << replay.group().subscribers().size() << ", F " << F << ", failure sets "
            << rep.sets_checked << ", excused " << rep.excused << ", duplicates " << rep.duplicates << ", loops "
            << rep.loops << ", violations " << rep.violations.size() << "\n";
  for (const auto& v : rep.violations)
    std::cout << "violation: {" << to_string(v.failures) << "} " << v.subscriber << ": " << v.reason << "\n";
  for (const auto& v : scratch.violations) std::cout << "violation: " << v << "\n";
  return rep.ok() && scratch.ok() ? 0 : 1;
}

int cmd_recover(const std::string& model, const RecoveryModel& base, const OutageScenario& sc) {
  RecoveryModel m = base;
  m.kind = model == "ff" ? RecoveryKind::FastFailover
           : model == "switch" ? RecoveryKind::FastTreeSwitching
                               : RecoveryKind::Restoration;
  const RecoveryResult r = simulate_recovery(m, sc);
  std::cout << "model " << to_string(m.kind) << "\n"
            << "outage_ms_per_cut " << r.outage_ms_per_cut << "\n"
            << "lost_per_cut " << r.lost_per_cut << "\n"
            << "lost_total " << r.lost_total << "\n";
  return 0;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

int cmd_report(const std::string& dir) {
  std::ifstream metrics(fs::path(dir) / "metrics.csv");
  if (!metrics) throw Error("no metrics.csv in '" + dir + "'");
  std::string line;
  std::getline(metrics, line);
  // metric -> (first, last, max), in first-seen order
  std::vector<std::string> names;
  std::map<std::string, std::array<long long, 3>> agg;
  std::size_t snapshots = 0;
  std::string last_snapshot;
  while (std::getline(metrics, line)) {
    const auto cells = split_csv(line);
    if (cells.size() != 4) throw Error("malformed metrics row: " + line);
    if (cells[0] != last_snapshot) {
      ++snapshots;
      last_snapshot = cells[0];
    }
    if (cells[2].find('[') != std::string::npos) continue;  // per-switch rows
    const long long v = std::stoll(cells[3]);
    auto [it, fresh] = agg.try_emplace(cells[2], std::array<long long, 3>{v, v, v});
    if (fresh) names.push_back(cells[2]);
    it->second[1] = v;
    it->second[2] = std::max(it->second[2], v);
  }
  std::cout << "snapshots " << snapshots << "\n";
  std::cout << std::left << std::setw(26) << "metric" << std::right << std::setw(10) << "initial" << std::setw(10)
            << "final" << std::setw(10) << "max" << "\n";
  for (const auto& n : names) {
    const auto& a = agg[n];
    std::cout << std::left << std::setw(26) << n << std::right << std::setw(10) << a[0] << std::setw(10) << a[1]
              << std::setw(10) << a[2] << "\n";
  }

  std::ifstream deliveries(fs::path(dir) / "deliveries.csv");
  if (deliveries) {
    std::getline(deliveries, line);
    std::size_t rows = 0, delivered = 0, dups = 0, hop_sum = 0;
    std::set<std::string> injections;
    while (std::getline(deliveries, line)) {
      const auto cells = split_csv(line);
      if (cells.size() != 6) throw Error("malformed deliveries row: " + line);
      injections.insert(cells[0]);
      ++rows;
      if (cells[3] == "1") {
        ++delivered;
        hop_sum += std::stoul(cells[4]);
      }
      dups += std::stoul(cells[5]);
    }
    std::cout << "injections " << injections.size() << ", deliveries " << delivered << "/" << rows << ", duplicates "
              << dups;
    if (delivered)
      std::cout << ", mean hopcount " << std::fixed << std::setprecision(4)
                << static_cast<double>(hop_sum) / static_cast<double>(delivered);
    std::cout << "\n";
  }
  return 0;
}

int cmd_georeplay(const std::string& preset, std::size_t n, const std::string& tree, std::size_t F, std::uint64_t seed,
                  std::size_t reps, std::size_t limit) {
  GeoreplayConfig cfg;
  cfg.preset = preset == "geant" ? Preset::geant() : Preset::complete(n);
  cfg.strategy = parse_strategy(tree);
  cfg.fault_tolerance = F;
  cfg.seed = seed;
  cfg.repetitions = reps;
  const GeoreplayResult r = georeplay(cfg);

  std::cout << cfg.preset.name() << " " << tree << " F=" << F << " seed=" << seed << " reps=" << reps << "\n";
  auto row = [](const std::string& name, double v) {
    std::cout << std::left << std::setw(26) << name << std::right << std::fixed << std::setprecision(4) << v << "\n";
  };
  row("flow_entries_total", r.mean([](const RepetitionResult& x) { return x.final.flow_total(); }));
  row("flow_entries_max_switch", r.mean([](const RepetitionResult& x) { return x.final.max_flows(); }));
  row("ff_groups_total", r.mean([](const RepetitionResult& x) { return x.final.group_total(); }));
  row("ff_groups_max_switch", r.mean([](const RepetitionResult& x) { return x.final.max_groups(); }));
  row("tags_in_use", r.mean([](const RepetitionResult& x) { return x.final.tags_in_use; }));
  row("join_calls", r.mean([](const RepetitionResult& x) { return x.final.join_calls; }));
  for (std::size_t k = 0; k <= F; ++k) row("hopcount_depth" + std::to_string(k), r.mean_depth(k));

  bool over = false;
  if (limit > 0) {
    for (const auto& rep : r.reps) {
      for (const auto& [sw, c] : capacity_check(rep.final, limit)) {
        std::cout << "capacity: seed " << rep.seed << " switch " << sw << " holds " << c << " groups (limit " << limit
                  << ")\n";
        over = true;
      }
    }
  }
  return over ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fault-tolerant multicast on emulated fast-failover switches"};
  app.require_subcommand(1);

  Inputs run_in;
  std::string out_dir;
  auto* run = app.add_subcommand("run", "replay a scenario and write metrics/deliveries/timing CSV");
  add_inputs(run, run_in);
  run->add_option("--out", out_dir, "output directory")->required();

  Inputs verify_in;
  std::uint64_t max_sets = 1'000'000;
  auto* verify = app.add_subcommand("verify", "check every failure set of at most F links");
  add_inputs(verify, verify_in);
  verify->add_option("--max-sets", max_sets, "refuse to enumerate more failure sets than this");

  std::string model = "ff";
  RecoveryModel rm;
  OutageScenario os;
  auto* recover = app.add_subcommand("recover", "packets lost while a cut is repaired");
  recover->add_option("--model", model)->check(CLI::IsMember({"ff", "switch", "restore"}));
  recover->add_option("--rtt-ms", rm.controller_rtt_ms)->check(CLI::NonNegativeNumber);
  recover->add_option("--detect-ms", rm.detection_ms)->check(CLI::NonNegativeNumber);
  recover->add_option("--rate-hz", rm.packet_rate_hz)->check(CLI::PositiveNumber);
  recover->add_option("--flowmod-ms", rm.per_flowmod_ms)->check(CLI::NonNegativeNumber);
  recover->add_option("--compute-ms", rm.compute_ms)->check(CLI::NonNegativeNumber);
  recover->add_option("--cuts", os.cuts);
  recover->add_option("--groups", os.affected_groups);
  recover->add_option("--entries", os.entries_to_restore);
  recover->add_option("--duration-ms", os.duration_ms)->check(CLI::NonNegativeNumber);

  std::string report_dir;
  auto* report = app.add_subcommand("report", "summarize the CSV files written by run");
  report->add_option("dir", report_dir, "directory given to run --out")->required();

  std::string preset = "geant", tree = "spt";
  std::size_t n = 33, F = 1, reps = 5, limit = 0;
  std::uint64_t seed = 1;
  auto* geo = app.add_subcommand("georeplay", "join every host in seeded random orders and average");
  geo->add_option("--preset", preset)->check(CLI::IsMember({"geant", "complete"}));
  geo->add_option("-n", n, "switch count for the complete preset")->check(CLI::Range(2, 500));
  geo->add_option("--tree", tree)->check(CLI::IsMember({"spt", "dst"}));
  geo->add_option("-F", F);
  geo->add_option("--seed", seed);
  geo->add_option("--reps", reps)->check(CLI::Range(1, 1000));
  geo->add_option("--group-limit", limit, "report switches holding more groups than this");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_in, out_dir);
    if (*verify) return cmd_verify(verify_in, max_sets);
    if (*recover) return cmd_recover(model, rm, os);
    if (*report) return cmd_report(report_dir);
    if (*geo) return cmd_georeplay(preset, n, tree, F, seed, reps, limit);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

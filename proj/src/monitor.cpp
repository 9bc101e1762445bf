#include "cacs/monitor.hpp"

#include <algorithm>
#include <utility>

#include "cacs/errors.hpp"

namespace cacs {

int BroadcastTree::depth() const { return tree_depth(nodes.size()); }

int tree_depth(std::size_t n) {
  if (n == 0) raise(ErrorCode::EmptyCluster, "no nodes, no tree");
  int d = 0;
  while (n >>= 1) ++d;
  return d;
}

BroadcastTree build_tree(std::size_t n) {
  if (n == 0) raise(ErrorCode::EmptyCluster, "cannot monitor an empty cluster");
  BroadcastTree t;
  t.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) t.nodes[i] = static_cast<std::uint32_t>(i);
  return t;
}

std::string_view health_verdict_name(HealthVerdict v) {
  switch (v) {
    case HealthVerdict::Healthy: return "healthy";
    case HealthVerdict::VmFailure: return "vm_failure";
    case HealthVerdict::AppFailure: return "app_failure";
  }
  return "healthy";
}

HealthVerdict classify(const HealthReport& report) {
  if (!report.unreachable.empty()) return HealthVerdict::VmFailure;
  if (!report.unhealthy.empty()) return HealthVerdict::AppFailure;
  return HealthVerdict::Healthy;
}

namespace {

struct RoundWalk {
  const BroadcastTree& tree;
  const NodeProbes& probes;
  const HeartbeatCosts& costs;
  HealthReport& report;

  bool reachable(std::size_t slot) const {
    return !probes.reachable || probes.reachable(tree.nodes[slot]);
  }

  // Time from the probe reaching the node until its subtree report is ready.
  // The node evaluates its own hook while the child probes are in flight.
  VDur visit(std::size_t slot) {
    VDur self = costs.hook_cost;
    std::optional<bool> h = probes.hook ? probes.hook(tree.nodes[slot]) : std::optional<bool>(true);
    if (!h) {
      self = costs.hook_timeout;
      report.unhealthy.insert(tree.nodes[slot]);
    } else if (!*h) {
      report.unhealthy.insert(tree.nodes[slot]);
    }
    VDur children = 0;
    for (std::size_t c : {BroadcastTree::left(slot), BroadcastTree::right(slot)}) {
      if (c < tree.size()) children = std::max(children, probe_child(c));
    }
    return std::max(self, children);
  }

  // Time from the probe leaving the parent until the child's subtree report
  // is back at the parent. A silent child costs two probe timeouts, after
  // which the parent adopts the child's children directly.
  VDur probe_child(std::size_t slot) {
    if (reachable(slot)) return 2 * costs.link_latency + visit(slot);
    report.unreachable.insert(tree.nodes[slot]);
    VDur adopted = 0;
    for (std::size_t c : {BroadcastTree::left(slot), BroadcastTree::right(slot)}) {
      if (c < tree.size()) adopted = std::max(adopted, probe_child(c));
    }
    return 2 * costs.probe_timeout + adopted;
  }
};

}  // namespace

HealthReport heartbeat_round(const BroadcastTree& tree, const NodeProbes& probes,
                             const HeartbeatCosts& costs) {
  if (tree.size() == 0) raise(ErrorCode::EmptyCluster, "cannot probe an empty tree");
  if (probes.round_begin) probes.round_begin();
  HealthReport report;
  RoundWalk walk{tree, probes, costs, report};
  if (walk.reachable(0)) {
    // The monitoring actor sits next to the root daemon; no link to pay.
    report.roundtrip_time = walk.visit(0);
  } else {
    report.unreachable.insert(tree.nodes[0]);
    VDur adopted = 0;
    for (std::size_t c : {BroadcastTree::left(0), BroadcastTree::right(0)}) {
      if (c < tree.size()) adopted = std::max(adopted, walk.probe_child(c));
    }
    report.roundtrip_time = 2 * costs.probe_timeout + adopted;
  }
  for (std::uint32_t vm : report.unreachable) report.unhealthy.erase(vm);
  return report;
}

HealthHookSpec parse_health_hook(const std::string& text) {
  HealthHookSpec spec;
  if (text == "process_alive") {
    spec.kind = HealthHookSpec::Kind::ProcessAlive;
    return spec;
  }
  const std::string prefix = "progress_within(";
  if (text.rfind(prefix, 0) == 0 && text.back() == ')') {
    const std::string arg = text.substr(prefix.size(), text.size() - prefix.size() - 1);
    if (!arg.empty() && std::all_of(arg.begin(), arg.end(), [](char c) {
          return c >= '0' && c <= '9';
        })) {
      spec.kind = HealthHookSpec::Kind::ProgressWithin;
      spec.window = std::stoull(arg);
      if (spec.window >= 1) return spec;
    }
  }
  raise(ErrorCode::InvalidAsr, "unknown health hook: " + text);
}

MonitoringManager::MonitoringManager(EventQueue& clock, TraceLog& trace, const ServiceConfig& cfg)
    : clock_(clock), trace_(trace), period_(cfg.heartbeat_period) {
  costs_.link_latency = cfg.heartbeat_link_latency;
  costs_.hook_cost = cfg.heartbeat_hook_cost;
  costs_.hook_timeout = cfg.heartbeat_hook_timeout;
  costs_.probe_timeout = cfg.heartbeat_probe_timeout;
}

void MonitoringManager::watch(std::uint64_t app_id, const std::vector<std::string>& vm_ids,
                              NodeProbes probes,
                              std::function<void(const HealthReport&)> on_trouble) {
  if (watches_.count(app_id)) {
    raise(ErrorCode::StateConflict, "app " + std::to_string(app_id) + " is already watched");
  }
  Watch w;
  w.vm_ids = vm_ids;
  w.tree = build_tree(vm_ids.size());
  w.probes = std::move(probes);
  w.on_trouble = std::move(on_trouble);
  w.epoch = next_epoch_++;
  std::uint64_t epoch = w.epoch;
  watches_.emplace(app_id, std::move(w));
  trace_.append(clock_.now(), "monitor",
                "watching app " + std::to_string(app_id) + " (" +
                    std::to_string(vm_ids.size()) + " nodes)");
  schedule_round(app_id, epoch, period_);
}

void MonitoringManager::unwatch(std::uint64_t app_id) {
  auto it = watches_.find(app_id);
  if (it == watches_.end()) return;
  watches_.erase(it);
  trace_.append(clock_.now(), "monitor", "stopped watching app " + std::to_string(app_id));
}

HealthReport MonitoringManager::run_round(std::uint64_t app_id) {
  auto it = watches_.find(app_id);
  if (it == watches_.end()) {
    raise(ErrorCode::UnknownApp, "app " + std::to_string(app_id) + " is not watched");
  }
  return round_now(app_id, it->second);
}

HealthReport MonitoringManager::round_now(std::uint64_t app_id, Watch& watch) {
  HealthReport report = heartbeat_round(watch.tree, watch.probes, costs_);
  report.app_id = app_id;
  report.round = ++watch.rounds;
  HealthVerdict verdict = classify(report);
  trace_.append(clock_.now(), "monitor",
                "app " + std::to_string(app_id) + " round " + std::to_string(report.round) +
                    ": " + std::string(health_verdict_name(verdict)) + " (rtt " +
                    std::to_string(to_seconds(report.roundtrip_time)) + "s)");
  if (verdict != HealthVerdict::Healthy && watch.on_trouble) {
    // The report is acted on once it has traveled back up the tree.
    auto cb = watch.on_trouble;
    clock_.in(report.roundtrip_time, [cb, report] { cb(report); });
  }
  return report;
}

void MonitoringManager::schedule_round(std::uint64_t app_id, std::uint64_t epoch, VDur delay) {
  clock_.in(delay, [this, app_id, epoch] {
    auto it = watches_.find(app_id);
    if (it == watches_.end() || it->second.epoch != epoch) return;
    HealthReport report = round_now(app_id, it->second);
    // Rounds never overlap: the next one waits out a slow roundtrip.
    schedule_round(app_id, epoch, std::max(period_, report.roundtrip_time));
  });
}

std::uint64_t MonitoringManager::rounds_run(std::uint64_t app_id) const {
  auto it = watches_.find(app_id);
  return it == watches_.end() ? 0 : it->second.rounds;
}

void MonitoringManager::ingest_backend_notification(const std::string& vm_id) {
  for (auto& [app_id, watch] : watches_) {
    auto pos = std::find(watch.vm_ids.begin(), watch.vm_ids.end(), vm_id);
    if (pos == watch.vm_ids.end()) continue;
    if (!watch.notified.insert(vm_id).second) return;  // duplicate push
    HealthReport report;
    report.app_id = app_id;
    report.round = watch.rounds;
    report.unreachable.insert(static_cast<std::uint32_t>(pos - watch.vm_ids.begin()));
    trace_.append(clock_.now(), "monitor",
                  "backend reported " + vm_id + " down (app " + std::to_string(app_id) + ")");
    if (watch.on_trouble) {
      auto cb = watch.on_trouble;
      clock_.immediate([cb, report] { cb(report); });
    }
    return;
  }
  raise(ErrorCode::UnknownVm, "no watched application owns " + vm_id);
}

}  // namespace cacs

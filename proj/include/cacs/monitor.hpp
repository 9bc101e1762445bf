#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cacs/config.hpp"
#include "cacs/event_queue.hpp"
#include "cacs/trace.hpp"
#include "cacs/vtime.hpp"

namespace cacs {

// Complete binary tree over vm indices in array layout: children of slot i
// sit at 2i+1 and 2i+2.
struct BroadcastTree {
  std::vector<std::uint32_t> nodes;

  std::size_t size() const { return nodes.size(); }
  int depth() const;

  static std::size_t left(std::size_t i) { return 2 * i + 1; }
  static std::size_t right(std::size_t i) { return 2 * i + 2; }
  static std::size_t parent(std::size_t i) { return (i - 1) / 2; }
};

BroadcastTree build_tree(std::size_t n);  // throws EmptyCluster on n = 0
int tree_depth(std::size_t n);

struct HealthReport {
  std::uint64_t app_id = 0;
  std::uint64_t round = 0;
  std::set<std::uint32_t> unreachable;
  std::set<std::uint32_t> unhealthy;  // always disjoint from unreachable
  VDur roundtrip_time = 0;
};

enum class HealthVerdict { Healthy, VmFailure, AppFailure };

std::string_view health_verdict_name(HealthVerdict v);

// Precedence: any unreachable VM dominates any failing hook.
HealthVerdict classify(const HealthReport& report);

struct HeartbeatCosts {
  VDur link_latency = 0;
  VDur hook_cost = 0;
  VDur hook_timeout = 0;   // charged when a hook gives no answer
  VDur probe_timeout = 0;  // per probe attempt at a silent node
};

// Callbacks into the live system, keyed by vm index. A hook returning
// nullopt means it timed out; that counts as unhealthy, not unreachable.
struct NodeProbes {
  std::function<bool(std::uint32_t)> reachable;
  std::function<std::optional<bool>(std::uint32_t)> hook;
  std::function<void()> round_begin;  // optional; runs once per round
};

// One synchronous probe wave: descend the tree, evaluate hooks, ascend the
// reports. Subtree probes run in parallel, so the healthy-path roundtrip is
// exactly 2·depth·link_latency + hook_cost. A parent declares a silent child
// unreachable after two probe timeouts, then adopts the child's children.
HealthReport heartbeat_round(const BroadcastTree& tree, const NodeProbes& probes,
                             const HeartbeatCosts& costs);

// Named built-in health hooks, picked per application in the ASR.
struct HealthHookSpec {
  enum class Kind { ProcessAlive, ProgressWithin };
  Kind kind = Kind::ProcessAlive;
  std::uint64_t window = 0;  // rounds without progress tolerated (ProgressWithin)
};

HealthHookSpec parse_health_hook(const std::string& text);  // throws InvalidAsr

// Monitoring Manager: one periodic heartbeat actor per watched application.
// Trouble reports are delivered when the round's report arrives, one
// roundtrip after the round starts; backend failure notifications bypass the
// heartbeat cycle entirely.
class MonitoringManager {
 public:
  MonitoringManager(EventQueue& clock, TraceLog& trace, const ServiceConfig& cfg);

  void watch(std::uint64_t app_id, const std::vector<std::string>& vm_ids, NodeProbes probes,
             std::function<void(const HealthReport&)> on_trouble);
  void unwatch(std::uint64_t app_id);  // idempotent
  bool watching(std::uint64_t app_id) const { return watches_.count(app_id) != 0; }

  // Runs one round immediately, independent of the periodic schedule.
  HealthReport run_round(std::uint64_t app_id);

  std::uint64_t rounds_run(std::uint64_t app_id) const;

  // Push-notified VM failure: synthesizes an unreachable report and delivers
  // it now. Duplicate notifications for a VM are dropped. Throws UnknownVm
  // when no watched application owns the VM.
  void ingest_backend_notification(const std::string& vm_id);

 private:
  struct Watch {
    std::vector<std::string> vm_ids;
    BroadcastTree tree;
    NodeProbes probes;
    std::function<void(const HealthReport&)> on_trouble;
    std::uint64_t rounds = 0;
    std::uint64_t epoch = 0;
    std::set<std::string> notified;
  };

  HealthReport round_now(std::uint64_t app_id, Watch& watch);
  void schedule_round(std::uint64_t app_id, std::uint64_t epoch, VDur delay);

  EventQueue& clock_;
  TraceLog& trace_;
  HeartbeatCosts costs_;
  VDur period_;
  std::map<std::uint64_t, Watch> watches_;
  std::uint64_t next_epoch_ = 1;
};

}  // namespace cacs

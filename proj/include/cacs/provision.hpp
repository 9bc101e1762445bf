#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "cacs/cloudsim.hpp"
#include "cacs/config.hpp"
#include "cacs/event_queue.hpp"
#include "cacs/lifecycle.hpp"
#include "cacs/net_meter.hpp"
#include "cacs/trace.hpp"
#include "cacs/vtime.hpp"

namespace cacs {

// One remote preparation command: sets key=value in the target VM's
// simulated filesystem.
struct ProvisionAction {
  std::string key;
  std::string value;
};

// Internal actions (service plumbing) always run before user actions.
struct ProvisionScript {
  std::vector<ProvisionAction> internal_actions;
  std::vector<ProvisionAction> user_actions;
};

// Standard preparation for an application: checkpoint directory and daemon
// wiring first, then the user's checkpoint policy.
ProvisionScript default_script(const AppSubmissionRequest& asr, const ServiceConfig& service);

// SSH pool shape. Commands run in waves of at most max_concurrent; with
// reuse, connection setup is paid once per session instead of per wave.
struct ConnectionBudget {
  int max_concurrent = 16;
  VDur per_command_latency = vseconds(2);
  VDur setup_latency = 0;
  bool reuse = true;
};

ConnectionBudget budget_from(const ServiceConfig& service);

struct VmExecResult {
  std::string vm_id;
  bool ok = false;
  std::string error;  // empty when ok
  std::size_t actions_applied = 0;
};

struct ExecReport {
  std::vector<VmExecResult> results;  // caller's VM order
  std::size_t waves = 0;
  VDur elapsed = 0;
  bool all_ok = true;
};

// Provision Manager: remote command execution against simulated VMs, with
// bounded parallelism and a metered remote-exec network flow per session.
class ProvisionManager {
 public:
  ProvisionManager(CloudManager& clouds, EventQueue& clock, TraceLog& trace, NetMeter& net,
                   double exec_bytes_per_s);

  // Applies the script to every VM. Unreachable or unknown VMs produce
  // failed per-VM results rather than an exception; the wave schedule still
  // reserves their slots. Throws InvalidRequest for a non-positive budget.
  ExecReport exec_parallel(const std::vector<std::string>& vm_ids, const ProvisionScript& script,
                           const ConnectionBudget& budget);

  bool has_fs(const std::string& vm_id) const { return fs_.count(vm_id) != 0; }
  const std::map<std::string, std::string>& vm_fs(const std::string& vm_id) const;
  const std::vector<std::string>& action_log(const std::string& vm_id) const;
  std::size_t actions_applied(const std::string& vm_id) const;

 private:
  CloudManager& clouds_;
  EventQueue& clock_;
  TraceLog& trace_;
  NetMeter& net_;
  double exec_bytes_per_s_;

  std::map<std::string, std::map<std::string, std::string>> fs_;
  std::map<std::string, std::vector<std::string>> log_;
};

}  // namespace cacs

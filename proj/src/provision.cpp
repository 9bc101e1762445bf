#include "cacs/provision.hpp"

#include <sstream>
#include <utility>

#include "cacs/errors.hpp"

namespace cacs {

ProvisionScript default_script(const AppSubmissionRequest& asr, const ServiceConfig& service) {
  ProvisionScript s;
  s.internal_actions.push_back({"ckpt_dir", service.checkpoint_dir});
  s.internal_actions.push_back({"daemon", "installed"});
  s.user_actions.push_back(
      {"ckpt_mode", std::string(checkpoint_mode_name(asr.checkpoint_policy.mode))});
  if (asr.checkpoint_policy.period) {
    std::ostringstream out;
    out << to_seconds(*asr.checkpoint_policy.period);
    s.user_actions.push_back({"ckpt_period_s", out.str()});
  }
  return s;
}

ConnectionBudget budget_from(const ServiceConfig& service) {
  ConnectionBudget b;
  b.max_concurrent = service.ssh_max_concurrent;
  b.per_command_latency = service.ssh_command_latency;
  b.setup_latency = service.ssh_setup_latency;
  b.reuse = service.ssh_reuse_connections;
  return b;
}

ProvisionManager::ProvisionManager(CloudManager& clouds, EventQueue& clock, TraceLog& trace,
                                   NetMeter& net, double exec_bytes_per_s)
    : clouds_(clouds),
      clock_(clock),
      trace_(trace),
      net_(net),
      exec_bytes_per_s_(exec_bytes_per_s) {}

ExecReport ProvisionManager::exec_parallel(const std::vector<std::string>& vm_ids,
                                           const ProvisionScript& script,
                                           const ConnectionBudget& budget) {
  if (budget.max_concurrent < 1) {
    raise(ErrorCode::InvalidRequest, "connection budget needs max_concurrent >= 1");
  }
  ExecReport report;
  if (vm_ids.empty()) return report;

  const std::size_t limit = static_cast<std::size_t>(budget.max_concurrent);
  report.waves = (vm_ids.size() + limit - 1) / limit;
  report.elapsed = static_cast<VDur>(report.waves) * budget.per_command_latency;
  if (budget.setup_latency > 0) {
    report.elapsed += (budget.reuse ? 1 : static_cast<VDur>(report.waves)) * budget.setup_latency;
  }

  for (const std::string& vm_id : vm_ids) {
    VmExecResult r;
    r.vm_id = vm_id;
    bool known = false;
    bool reachable = false;
    try {
      reachable = clouds_.backend_of_vm(vm_id).vm_reachable(vm_id);
      known = true;
    } catch (const CacsError&) {
    }
    if (!known) {
      r.error = "unknown vm";
    } else if (!reachable) {
      r.error = "node unreachable";
    } else {
      auto apply = [&](const ProvisionAction& a, const char* cls) {
        fs_[vm_id][a.key] = a.value;
        log_[vm_id].push_back(std::string(cls) + ":" + a.key + "=" + a.value);
        ++r.actions_applied;
      };
      for (const auto& a : script.internal_actions) apply(a, "internal");
      for (const auto& a : script.user_actions) apply(a, "user");
      r.ok = true;
    }
    report.all_ok = report.all_ok && r.ok;
    report.results.push_back(std::move(r));
  }

  // One live remote-exec worker for the duration of the session.
  NetMeter::FlowId flow = net_.open("exec", exec_bytes_per_s_);
  clock_.in(report.elapsed, [this, flow] { net_.close(flow); });
  trace_.append(clock_.now(), "provision",
                "exec on " + std::to_string(vm_ids.size()) + " vms in " +
                    std::to_string(report.waves) + " waves (" +
                    std::to_string(to_seconds(report.elapsed)) + "s)" +
                    (report.all_ok ? "" : " with failures"));
  return report;
}

const std::map<std::string, std::string>& ProvisionManager::vm_fs(const std::string& vm_id) const {
  auto it = fs_.find(vm_id);
  if (it == fs_.end()) raise(ErrorCode::UnknownVm, "no provisioned filesystem for " + vm_id);
  return it->second;
}

const std::vector<std::string>& ProvisionManager::action_log(const std::string& vm_id) const {
  auto it = log_.find(vm_id);
  if (it == log_.end()) raise(ErrorCode::UnknownVm, "no provisioning history for " + vm_id);
  return it->second;
}

std::size_t ProvisionManager::actions_applied(const std::string& vm_id) const {
  auto it = log_.find(vm_id);
  return it == log_.end() ? 0 : it->second.size();
}

}  // namespace cacs

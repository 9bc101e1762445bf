#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cacs/cloud_types.hpp"
#include "cacs/config.hpp"
#include "cacs/event_queue.hpp"
#include "cacs/net_meter.hpp"
#include "cacs/rng.hpp"
#include "cacs/trace.hpp"

namespace cacs {

// One simulated IaaS backend: a fixed pool of VM slots, a boot bay with a
// configurable concurrency limit, and optional push notifications on VM
// failure. All timing runs on the shared virtual clock.
class Backend {
 public:
  Backend(BackendProfile profile, EventQueue& clock, TraceLog& trace, NetMeter& net,
          std::uint64_t seed);

  const BackendProfile& profile() const { return profile_; }
  const std::string& name() const { return profile_.name; }

  // Claims templates.size() VM slots. VMs start BOOTING and come UP after
  // boot_latency (+ seeded jitter), serialized through the boot bay. While
  // any VM of the claim is booting, one polling flow against this backend's
  // front-end stays open. on_ready fires once every VM is UP; it is dropped
  // if the cluster is destroyed first.
  VirtualCluster create_cluster(const std::vector<VmTemplate>& templates,
                                std::function<void(const VirtualCluster&)> on_ready);

  // Releases every VM of the cluster back to the pool. Safe to repeat; VMs
  // still booting are released the moment their boot completes.
  void destroy_cluster(const VirtualCluster& cluster);

  // Releases a single VM (replacement bookkeeping during recovery).
  void release_vm(const std::string& vm_id);

  // Marks an UP VM unreachable. Pushes a notification if the profile has
  // failure notifications; otherwise detection is left to heartbeats.
  void inject_failure(const std::string& vm_id);

  void set_failure_listener(std::function<void(const std::string&)> fn) {
    failure_listener_ = std::move(fn);
  }

  const VmDescriptor& vm(const std::string& vm_id) const;  // throws UnknownVm
  bool has_vm(const std::string& vm_id) const { return vms_.count(vm_id) != 0; }
  bool vm_reachable(const std::string& vm_id) const;

  int idle_count() const { return idle_; }

  struct PoolAudit {
    int capacity = 0;
    int idle = 0;
    int booting = 0;
    int up = 0;
    int unreachable = 0;
    bool consistent = false;  // idle + booting + up + unreachable == capacity
  };
  PoolAudit audit() const;

 private:
  struct VmRec {
    VmDescriptor desc;
    std::uint64_t claim = 0;
    bool doomed = false;  // release as soon as the boot completes
  };
  struct Claim {
    std::vector<std::string> vm_ids;
    int pending = 0;
    bool canceled = false;
    NetMeter::FlowId poll_flow = 0;
    std::function<void(const VirtualCluster&)> on_ready;
    VTime started_at = 0;
  };

  void pump_boots();
  void finish_boot(const std::string& vm_id);
  void cancel_claim(Claim& claim);
  void release_internal(VmRec& rec);

  BackendProfile profile_;
  EventQueue& clock_;
  TraceLog& trace_;
  NetMeter& net_;
  SplitMix64 rng_;

  int idle_ = 0;
  std::uint64_t next_vm_serial_ = 1;
  std::uint64_t next_claim_ = 1;
  std::map<std::string, VmRec> vms_;
  std::map<std::uint64_t, Claim> claims_;
  std::deque<std::string> boot_queue_;
  int active_boots_ = 0;
  std::function<void(const std::string&)> failure_listener_;
};

// Cloud Manager: the set of configured backends behind one interface, so the
// rest of the service never branches on which IaaS it is talking to.
class CloudManager {
 public:
  CloudManager(const Config& config, EventQueue& clock, TraceLog& trace, NetMeter& net,
               std::uint64_t seed);

  bool has_backend(const std::string& name) const { return backends_.count(name) != 0; }
  Backend& backend(const std::string& name);  // throws UnknownBackend
  std::vector<std::string> backend_names() const;

  // The backend owning vm_id; throws UnknownVm if no backend knows it.
  Backend& backend_of_vm(const std::string& vm_id);

 private:
  std::map<std::string, std::unique_ptr<Backend>> backends_;
};

}  // namespace cacs

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cacs/api.hpp"
#include "cacs/ckptstore.hpp"
#include "cacs/cloudsim.hpp"
#include "cacs/config.hpp"
#include "cacs/coordinators_db.hpp"
#include "cacs/event_queue.hpp"
#include "cacs/lifecycle.hpp"
#include "cacs/monitor.hpp"
#include "cacs/provision.hpp"
#include "cacs/trace.hpp"
#include "cacs/workerrt.hpp"

namespace cacs {

struct RecoveryPlan {
  HealthVerdict verdict = HealthVerdict::Healthy;  // Healthy = nothing to do (stale report)
  std::uint64_t checkpoint_generation = 0;
  std::vector<std::string> replaced_vms;  // failed VM ids, VM-failure recovery only
};

// Application Manager: drives the submit -> allocate -> provision -> start
// pipeline, checkpoint/restart, cloning, termination and automatic failure
// recovery. Asynchronous steps are guarded by a per-app incarnation counter:
// terminate, restart and recovery each bump it, so continuations scheduled
// by a superseded plan find a stale incarnation and do nothing.
class AppManager {
 public:
  AppManager(const Config& cfg, EventQueue& clock, TraceLog& trace, CloudManager& clouds,
             ProvisionManager& prov, CheckpointManager& ckpts, MonitoringManager& monitor,
             CoordinatorsDb& db);

  // Validates the body and creates the record in CREATING. The pipeline is
  // launched separately so the REST layer can acknowledge first.
  std::uint64_t submit(const Json& body);

  // CREATING -> PROVISION -> READY, then -> RUNNING if the request asked for
  // autostart. Failures put the app in ERROR and report done(false); the
  // call itself only throws on precondition violations.
  void start_pipeline(std::uint64_t app_id, std::function<void(bool)> done = {});

  // Coordinated checkpoint of a RUNNING app; returns the new generation.
  // freeze_out, if given, receives how long the app stays frozen writing.
  std::uint64_t checkpoint_now(std::uint64_t app_id, VDur* freeze_out = nullptr);

  // Restart from `generation` (latest when absent). Legal from READY (a
  // clone target brought up from uploaded images) and RUNNING (rollback or
  // in-place recovery). While the start pipeline is still heading for READY
  // the request is queued and runs on arrival — a clone's restart lands
  // before the target cluster has booted. The record flips to RUNNING when
  // the images have been fetched and computation actually resumes.
  void restart_from(std::uint64_t app_id, std::optional<std::uint64_t> generation,
                    std::function<void(bool)> done = {});

  // Submits a copy of the app through `target` with autostart off, uploads
  // the selected checkpoint image by image, then requests a restart.
  // Returns the app id on the target service.
  std::uint64_t clone_to(std::uint64_t app_id, ApiClient& target,
                         const std::string& target_backend,
                         std::optional<std::uint64_t> generation);

  // Stop-and-copy: checkpoint now (when running and no generation given),
  // clone, then terminate the source.
  std::uint64_t migrate_to(std::uint64_t app_id, ApiClient& target,
                           const std::string& target_backend,
                           std::optional<std::uint64_t> generation);

  // Record deletion, checkpoint deletion, cluster teardown — in that order.
  void terminate(std::uint64_t app_id);

  // Reacts to a health report: VM failure replaces exactly the dead VMs and
  // restarts from the latest checkpoint on the patched cluster; application
  // failure restarts in place. Stale reports return a Healthy no-op plan.
  RecoveryPlan recover(std::uint64_t app_id, const HealthReport& report);

  Json describe(std::uint64_t app_id) const;
  Json list() const;

  AppRuntime* runtime(std::uint64_t app_id);
  const AppRuntime* runtime(std::uint64_t app_id) const;
  std::uint64_t coordinator_id(std::uint64_t app_id) const;  // 0 when none started yet
  bool recovering(std::uint64_t app_id) const;

 private:
  // Single-shot completion handle. Superseding an operation (terminate,
  // competing restart, recovery) fires the stale handles with false, so a
  // pool worker waiting on the operation is always released.
  using DoneToken = std::shared_ptr<std::function<void(bool)>>;

  struct Live {
    std::uint64_t incarnation = 1;
    std::unique_ptr<AppRuntime> runtime;
    std::uint64_t coordinator = 0;
    VirtualCluster claimed;  // every VM currently claimed, including booting replacements
    bool has_claim = false;
    bool recovering = false;
    HealthHookSpec hook;
    std::uint64_t last_iteration = 0;
    std::uint64_t stalled_rounds = 0;
    std::vector<DoneToken> op_dones;
    // Restart request that arrived before the pipeline reached READY.
    std::optional<std::optional<std::uint64_t>> pending_restart;
    std::function<void(bool)> pending_restart_done;
  };

  Live* find_live(std::uint64_t app_id);
  const Live* find_live(std::uint64_t app_id) const;
  bool step_valid(std::uint64_t app_id, std::uint64_t incarnation) const;

  static DoneToken arm_done(Live& live, std::function<void(bool)> done);
  static void fire_done(const DoneToken& token, bool ok);
  static void flush_dones(Live& live);

  void on_vms_allocated(std::uint64_t app_id, std::uint64_t inc, const VirtualCluster& cluster,
                        const DoneToken& done);
  void on_provisioned(std::uint64_t app_id, std::uint64_t inc, const ExecReport& report,
                      const DoneToken& done);
  void launch_runtime(std::uint64_t app_id);
  void attach_policy(std::uint64_t app_id, AppRuntime& rt);
  void watch_app(std::uint64_t app_id);
  void enter_error(std::uint64_t app_id, const std::string& why);
  void recover_vm_failure(std::uint64_t app_id, Live& live,
                          const std::vector<std::uint32_t>& failed_indices,
                          RecoveryPlan& plan);
  void recover_app_failure(std::uint64_t app_id, Live& live);
  void finish_recovery_restart(std::uint64_t app_id, std::uint64_t inc, AppEvent event);

  const Config& cfg_;
  EventQueue& clock_;
  TraceLog& trace_;
  CloudManager& clouds_;
  ProvisionManager& prov_;
  CheckpointManager& ckpts_;
  MonitoringManager& monitor_;
  CoordinatorsDb& db_;

  std::map<std::uint64_t, Live> live_;
  std::uint64_t next_coordinator_ = 1;
};

}  // namespace cacs

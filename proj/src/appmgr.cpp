#include "cacs/appmgr.hpp"

#include <algorithm>
#include <utility>

#include "cacs/errors.hpp"
#include "cacs/util.hpp"

namespace cacs {

AppManager::AppManager(const Config& cfg, EventQueue& clock, TraceLog& trace,
                       CloudManager& clouds, ProvisionManager& prov, CheckpointManager& ckpts,
                       MonitoringManager& monitor, CoordinatorsDb& db)
    : cfg_(cfg),
      clock_(clock),
      trace_(trace),
      clouds_(clouds),
      prov_(prov),
      ckpts_(ckpts),
      monitor_(monitor),
      db_(db) {
  for (const std::string& name : clouds_.backend_names()) {
    clouds_.backend(name).set_failure_listener([this](const std::string& vm_id) {
      try {
        monitor_.ingest_backend_notification(vm_id);
      } catch (const CacsError&) {
        // Notification for a VM no application watches; nothing to do.
      }
    });
  }
}

AppManager::Live* AppManager::find_live(std::uint64_t app_id) {
  auto it = live_.find(app_id);
  return it == live_.end() ? nullptr : &it->second;
}

const AppManager::Live* AppManager::find_live(std::uint64_t app_id) const {
  auto it = live_.find(app_id);
  return it == live_.end() ? nullptr : &it->second;
}

bool AppManager::step_valid(std::uint64_t app_id, std::uint64_t incarnation) const {
  const Live* live = find_live(app_id);
  return live != nullptr && live->incarnation == incarnation;
}

AppManager::DoneToken AppManager::arm_done(Live& live, std::function<void(bool)> done) {
  auto token = std::make_shared<std::function<void(bool)>>(std::move(done));
  live.op_dones.push_back(token);
  return token;
}

void AppManager::fire_done(const DoneToken& token, bool ok) {
  if (!token || !*token) return;
  auto fn = std::move(*token);
  *token = nullptr;
  fn(ok);
}

void AppManager::flush_dones(Live& live) {
  auto tokens = std::move(live.op_dones);
  live.op_dones.clear();
  for (const DoneToken& token : tokens) fire_done(token, false);
  if (live.pending_restart_done) {
    auto fn = std::move(live.pending_restart_done);
    live.pending_restart_done = nullptr;
    live.pending_restart.reset();
    fn(false);
  }
}

std::uint64_t AppManager::submit(const Json& body) {
  AppSubmissionRequest asr = validate_asr(
      asr_from_json(body), [this](const std::string& b) { return clouds_.has_backend(b); },
      cfg_.service.default_checkpoint_period);
  const HealthHookSpec hook = parse_health_hook(asr.health_hook);
  const std::uint64_t id = db_.insert(std::move(asr));
  Live& live = live_[id];
  live.hook = hook;
  return id;
}

void AppManager::start_pipeline(std::uint64_t app_id, std::function<void(bool)> done) {
  ApplicationRecord& rec = db_.record(app_id);
  if (rec.state != AppState::CREATING)
    raise(ErrorCode::StateConflict,
          "pipeline needs CREATING, app " + std::to_string(app_id) + " is " +
              std::string(app_state_name(rec.state)));
  Live* live = find_live(app_id);
  if (live == nullptr) raise(ErrorCode::Internal, "no live entry for app " + std::to_string(app_id));
  const std::uint64_t inc = live->incarnation;
  const DoneToken tok = arm_done(*live, std::move(done));

  Backend& backend = clouds_.backend(rec.asr.backend_id);
  VirtualCluster cluster;
  try {
    cluster = backend.create_cluster(
        rec.asr.vm_templates, [this, app_id, inc, tok](const VirtualCluster& ready) {
          if (!step_valid(app_id, inc)) return;
          on_vms_allocated(app_id, inc, ready, tok);
        });
  } catch (const CacsError& e) {
    enter_error(app_id, std::string("allocation failed: ") + e.what());
    fire_done(tok, false);
    return;
  }
  live->claimed = cluster;
  live->has_claim = true;
  trace_.append(clock_.now(), "appmgr",
                "app=" + std::to_string(app_id) + " claimed " +
                    std::to_string(cluster.vm_ids.size()) + " vms on " + cluster.backend_id);
}

void AppManager::on_vms_allocated(std::uint64_t app_id, std::uint64_t inc,
                                  const VirtualCluster& cluster, const DoneToken& done) {
  db_.apply_event(app_id, AppEvent::VmsAllocated);
  db_.set_cluster(app_id, cluster);
  const ApplicationRecord& rec = db_.record(app_id);
  const ExecReport report =
      prov_.exec_parallel(cluster.vm_ids, default_script(rec.asr, cfg_.service),
                          budget_from(cfg_.service));
  clock_.in(report.elapsed, [this, app_id, inc, report, done] {
    if (!step_valid(app_id, inc)) return;
    on_provisioned(app_id, inc, report, done);
  });
}

void AppManager::on_provisioned(std::uint64_t app_id, std::uint64_t inc,
                                const ExecReport& report, const DoneToken& done) {
  // Re-verify reachability: a VM that died while the script ran produced a
  // healthy-looking report slot at dispatch time.
  bool ok = report.all_ok;
  const ApplicationRecord& rec = db_.record(app_id);
  for (const std::string& vm : rec.cluster->vm_ids)
    if (!clouds_.backend(rec.cluster->backend_id).vm_reachable(vm)) ok = false;
  if (!ok) {
    enter_error(app_id, "provisioning failed");
    fire_done(done, false);
    return;
  }
  db_.apply_event(app_id, AppEvent::ProvisionDone);
  if (!rec.asr.autostart) {
    trace_.append(clock_.now(), "appmgr",
                  "app=" + std::to_string(app_id) + " parked READY (no autostart)");
    fire_done(done, true);
    Live& live = live_.at(app_id);
    if (live.pending_restart) {
      const std::optional<std::uint64_t> gen = *live.pending_restart;
      auto restart_done = std::move(live.pending_restart_done);
      live.pending_restart.reset();
      live.pending_restart_done = nullptr;
      try {
        restart_from(app_id, gen, std::move(restart_done));
      } catch (const CacsError& e) {
        enter_error(app_id, std::string("queued restart failed: ") + e.what());
      }
    }
    return;
  }
  clock_.in(cfg_.service.start_latency, [this, app_id, inc, done] {
    if (!step_valid(app_id, inc)) return;
    db_.apply_event(app_id, AppEvent::StartCommand);
    launch_runtime(app_id);
    fire_done(done, true);
  });
}

void AppManager::launch_runtime(std::uint64_t app_id) {
  ApplicationRecord& rec = db_.record(app_id);
  Live& live = live_.at(app_id);
  live.coordinator = next_coordinator_++;
  live.runtime = AppRuntime::start(app_id, live.coordinator, rec.asr.app_spec,
                                   rec.cluster->vm_ids.size(), rec.asr.seed,
                                   cfg_.service.msg_hop, clock_, trace_);
  attach_policy(app_id, *live.runtime);
  live.last_iteration = 0;
  live.stalled_rounds = 0;
  live.runtime->run();
  watch_app(app_id);
}

void AppManager::attach_policy(std::uint64_t app_id, AppRuntime& rt) {
  const ApplicationRecord& rec = db_.record(app_id);
  rt.set_checkpoint_sink([this, app_id](const std::vector<std::vector<std::uint8_t>>& images) {
    if (!db_.contains(app_id)) return VDur{0};
    const ApplicationRecord& r = db_.record(app_id);
    if (r.state != AppState::RUNNING || !r.cluster) return VDur{0};
    try {
      const auto write = ckpts_.store_local(app_id, r.cluster->vm_ids, images);
      ckpts_.schedule_replication(app_id, write.set.generation, r.cluster->vm_ids);
      return write.write_time;
    } catch (const CacsError& e) {
      // A full local disk skips this cut; the computation carries on.
      trace_.append(clock_.now(), "appmgr",
                    "app=" + std::to_string(app_id) + " policy checkpoint dropped: " + e.what());
      return VDur{0};
    }
  });
  switch (rec.asr.checkpoint_policy.mode) {
    case CheckpointMode::Periodic:
      rt.enable_periodic(*rec.asr.checkpoint_policy.period);
      break;
    case CheckpointMode::AppInitiated:
      rt.enable_app_initiated();
      break;
    case CheckpointMode::UserInitiated:
      break;
  }
}

void AppManager::watch_app(std::uint64_t app_id) {
  if (monitor_.watching(app_id)) return;
  const ApplicationRecord& rec = db_.record(app_id);
  NodeProbes probes;
  probes.reachable = [this, app_id](std::uint32_t index) {
    if (!db_.contains(app_id)) return false;
    const ApplicationRecord& r = db_.record(app_id);
    if (!r.cluster || index >= r.cluster->vm_ids.size()) return false;
    try {
      return clouds_.backend(r.cluster->backend_id).vm_reachable(r.cluster->vm_ids[index]);
    } catch (const CacsError&) {
      return false;
    }
  };
  probes.hook = [this, app_id](std::uint32_t index) -> std::optional<bool> {
    const Live* live = find_live(app_id);
    if (live == nullptr || !live->runtime || live->runtime->stopped()) return false;
    if (live->runtime->completed()) return true;  // clean exit stays healthy
    if (!live->runtime->hook_healthy(index)) return false;
    if (live->hook.kind == HealthHookSpec::Kind::ProgressWithin)
      return live->stalled_rounds <= live->hook.window;
    return true;
  };
  probes.round_begin = [this, app_id] {
    Live* live = find_live(app_id);
    if (live == nullptr || !live->runtime) return;
    const std::uint64_t it = live->runtime->iterations_done();
    if (it > live->last_iteration) {
      live->last_iteration = it;
      live->stalled_rounds = 0;
    } else if (!live->runtime->completed()) {
      ++live->stalled_rounds;
    }
  };
  monitor_.watch(app_id, rec.cluster->vm_ids, std::move(probes),
                 [this, app_id](const HealthReport& report) {
                   try {
                     recover(app_id, report);
                   } catch (const CacsError&) {
                     // recover() already moved the record to ERROR.
                   }
                 });
}

std::uint64_t AppManager::checkpoint_now(std::uint64_t app_id, VDur* freeze_out) {
  const ApplicationRecord& rec = db_.record(app_id);
  if (rec.state != AppState::RUNNING)
    raise(ErrorCode::StateConflict,
          "checkpoint needs RUNNING, app is " + std::string(app_state_name(rec.state)));
  Live* live = find_live(app_id);
  if (live == nullptr || !live->runtime)
    raise(ErrorCode::StateConflict, "app " + std::to_string(app_id) + " has no runtime");
  if (live->runtime->frozen())
    raise(ErrorCode::StateConflict, "checkpoint already in flight");
  const auto images = live->runtime->checkpoint();
  CheckpointManager::LocalWrite write;
  try {
    write = ckpts_.store_local(app_id, rec.cluster->vm_ids, images);
  } catch (const CacsError&) {
    live->runtime->resume_after(0);
    throw;
  }
  ckpts_.schedule_replication(app_id, write.set.generation, rec.cluster->vm_ids);
  live->runtime->resume_after(write.write_time);
  if (freeze_out != nullptr) *freeze_out = write.write_time;
  trace_.append(clock_.now(), "appmgr",
                "app=" + std::to_string(app_id) + " checkpoint gen=" +
                    std::to_string(write.set.generation));
  return write.set.generation;
}

void AppManager::restart_from(std::uint64_t app_id, std::optional<std::uint64_t> generation,
                              std::function<void(bool)> done) {
  ApplicationRecord& rec = db_.record(app_id);
  if (!rec.asr.autostart &&
      (rec.state == AppState::CREATING || rec.state == AppState::PROVISION)) {
    Live& live = live_[app_id];
    if (live.pending_restart_done) live.pending_restart_done(false);  // superseded queue slot
    live.pending_restart = generation;
    live.pending_restart_done = std::move(done);
    trace_.append(clock_.now(), "appmgr",
                  "app=" + std::to_string(app_id) + " restart queued until READY");
    return;
  }
  if (rec.state != AppState::READY && rec.state != AppState::RUNNING)
    raise(ErrorCode::StateConflict,
          "restart needs READY or RUNNING, app is " + std::string(app_state_name(rec.state)));
  if (!rec.cluster) raise(ErrorCode::StateConflict, "app has no cluster");

  const CheckpointSet set = ckpts_.select_image(app_id, generation);
  const auto fetched = ckpts_.fetch(app_id, set);
  // Validate the images before touching the old runtime: a corrupt or
  // mismatched set must leave the running app untouched.
  Live& live = live_[app_id];
  const std::uint64_t coordinator = next_coordinator_++;
  auto fresh = AppRuntime::restart(app_id, coordinator, rec.asr.app_spec,
                                   rec.cluster->vm_ids.size(), fetched.images,
                                   cfg_.service.msg_hop, clock_, trace_);

  const std::uint64_t inc = ++live.incarnation;
  flush_dones(live);
  const DoneToken tok = arm_done(live, std::move(done));
  if (live.runtime) live.runtime->stop();
  live.runtime = std::move(fresh);
  live.coordinator = coordinator;
  const AppEvent event =
      rec.state == AppState::READY ? AppEvent::StartCommand : AppEvent::RecoveryDone;
  trace_.append(clock_.now(), "appmgr",
                "app=" + std::to_string(app_id) + " restart gen=" +
                    std::to_string(set.generation) + " coordinator=" + std::to_string(coordinator));
  clock_.in(fetched.transfer_time, [this, app_id, inc, event, tok] {
    if (!step_valid(app_id, inc)) return;
    db_.apply_event(app_id, event);
    Live& l = live_.at(app_id);
    attach_policy(app_id, *l.runtime);
    l.last_iteration = 0;
    l.stalled_rounds = 0;
    l.runtime->run();
    watch_app(app_id);
    fire_done(tok, true);
  });
}

std::uint64_t AppManager::clone_to(std::uint64_t app_id, ApiClient& target,
                                   const std::string& target_backend,
                                   std::optional<std::uint64_t> generation) {
  const ApplicationRecord& rec = db_.record(app_id);
  const CheckpointSet set = ckpts_.select_image(app_id, generation);
  const auto fetched = ckpts_.fetch(app_id, set);

  AppSubmissionRequest copy = rec.asr;
  if (!target_backend.empty()) copy.backend_id = target_backend;
  copy.autostart = false;
  ApiResponse created = target.call({"POST", "/coordinators", asr_to_json(copy)});
  if (!created.ok())
    raise(ErrorCode::UploadFailed,
          "clone submit rejected: status " + std::to_string(created.status));
  const std::uint64_t remote_id = created.body.at("id").get<std::uint64_t>();
  const std::string base = "/coordinators/" + std::to_string(remote_id);

  const std::uint32_t count = static_cast<std::uint32_t>(fetched.images.size());
  std::optional<std::uint64_t> uploaded_gen;
  for (std::uint32_t i = 0; i < count; ++i) {
    Json piece{{"vm_index", i},
               {"count", count},
               {"data", base64_encode(fetched.images[i])}};
    ApiResponse up = target.call({"POST", base + "/checkpoints", std::move(piece)});
    if (!up.ok())
      raise(ErrorCode::UploadFailed,
            "image " + std::to_string(i) + " rejected: status " + std::to_string(up.status));
    if (up.body.is_object() && up.body.contains("id"))
      uploaded_gen = up.body.at("id").get<std::uint64_t>();
  }
  if (!uploaded_gen)
    raise(ErrorCode::UploadFailed, "uploads finished without completing a set");
  ApiResponse restarted = target.call(
      {"POST", base + "/checkpoints/" + std::to_string(*uploaded_gen), std::nullopt});
  if (!restarted.ok())
    raise(ErrorCode::UploadFailed,
          "clone restart rejected: status " + std::to_string(restarted.status));
  trace_.append(clock_.now(), "appmgr",
                "app=" + std::to_string(app_id) + " cloned gen=" + std::to_string(set.generation) +
                    " -> remote app " + std::to_string(remote_id));
  return remote_id;
}

std::uint64_t AppManager::migrate_to(std::uint64_t app_id, ApiClient& target,
                                     const std::string& target_backend,
                                     std::optional<std::uint64_t> generation) {
  const ApplicationRecord& rec = db_.record(app_id);
  std::optional<std::uint64_t> gen = generation;
  if (!gen && rec.state == AppState::RUNNING) gen = checkpoint_now(app_id);  // stop-and-copy
  const std::uint64_t remote_id = clone_to(app_id, target, target_backend, gen);
  terminate(app_id);
  return remote_id;
}

void AppManager::terminate(std::uint64_t app_id) {
  std::optional<VirtualCluster> cluster = db_.record(app_id).cluster;  // UnknownApp when repeated
  Live* live = find_live(app_id);
  if (live != nullptr) {
    ++live->incarnation;
    flush_dones(*live);
    if (live->runtime) live->runtime->stop();
    live->runtime.reset();
    if (live->has_claim) cluster = live->claimed;
  }
  monitor_.unwatch(app_id);
  db_.apply_event(app_id, AppEvent::DeleteRequest);

  db_.erase(app_id);
  trace_.append(clock_.now(), "appmgr",
                "app=" + std::to_string(app_id) + " terminate step 1: record deleted");
  ckpts_.delete_all(app_id);
  trace_.append(clock_.now(), "appmgr",
                "app=" + std::to_string(app_id) + " terminate step 2: checkpoints deleted");
  if (cluster) clouds_.backend(cluster->backend_id).destroy_cluster(*cluster);
  trace_.append(clock_.now(), "appmgr",
                "app=" + std::to_string(app_id) + " terminate step 3: cluster destroyed");
  live_.erase(app_id);
}

void AppManager::enter_error(std::uint64_t app_id, const std::string& why) {
  if (!db_.contains(app_id)) return;
  ApplicationRecord& rec = db_.record(app_id);
  if (rec.state == AppState::TERMINATING || rec.state == AppState::ERROR) return;
  Live* live = find_live(app_id);
  std::optional<VirtualCluster> cluster = rec.cluster;
  if (live != nullptr) {
    ++live->incarnation;
    flush_dones(*live);
    live->recovering = false;
    if (live->runtime) live->runtime->stop();
    live->runtime.reset();
    if (live->has_claim) cluster = live->claimed;
    live->has_claim = false;
  }
  monitor_.unwatch(app_id);
  if (cluster) clouds_.backend(cluster->backend_id).destroy_cluster(*cluster);
  db_.set_cluster(app_id, std::nullopt);
  db_.apply_event(app_id, AppEvent::FatalError);
  trace_.append(clock_.now(), "appmgr", "app=" + std::to_string(app_id) + " ERROR: " + why);
}

RecoveryPlan AppManager::recover(std::uint64_t app_id, const HealthReport& report) {
  RecoveryPlan plan;
  if (!db_.contains(app_id) || db_.record(app_id).state != AppState::RUNNING) return plan;
  Live* live = find_live(app_id);
  if (live == nullptr || live->recovering) return plan;

  plan.verdict = classify(report);
  if (plan.verdict == HealthVerdict::Healthy)
    raise(ErrorCode::InvalidRequest, "recover called with a healthy report");

  CheckpointSet set;
  try {
    set = ckpts_.select_image(app_id, std::nullopt);
  } catch (const CacsError& e) {
    enter_error(app_id, std::string("recovery impossible: ") + e.what());
    throw;
  }
  plan.checkpoint_generation = set.generation;
  live->recovering = true;
  trace_.append(clock_.now(), "appmgr",
                "app=" + std::to_string(app_id) + " recovery (" +
                    std::string(health_verdict_name(plan.verdict)) + ") from gen=" +
                    std::to_string(set.generation));

  if (plan.verdict == HealthVerdict::VmFailure) {
    std::vector<std::uint32_t> failed(report.unreachable.begin(), report.unreachable.end());
    std::sort(failed.begin(), failed.end());
    recover_vm_failure(app_id, *live, failed, plan);
  } else {
    recover_app_failure(app_id, *live);
  }
  return plan;
}

void AppManager::recover_vm_failure(std::uint64_t app_id, Live& live,
                                    const std::vector<std::uint32_t>& failed_indices,
                                    RecoveryPlan& plan) {
  ApplicationRecord& rec = db_.record(app_id);
  const VirtualCluster old_cluster = *rec.cluster;
  const std::uint64_t inc = ++live.incarnation;
  flush_dones(live);
  if (live.runtime) live.runtime->stop();
  live.runtime.reset();
  monitor_.unwatch(app_id);

  std::vector<VmTemplate> replacement_templates;
  for (std::uint32_t index : failed_indices) {
    if (index >= old_cluster.vm_ids.size()) continue;
    const std::string& vm = old_cluster.vm_ids[index];
    plan.replaced_vms.push_back(vm);
    replacement_templates.push_back(rec.asr.vm_templates[index]);
  }

  db_.apply_event(app_id, AppEvent::RecoveryBegun);
  db_.set_cluster(app_id, std::nullopt);

  Backend& backend = clouds_.backend(old_cluster.backend_id);
  auto& claimed_ids = live.claimed.vm_ids;
  for (const std::string& vm : plan.replaced_vms) {
    ckpts_.drop_vm_store(vm);
    backend.release_vm(vm);
    claimed_ids.erase(std::remove(claimed_ids.begin(), claimed_ids.end(), vm),
                      claimed_ids.end());
  }

  VirtualCluster replacements;
  try {
    replacements = backend.create_cluster(
        replacement_templates,
        [this, app_id, inc, old_cluster, failed_indices](const VirtualCluster& ready) {
          if (!step_valid(app_id, inc)) return;
          VirtualCluster rebuilt = old_cluster;
          for (std::size_t j = 0; j < failed_indices.size(); ++j)
            rebuilt.vm_ids[failed_indices[j]] = ready.vm_ids[j];
          db_.apply_event(app_id, AppEvent::VmsAllocated);
          db_.set_cluster(app_id, rebuilt);
          const ApplicationRecord& r = db_.record(app_id);
          const ExecReport report = prov_.exec_parallel(
              ready.vm_ids, default_script(r.asr, cfg_.service), budget_from(cfg_.service));
          clock_.in(report.elapsed, [this, app_id, inc, ready, report] {
            if (!step_valid(app_id, inc)) return;
            bool ok = report.all_ok;
            const ApplicationRecord& r2 = db_.record(app_id);
            Backend& b = clouds_.backend(r2.cluster->backend_id);
            for (const std::string& vm : ready.vm_ids)
              if (!b.vm_reachable(vm)) ok = false;
            if (!ok) {
              enter_error(app_id, "replacement provisioning failed");
              return;
            }
            db_.apply_event(app_id, AppEvent::ProvisionDone);
            finish_recovery_restart(app_id, inc, AppEvent::StartCommand);
          });
        });
  } catch (const CacsError& e) {
    enter_error(app_id, std::string("replacement allocation failed: ") + e.what());
    return;
  }
  claimed_ids.insert(claimed_ids.end(), replacements.vm_ids.begin(), replacements.vm_ids.end());
}

void AppManager::recover_app_failure(std::uint64_t app_id, Live& live) {
  const std::uint64_t inc = ++live.incarnation;
  flush_dones(live);
  if (live.runtime) live.runtime->stop();
  live.runtime.reset();
  finish_recovery_restart(app_id, inc, AppEvent::RecoveryDone);
}

void AppManager::finish_recovery_restart(std::uint64_t app_id, std::uint64_t inc,
                                         AppEvent event) {
  CheckpointSet set;
  CheckpointManager::Fetched fetched;
  try {
    set = ckpts_.select_image(app_id, std::nullopt);
    fetched = ckpts_.fetch(app_id, set);
  } catch (const CacsError& e) {
    enter_error(app_id, std::string("recovery fetch failed: ") + e.what());
    return;
  }
  ApplicationRecord& rec = db_.record(app_id);
  Live& live = live_.at(app_id);
  const std::uint64_t coordinator = next_coordinator_++;
  try {
    live.runtime = AppRuntime::restart(app_id, coordinator, rec.asr.app_spec,
                                       rec.cluster->vm_ids.size(), fetched.images,
                                       cfg_.service.msg_hop, clock_, trace_);
  } catch (const CacsError& e) {
    enter_error(app_id, std::string("recovery restart failed: ") + e.what());
    return;
  }
  live.coordinator = coordinator;
  clock_.in(fetched.transfer_time, [this, app_id, inc, event, coordinator] {
    if (!step_valid(app_id, inc)) return;
    db_.apply_event(app_id, event);
    Live& l = live_.at(app_id);
    attach_policy(app_id, *l.runtime);
    l.last_iteration = 0;
    l.stalled_rounds = 0;
    l.recovering = false;
    l.runtime->run();
    watch_app(app_id);
    trace_.append(clock_.now(), "appmgr",
                  "app=" + std::to_string(app_id) + " recovered, coordinator=" +
                      std::to_string(coordinator));
  });
}

Json AppManager::describe(std::uint64_t app_id) const {
  const ApplicationRecord& rec = db_.record(app_id);
  Json j{{"id", rec.app_id},
         {"state", app_state_name(rec.state)},
         {"backend", rec.asr.backend_id},
         {"checkpoint_mode", checkpoint_mode_name(rec.asr.checkpoint_policy.mode)},
         {"event_seq", rec.event_seq},
         {"created_at", rec.created_at},
         {"vm_ids", rec.cluster ? Json(rec.cluster->vm_ids) : Json::array()}};
  const Live* live = find_live(app_id);
  j["coordinator_id"] = live != nullptr ? live->coordinator : 0;
  j["recovering"] = live != nullptr && live->recovering;
  if (live != nullptr && live->runtime) {
    j["iterations_done"] = live->runtime->iterations_done();
    j["completed"] = live->runtime->completed();
  }
  return j;
}

Json AppManager::list() const {
  Json out = Json::array();
  for (std::uint64_t id : db_.ids()) out.push_back(describe(id));
  return out;
}

AppRuntime* AppManager::runtime(std::uint64_t app_id) {
  Live* live = find_live(app_id);
  return live != nullptr ? live->runtime.get() : nullptr;
}

const AppRuntime* AppManager::runtime(std::uint64_t app_id) const {
  const Live* live = find_live(app_id);
  return live != nullptr ? live->runtime.get() : nullptr;
}

std::uint64_t AppManager::coordinator_id(std::uint64_t app_id) const {
  const Live* live = find_live(app_id);
  return live != nullptr ? live->coordinator : 0;
}

bool AppManager::recovering(std::uint64_t app_id) const {
  const Live* live = find_live(app_id);
  return live != nullptr && live->recovering;
}

}  // namespace cacs

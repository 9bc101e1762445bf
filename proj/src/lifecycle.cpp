#include "cacs/lifecycle.hpp"

#include "nlohmann/json.hpp"

#include "cacs/errors.hpp"

namespace cacs {

std::string_view vm_status_name(VmStatus s) {
  switch (s) {
    case VmStatus::BOOTING: return "BOOTING";
    case VmStatus::UP: return "UP";
    case VmStatus::UNREACHABLE: return "UNREACHABLE";
    case VmStatus::RELEASED: return "RELEASED";
  }
  return "?";
}

std::string_view app_state_name(AppState s) {
  switch (s) {
    case AppState::CREATING: return "CREATING";
    case AppState::PROVISION: return "PROVISION";
    case AppState::READY: return "READY";
    case AppState::RUNNING: return "RUNNING";
    case AppState::TERMINATING: return "TERMINATING";
    case AppState::ERROR: return "ERROR";
  }
  return "?";
}

std::string_view app_event_name(AppEvent e) {
  switch (e) {
    case AppEvent::VmsAllocated: return "VmsAllocated";
    case AppEvent::ProvisionDone: return "ProvisionDone";
    case AppEvent::StartCommand: return "StartCommand";
    case AppEvent::DeleteRequest: return "DeleteRequest";
    case AppEvent::FatalError: return "FatalError";
    case AppEvent::RecoveryBegun: return "RecoveryBegun";
    case AppEvent::RecoveryDone: return "RecoveryDone";
  }
  return "?";
}

AppState parse_app_state(const std::string& name) {
  for (AppState s : kAllStates) {
    if (app_state_name(s) == name) return s;
  }
  raise(ErrorCode::InvalidRequest, "unknown application state: " + name);
}

std::optional<AppState> try_transition(AppState state, AppEvent event) {
  // DeleteRequest reaches TERMINATING from every state, including the
  // automatic teardown of an application sitting in ERROR. TERMINATING is
  // absorbing otherwise.
  if (event == AppEvent::DeleteRequest) return AppState::TERMINATING;
  if (state == AppState::TERMINATING) return std::nullopt;
  if (event == AppEvent::FatalError) return AppState::ERROR;
  switch (state) {
    case AppState::CREATING:
      if (event == AppEvent::VmsAllocated) return AppState::PROVISION;
      break;
    case AppState::PROVISION:
      if (event == AppEvent::ProvisionDone) return AppState::READY;
      break;
    case AppState::READY:
      if (event == AppEvent::StartCommand) return AppState::RUNNING;
      break;
    case AppState::RUNNING:
      // Passive recovery claims fresh VMs and re-runs the bring-up phases;
      // an in-place process restart never leaves RUNNING.
      if (event == AppEvent::RecoveryBegun) return AppState::CREATING;
      if (event == AppEvent::RecoveryDone) return AppState::RUNNING;
      break;
    case AppState::TERMINATING:
    case AppState::ERROR:
      break;
  }
  return std::nullopt;
}

AppState transition(AppState state, AppEvent event) {
  std::optional<AppState> next = try_transition(state, event);
  if (!next) {
    raise(ErrorCode::IllegalTransition,
          std::string("no transition from ") + std::string(app_state_name(state)) + " on " +
              std::string(app_event_name(event)));
  }
  return *next;
}

std::string_view checkpoint_mode_name(CheckpointMode m) {
  switch (m) {
    case CheckpointMode::UserInitiated: return "user";
    case CheckpointMode::Periodic: return "periodic";
    case CheckpointMode::AppInitiated: return "app";
  }
  return "?";
}

std::string_view workload_kind_name(WorkloadKind k) {
  switch (k) {
    case WorkloadKind::RingSum: return "ring_sum";
    case WorkloadKind::SingleCounter: return "single_counter";
  }
  return "?";
}

WorkloadKind parse_workload_kind(const std::string& name) {
  if (name == "ring_sum") return WorkloadKind::RingSum;
  if (name == "single_counter") return WorkloadKind::SingleCounter;
  raise(ErrorCode::InvalidAsr, "unknown workload kind: " + name);
}

namespace {

CheckpointMode parse_checkpoint_mode(const std::string& name) {
  if (name == "user") return CheckpointMode::UserInitiated;
  if (name == "periodic") return CheckpointMode::Periodic;
  if (name == "app") return CheckpointMode::AppInitiated;
  raise(ErrorCode::InvalidAsr, "unknown checkpoint mode: " + name);
}

}  // namespace

AppSubmissionRequest asr_from_json(const Json& body) {
  if (!body.is_object()) raise(ErrorCode::InvalidAsr, "request body must be a JSON object");
  AppSubmissionRequest asr;
  try {
    asr.backend_id = body.value("backend", "");
    if (body.contains("vm_templates")) {
      for (const Json& jt : body.at("vm_templates")) {
        VmTemplate t;
        t.vcpus = jt.value("vcpus", 1);
        t.memory_mb = jt.value("memory_mb", 1024);
        t.image_name = jt.value("image_name", "base");
        asr.vm_templates.push_back(t);
      }
    }
    if (body.contains("checkpoint_policy")) {
      const Json& jp = body.at("checkpoint_policy");
      asr.checkpoint_policy.mode = parse_checkpoint_mode(jp.value("mode", "periodic"));
      if (jp.contains("period_s")) {
        asr.checkpoint_policy.period = vseconds(jp.at("period_s").get<double>());
      } else {
        asr.checkpoint_policy.period.reset();
      }
    } else {
      // Normalized later by validate_asr; mark "policy absent".
      asr.checkpoint_policy.period.reset();
    }
    if (body.contains("app_spec")) {
      const Json& js = body.at("app_spec");
      asr.app_spec.kind = parse_workload_kind(js.value("kind", "single_counter"));
      asr.app_spec.iterations = js.value("iterations", std::uint64_t{1});
      asr.app_spec.payload_bytes_per_msg = js.value("payload_bytes_per_msg", std::uint32_t{64});
      asr.app_spec.state_bytes_total = js.value("state_bytes_total", std::uint64_t{4096});
    }
    asr.seed = body.value("seed", std::uint64_t{0});
    asr.health_hook = body.value("health_hook", "process_alive");
    asr.autostart = body.value("autostart", true);
  } catch (const CacsError&) {
    throw;
  } catch (const std::exception& e) {
    raise(ErrorCode::InvalidAsr, std::string("malformed ASR: ") + e.what());
  }
  return asr;
}

Json asr_to_json(const AppSubmissionRequest& asr) {
  Json jt = Json::array();
  for (const VmTemplate& t : asr.vm_templates) {
    jt.push_back({{"vcpus", t.vcpus}, {"memory_mb", t.memory_mb}, {"image_name", t.image_name}});
  }
  Json jp = {{"mode", checkpoint_mode_name(asr.checkpoint_policy.mode)}};
  if (asr.checkpoint_policy.period) jp["period_s"] = to_seconds(*asr.checkpoint_policy.period);
  Json js = {{"kind", workload_kind_name(asr.app_spec.kind)},
             {"iterations", asr.app_spec.iterations},
             {"payload_bytes_per_msg", asr.app_spec.payload_bytes_per_msg},
             {"state_bytes_total", asr.app_spec.state_bytes_total}};
  return Json{{"backend", asr.backend_id},
              {"vm_templates", jt},
              {"checkpoint_policy", jp},
              {"app_spec", js},
              {"seed", asr.seed},
              {"health_hook", asr.health_hook},
              {"autostart", asr.autostart}};
}

AppSubmissionRequest validate_asr(AppSubmissionRequest asr,
                                  const std::function<bool(const std::string&)>& backend_known,
                                  VDur default_period) {
  if (asr.vm_templates.empty()) raise(ErrorCode::InvalidAsr, "ASR has no VM templates");
  for (const VmTemplate& t : asr.vm_templates) {
    if (t.vcpus < 1) raise(ErrorCode::InvalidAsr, "vm template: vcpus must be >= 1");
    if (t.memory_mb < 1) raise(ErrorCode::InvalidAsr, "vm template: memory_mb must be >= 1");
  }
  if (asr.backend_id.empty()) raise(ErrorCode::InvalidAsr, "ASR names no backend");
  if (!backend_known(asr.backend_id)) {
    raise(ErrorCode::InvalidAsr, "unknown backend: " + asr.backend_id);
  }
  CheckpointPolicy& p = asr.checkpoint_policy;
  if (p.mode == CheckpointMode::Periodic && !p.period) p.period = default_period;
  if (p.period && *p.period <= 0) raise(ErrorCode::InvalidAsr, "checkpoint period must be positive");
  if (p.mode != CheckpointMode::Periodic && p.period) {
    raise(ErrorCode::InvalidAsr, "checkpoint period is only valid in periodic mode");
  }
  if (asr.app_spec.iterations < 1) raise(ErrorCode::InvalidAsr, "workload iterations must be >= 1");
  if (asr.app_spec.kind == WorkloadKind::RingSum && asr.vm_templates.size() < 2) {
    raise(ErrorCode::InvalidAsr, "ring_sum needs at least 2 VMs");
  }
  if (asr.app_spec.kind == WorkloadKind::SingleCounter && asr.vm_templates.size() != 1) {
    raise(ErrorCode::InvalidAsr, "single_counter runs on exactly 1 VM");
  }
  return asr;
}

}  // namespace cacs

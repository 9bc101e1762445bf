#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nlohmann/json.hpp"

#include "cacs/cloud_types.hpp"
#include "cacs/vtime.hpp"
#include "cacs/workload.hpp"

namespace cacs {

using Json = nlohmann::json;

enum class AppState { CREATING, PROVISION, READY, RUNNING, TERMINATING, ERROR };
enum class AppEvent {
  VmsAllocated,
  ProvisionDone,
  StartCommand,
  DeleteRequest,
  FatalError,
  RecoveryBegun,
  RecoveryDone,
};

inline constexpr AppState kAllStates[] = {
    AppState::CREATING,  AppState::PROVISION,   AppState::READY,
    AppState::RUNNING,   AppState::TERMINATING, AppState::ERROR,
};
inline constexpr AppEvent kAllEvents[] = {
    AppEvent::VmsAllocated, AppEvent::ProvisionDone, AppEvent::StartCommand,
    AppEvent::DeleteRequest, AppEvent::FatalError,   AppEvent::RecoveryBegun,
    AppEvent::RecoveryDone,
};

std::string_view app_state_name(AppState s);
std::string_view app_event_name(AppEvent e);
AppState parse_app_state(const std::string& name);

// Successor state for legal (state, event) pairs; nullopt otherwise.
// Total over the enum product, never throws.
std::optional<AppState> try_transition(AppState state, AppEvent event);

// Like try_transition but raises IllegalTransition for pairs with no edge.
AppState transition(AppState state, AppEvent event);

enum class CheckpointMode { UserInitiated, Periodic, AppInitiated };

std::string_view checkpoint_mode_name(CheckpointMode m);

struct CheckpointPolicy {
  CheckpointMode mode = CheckpointMode::Periodic;
  std::optional<VDur> period;  // present iff mode == Periodic
};

// Application Submission Request: VM templates plus checkpointer
// configuration, as carried by POST /coordinators bodies.
struct AppSubmissionRequest {
  std::vector<VmTemplate> vm_templates;
  CheckpointPolicy checkpoint_policy;
  WorkloadSpec app_spec;
  std::string backend_id;
  std::uint64_t seed = 0;
  std::string health_hook = "process_alive";
  // When false the record is created but the start pipeline is not run;
  // an uploaded checkpoint plus a restart request brings it up (the
  // cloning/migration path).
  bool autostart = true;
};

AppSubmissionRequest asr_from_json(const Json& body);
Json asr_to_json(const AppSubmissionRequest& asr);

// Normalizes the request (absent policy defaults to periodic checkpoints)
// and checks its invariants. backend_known answers whether a backend id is
// registered with the service. Throws InvalidAsr.
AppSubmissionRequest validate_asr(AppSubmissionRequest asr,
                                  const std::function<bool(const std::string&)>& backend_known,
                                  VDur default_period);

struct ApplicationRecord {
  std::uint64_t app_id = 0;
  AppState state = AppState::CREATING;
  AppSubmissionRequest asr;
  std::optional<VirtualCluster> cluster;
  std::uint64_t event_seq = 0;
  VTime created_at = 0;
};

}  // namespace cacs

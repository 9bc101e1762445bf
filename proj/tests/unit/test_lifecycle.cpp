#include "doctest.h"

#include <map>
#include <set>
#include <utility>
#include <vector>

#include "cacs/errors.hpp"
#include "cacs/lifecycle.hpp"

using namespace cacs;

namespace {

using Edge = std::pair<AppState, AppEvent>;

// Independent enumeration of the legal edge set, kept as a flat list so the
// state machine cannot drift without this test noticing.
std::map<Edge, AppState> expected_edges() {
  std::map<Edge, AppState> m;
  m[{AppState::CREATING, AppEvent::VmsAllocated}] = AppState::PROVISION;
  m[{AppState::PROVISION, AppEvent::ProvisionDone}] = AppState::READY;
  m[{AppState::READY, AppEvent::StartCommand}] = AppState::RUNNING;
  m[{AppState::RUNNING, AppEvent::RecoveryBegun}] = AppState::CREATING;
  m[{AppState::RUNNING, AppEvent::RecoveryDone}] = AppState::RUNNING;
  for (AppState s : kAllStates) {
    if (s != AppState::TERMINATING) m[{s, AppEvent::FatalError}] = AppState::ERROR;
    m[{s, AppEvent::DeleteRequest}] = AppState::TERMINATING;
  }
  return m;
}

}  // namespace

TEST_CASE("transition table matches the edge set over the full 6x7 product") {
  const auto edges = expected_edges();
  int legal = 0;
  for (AppState s : kAllStates) {
    for (AppEvent e : kAllEvents) {
      auto it = edges.find({s, e});
      auto got = try_transition(s, e);
      CAPTURE(app_state_name(s));
      CAPTURE(app_event_name(e));
      if (it != edges.end()) {
        REQUIRE(got.has_value());
        CHECK(*got == it->second);
        ++legal;
      } else {
        CHECK_FALSE(got.has_value());
      }
    }
  }
  CHECK(legal == 5 + 5 + 6);
}

TEST_CASE("transition throws IllegalTransition exactly off the edge set") {
  CHECK(transition(AppState::CREATING, AppEvent::VmsAllocated) == AppState::PROVISION);
  CHECK(transition(AppState::READY, AppEvent::StartCommand) == AppState::RUNNING);
  CHECK(transition(AppState::ERROR, AppEvent::DeleteRequest) == AppState::TERMINATING);
  try {
    transition(AppState::TERMINATING, AppEvent::StartCommand);
    FAIL("expected IllegalTransition");
  } catch (const CacsError& e) {
    CHECK(e.code() == ErrorCode::IllegalTransition);
  }
}

TEST_CASE("RUNNING is unreachable when either bring-up phase is removed") {
  auto reachable_avoiding = [](AppState forbidden) {
    std::set<AppState> seen{AppState::CREATING};
    std::vector<AppState> frontier{AppState::CREATING};
    while (!frontier.empty()) {
      AppState s = frontier.back();
      frontier.pop_back();
      for (AppEvent e : kAllEvents) {
        auto next = try_transition(s, e);
        if (!next || *next == forbidden) continue;
        if (seen.insert(*next).second) frontier.push_back(*next);
      }
    }
    return seen;
  };
  CHECK_FALSE(reachable_avoiding(AppState::PROVISION).contains(AppState::RUNNING));
  CHECK_FALSE(reachable_avoiding(AppState::READY).contains(AppState::RUNNING));
  // Sanity: with nothing removed RUNNING is reachable.
  CHECK(reachable_avoiding(AppState::ERROR).contains(AppState::RUNNING));
}

TEST_CASE("DeleteRequest reaches TERMINATING in one step from every state") {
  for (AppState s : kAllStates) {
    CHECK(transition(s, AppEvent::DeleteRequest) == AppState::TERMINATING);
  }
}

TEST_CASE("state names round-trip through parse") {
  for (AppState s : kAllStates) {
    CHECK(parse_app_state(std::string(app_state_name(s))) == s);
  }
  CHECK_THROWS_AS(parse_app_state("BOOTED"), CacsError);
}

namespace {

AppSubmissionRequest sample_asr(std::size_t vms = 4) {
  AppSubmissionRequest asr;
  asr.backend_id = "snooze";
  for (std::size_t i = 0; i < vms; ++i) asr.vm_templates.push_back({2, 2048, "debian"});
  asr.checkpoint_policy = {CheckpointMode::Periodic, vseconds(60)};
  asr.app_spec = {WorkloadKind::RingSum, 10, 64, 4096};
  asr.seed = 7;
  return asr;
}

bool backend_known(const std::string& id) { return id == "snooze" || id == "openstack"; }

}  // namespace

TEST_CASE("ASR round-trips through JSON") {
  AppSubmissionRequest asr = sample_asr();
  asr.autostart = false;
  asr.health_hook = "progress_within(5)";
  Json j = asr_to_json(asr);
  AppSubmissionRequest back = asr_from_json(j);
  CHECK(back.backend_id == asr.backend_id);
  REQUIRE(back.vm_templates.size() == asr.vm_templates.size());
  CHECK(back.vm_templates[0].vcpus == 2);
  CHECK(back.vm_templates[0].memory_mb == 2048);
  CHECK(back.vm_templates[0].image_name == "debian");
  CHECK(back.checkpoint_policy.mode == CheckpointMode::Periodic);
  REQUIRE(back.checkpoint_policy.period.has_value());
  CHECK(*back.checkpoint_policy.period == vseconds(60));
  CHECK(back.app_spec.kind == WorkloadKind::RingSum);
  CHECK(back.app_spec.iterations == 10);
  CHECK(back.seed == 7);
  CHECK(back.health_hook == "progress_within(5)");
  CHECK_FALSE(back.autostart);
}

TEST_CASE("asr_from_json rejects non-object bodies") {
  try {
    asr_from_json(Json::array());
    FAIL("expected InvalidAsr");
  } catch (const CacsError& e) {
    CHECK(e.code() == ErrorCode::InvalidAsr);
  }
}

TEST_CASE("validate_asr accepts a periodic 4-VM request") {
  AppSubmissionRequest ok = validate_asr(sample_asr(), backend_known, vseconds(60));
  CHECK(ok.vm_templates.size() == 4);
  REQUIRE(ok.checkpoint_policy.period.has_value());
  CHECK(*ok.checkpoint_policy.period == vseconds(60));
}

TEST_CASE("validate_asr fills the default period when the policy omits it") {
  AppSubmissionRequest asr = sample_asr();
  asr.checkpoint_policy.period.reset();
  AppSubmissionRequest ok = validate_asr(asr, backend_known, vseconds(60));
  REQUIRE(ok.checkpoint_policy.period.has_value());
  CHECK(*ok.checkpoint_policy.period == vseconds(60));
}

TEST_CASE("validate_asr rejections carry InvalidAsr") {
  auto expect_invalid = [](AppSubmissionRequest asr) {
    try {
      validate_asr(std::move(asr), backend_known, vseconds(60));
      FAIL("expected InvalidAsr");
    } catch (const CacsError& e) {
      CHECK(e.code() == ErrorCode::InvalidAsr);
    }
  };

  AppSubmissionRequest no_templates = sample_asr();
  no_templates.vm_templates.clear();
  expect_invalid(no_templates);

  AppSubmissionRequest bad_period = sample_asr();
  bad_period.checkpoint_policy.period = vseconds(-1);
  expect_invalid(bad_period);

  AppSubmissionRequest bad_backend = sample_asr();
  bad_backend.backend_id = "nimbus";
  expect_invalid(bad_backend);

  AppSubmissionRequest stray_period = sample_asr();
  stray_period.checkpoint_policy.mode = CheckpointMode::UserInitiated;
  expect_invalid(stray_period);

  AppSubmissionRequest lone_ring = sample_asr(1);
  expect_invalid(lone_ring);

  AppSubmissionRequest counter_pair = sample_asr(2);
  counter_pair.app_spec.kind = WorkloadKind::SingleCounter;
  expect_invalid(counter_pair);

  AppSubmissionRequest no_iterations = sample_asr();
  no_iterations.app_spec.iterations = 0;
  expect_invalid(no_iterations);
}

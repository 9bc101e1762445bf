#include "cacs/appmgr.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cacs/errors.hpp"
#include "cacs/util.hpp"
#include "doctest.h"
#include "reference_workload.hpp"

using namespace cacs;

namespace {

constexpr VTime kSec = 1'000'000;

Config make_cfg(const std::function<void(Config&)>& tweak) {
  Config cfg = Config::defaults();
  if (tweak) tweak(cfg);
  return cfg;
}

// One full service stack on a shared clock. Two of these make a two-service
// world for clone/migrate tests.
struct Stack {
  Config cfg;
  CloudManager clouds;
  ProvisionManager prov;
  CheckpointManager ckpts;
  MonitoringManager monitor;
  CoordinatorsDb db;
  AppManager mgr;

  Stack(EventQueue& clock, TraceLog& trace, NetMeter& net,
        const std::function<void(Config&)>& tweak = {})
      : cfg(make_cfg(tweak)),
        clouds(cfg, clock, trace, net, 7),
        prov(clouds, clock, trace, net, cfg.service.exec_bytes_per_s),
        ckpts(cfg.service, clock, trace, std::make_unique<MemObjectStore>()),
        monitor(clock, trace, cfg.service),
        db(trace, "", &clock),
        mgr(cfg, clock, trace, clouds, prov, ckpts, monitor, db) {}
};

struct Rig {
  EventQueue clock;
  TraceLog trace;
  NetMeter net;
  Stack s;

  explicit Rig(const std::function<void(Config&)>& tweak = {}) : s(clock, trace, net, tweak) {}

  AppState state(std::uint64_t id) const { return s.db.record(id).state; }

  bool run_until(const std::function<bool()>& pred, VTime limit = 4000 * kSec) {
    return clock.advance_until(pred, limit);
  }

  void drain() {
    while (auto t = clock.next_time()) clock.advance(*t);
  }
};

Json asr_body(std::size_t n, std::uint64_t iterations, const std::string& backend = "snooze-sim",
              std::uint64_t seed = 42) {
  Json templates = Json::array();
  for (std::size_t i = 0; i < n; ++i) templates.push_back({{"vcpus", 1}});
  return Json{{"backend", backend},
              {"vm_templates", templates},
              {"checkpoint_policy", {{"mode", "user"}}},
              {"app_spec",
               {{"kind", n == 1 ? "single_counter" : "ring_sum"}, {"iterations", iterations}}},
              {"seed", seed}};
}

std::uint64_t launch(Rig& rig, const Json& body) {
  const std::uint64_t id = rig.s.mgr.submit(body);
  rig.s.mgr.start_pipeline(id);
  REQUIRE(rig.run_until([&] { return rig.state(id) == AppState::RUNNING; }, 300 * kSec));
  return id;
}

std::uint64_t oracle_final(const Json& body) {
  const std::size_t n = body.at("vm_templates").size();
  const std::uint64_t iters = body.at("app_spec").at("iterations").get<std::uint64_t>();
  const std::uint64_t seed = body.at("seed").get<std::uint64_t>();
  return n == 1 ? reference::single_counter(seed, iters) : reference::ring_sum(seed, n, iters);
}

TEST_CASE("pipeline walks the lifecycle on the configured schedule") {
  Rig rig;
  bool done_flag = false;
  bool done_value = false;
  const std::uint64_t id = rig.s.mgr.submit(asr_body(4, 10));
  CHECK(id == 1);
  CHECK(rig.state(id) == AppState::CREATING);
  CHECK_FALSE(rig.s.db.record(id).cluster.has_value());

  rig.s.mgr.start_pipeline(id, [&](bool ok) {
    done_flag = true;
    done_value = ok;
  });

  // Boot 10s, one provisioning wave 2s, start command 1s.
  rig.clock.advance(10 * kSec - 1);
  CHECK(rig.state(id) == AppState::CREATING);
  rig.clock.advance(10 * kSec);
  CHECK(rig.state(id) == AppState::PROVISION);
  REQUIRE(rig.s.db.record(id).cluster.has_value());
  CHECK(rig.s.db.record(id).cluster->vm_ids.size() == 4);

  rig.clock.advance(12 * kSec - 1);
  CHECK(rig.state(id) == AppState::PROVISION);
  rig.clock.advance(12 * kSec);
  CHECK(rig.state(id) == AppState::READY);
  CHECK_FALSE(done_flag);

  rig.clock.advance(13 * kSec);
  CHECK(rig.state(id) == AppState::RUNNING);
  CHECK(done_flag);
  CHECK(done_value);
  CHECK(rig.s.mgr.coordinator_id(id) == 1);
  REQUIRE(rig.s.mgr.runtime(id) != nullptr);
  CHECK_FALSE(rig.s.mgr.runtime(id)->stopped());
  CHECK(rig.s.monitor.watching(id));
  CHECK(rig.s.db.record(id).event_seq == 3);

  // Each VM got the full provisioning script: two internal actions plus the
  // checkpoint-mode line.
  for (const std::string& vm : rig.s.db.record(id).cluster->vm_ids)
    CHECK(rig.s.prov.actions_applied(vm) == 3);
  const auto audit = rig.s.clouds.backend("snooze-sim").audit();
  CHECK(audit.consistent);
  CHECK(audit.up == 4);
}

TEST_CASE("submitted app computes the sequential oracle's answer") {
  Rig rig;
  const Json body = asr_body(4, 10, "snooze-sim", 7);
  const std::uint64_t id = launch(rig, body);
  REQUIRE(rig.run_until([&] { return rig.s.mgr.runtime(id)->completed(); }));
  // 13s of pipeline plus 10 rounds of 4 hops at 50 ms each.
  CHECK(rig.clock.now() == 15 * kSec);
  CHECK(rig.s.mgr.runtime(id)->final_output() == oracle_final(body));
  CHECK(rig.s.mgr.runtime(id)->iterations_done() == 10);

  const Json desc = rig.s.mgr.describe(id);
  CHECK(desc.at("state") == "RUNNING");
  CHECK(desc.at("completed") == true);
  CHECK(desc.at("coordinator_id") == 1);
  CHECK(desc.at("vm_ids").size() == 4);
}

TEST_CASE("insufficient capacity lands in ERROR without leaking slots") {
  Rig rig([](Config& c) {
    BackendProfile tiny = default_snooze_profile();
    tiny.name = "tiny";
    tiny.capacity = 2;
    c.backends["tiny"] = tiny;
  });
  bool done_value = true;
  const std::uint64_t id = rig.s.mgr.submit(asr_body(3, 5, "tiny"));
  rig.s.mgr.start_pipeline(id, [&](bool ok) { done_value = ok; });
  CHECK_FALSE(done_value);
  CHECK(rig.state(id) == AppState::ERROR);
  CHECK_FALSE(rig.s.db.record(id).cluster.has_value());
  CHECK(rig.s.clouds.backend("tiny").idle_count() == 2);
  CHECK(rig.s.clouds.backend("tiny").audit().consistent);

  // The record survives for inspection; delete clears it.
  CHECK(rig.s.mgr.describe(id).at("state") == "ERROR");
  rig.s.mgr.terminate(id);
  CHECK_THROWS_AS((void)rig.s.mgr.describe(id), CacsError);
}

TEST_CASE("bad submissions are rejected with no record left behind") {
  Rig rig;
  auto code_of = [&](const Json& body) {
    try {
      (void)rig.s.mgr.submit(body);
      return ErrorCode::Internal;
    } catch (const CacsError& e) {
      return e.code();
    }
  };
  CHECK(code_of(asr_body(2, 5, "nimbus-9")) == ErrorCode::InvalidAsr);

  Json no_vms = asr_body(2, 5);
  no_vms["vm_templates"] = Json::array();
  CHECK(code_of(no_vms) == ErrorCode::InvalidAsr);

  Json bad_hook = asr_body(2, 5);
  bad_hook["health_hook"] = "pray";
  CHECK(code_of(bad_hook) == ErrorCode::InvalidAsr);

  CHECK(rig.s.db.size() == 0);
}

TEST_CASE("pipeline preconditions") {
  Rig rig;
  const std::uint64_t id = launch(rig, asr_body(2, 5));
  CHECK_THROWS_AS(rig.s.mgr.start_pipeline(id), CacsError);  // already RUNNING
  CHECK_THROWS_AS(rig.s.mgr.start_pipeline(999), CacsError);
}

TEST_CASE("user checkpoint then rollback reconverges on the same answer") {
  Rig rig;
  const Json body = asr_body(4, 10, "snooze-sim", 99);
  const std::uint64_t id = launch(rig, body);
  REQUIRE(rig.run_until([&] { return rig.s.mgr.runtime(id)->iterations_done() >= 4; }));

  const std::uint64_t gen = rig.s.mgr.checkpoint_now(id);
  CHECK(gen == 1);
  CHECK(rig.s.ckpts.list(id).size() == 1);
  const auto vms_before = rig.s.db.record(id).cluster->vm_ids;

  REQUIRE(rig.run_until([&] { return rig.s.mgr.runtime(id)->completed(); }));
  const std::uint64_t final_first = rig.s.mgr.runtime(id)->final_output();
  CHECK(final_first == oracle_final(body));

  rig.s.mgr.restart_from(id, gen);
  CHECK(rig.state(id) == AppState::RUNNING);
  CHECK(rig.s.mgr.runtime(id)->iterations_done() == 4);  // rolled back
  REQUIRE(rig.run_until([&] { return rig.s.mgr.runtime(id)->completed(); }));
  CHECK(rig.s.mgr.runtime(id)->final_output() == final_first);
  CHECK(rig.s.mgr.coordinator_id(id) == 2);
  CHECK(rig.s.db.record(id).cluster->vm_ids == vms_before);  // in place
}

TEST_CASE("restart without a generation picks the newest checkpoint") {
  Rig rig;
  const std::uint64_t id = launch(rig, asr_body(4, 20));
  REQUIRE(rig.run_until([&] { return rig.s.mgr.runtime(id)->iterations_done() >= 3; }));
  const std::uint64_t at_gen1 = rig.s.mgr.runtime(id)->iterations_done();
  rig.s.mgr.checkpoint_now(id);
  REQUIRE(rig.run_until([&] { return rig.s.mgr.runtime(id)->iterations_done() >= at_gen1 + 5; }));
  const std::uint64_t at_gen2 = rig.s.mgr.runtime(id)->iterations_done();
  rig.s.mgr.checkpoint_now(id);

  REQUIRE(rig.run_until([&] { return rig.s.mgr.runtime(id)->completed(); }));
  rig.s.mgr.restart_from(id, std::nullopt);
  CHECK(rig.s.mgr.runtime(id)->iterations_done() == at_gen2);

  rig.s.mgr.restart_from(id, 1);
  CHECK(rig.s.mgr.runtime(id)->iterations_done() == at_gen1);
}

TEST_CASE("restart and checkpoint guard rails") {
  Rig rig;
  const std::uint64_t id = launch(rig, asr_body(2, 50));
  // No checkpoints yet.
  CHECK_THROWS_AS(rig.s.mgr.restart_from(id, std::nullopt), CacsError);
  // Unknown generation.
  rig.s.mgr.checkpoint_now(id);
  CHECK_THROWS_AS(rig.s.mgr.restart_from(id, 42), CacsError);
  // A second checkpoint while the first write is still in flight.
  REQUIRE(rig.run_until([&] { return !rig.s.mgr.runtime(id)->frozen(); }));
  rig.s.mgr.checkpoint_now(id);
  CHECK(rig.s.mgr.runtime(id)->frozen());
  CHECK_THROWS_AS(rig.s.mgr.checkpoint_now(id), CacsError);

  // Checkpoint needs a RUNNING record.
  Json parked = asr_body(2, 5);
  parked["autostart"] = false;
  const std::uint64_t pid = rig.s.mgr.submit(parked);
  rig.s.mgr.start_pipeline(pid);
  REQUIRE(rig.run_until([&] { return rig.state(pid) == AppState::READY; }));
  CHECK_THROWS_AS(rig.s.mgr.checkpoint_now(pid), CacsError);
}

TEST_CASE("checkpoint, kill, restart is exact for every cut point") {
  const Json body = asr_body(4, 6, "snooze-sim", 1234);
  const std::uint64_t expect = oracle_final(body);
  for (std::uint64_t k = 1; k <= 5; ++k) {
    Rig rig;
    const std::uint64_t id = launch(rig, body);
    REQUIRE(rig.run_until([&] { return rig.s.mgr.runtime(id)->iterations_done() >= k; }));
    const std::uint64_t gen = rig.s.mgr.checkpoint_now(id);
    rig.s.mgr.runtime(id)->stop();  // total daemon loss
    rig.s.mgr.restart_from(id, gen);
    REQUIRE(rig.run_until([&] { return rig.s.mgr.runtime(id)->completed(); }));
    CHECK(rig.s.mgr.runtime(id)->final_output() == expect);
  }
}

TEST_CASE("vm failure on a notifying backend replaces exactly the dead vm") {
  Rig rig;
  const Json body = asr_body(4, 400, "snooze-sim", 5);
  const std::uint64_t id = launch(rig, body);
  REQUIRE(rig.run_until([&] { return rig.s.mgr.runtime(id)->iterations_done() >= 50; }));
  rig.s.mgr.checkpoint_now(id);
  rig.clock.run_for(5 * kSec);  // replication must beat the dying VM's local store

  const auto vms_before = rig.s.db.record(id).cluster->vm_ids;
  const auto seq_before = rig.s.db.record(id).event_seq;
  const VTime t_fail = rig.clock.now();
  rig.s.clouds.backend("snooze-sim").inject_failure(vms_before[2]);

  // The push notification reaches the monitor without waiting for a
  // heartbeat round, so recovery begins at the injection instant.
  REQUIRE(rig.run_until([&] { return rig.s.mgr.recovering(id); }, t_fail + 1));
  CHECK(rig.state(id) == AppState::CREATING);
  CHECK_FALSE(rig.s.db.record(id).cluster.has_value());

  REQUIRE(rig.run_until([&] { return rig.state(id) == AppState::RUNNING; }));
  REQUIRE(rig.run_until([&] { return !rig.s.mgr.recovering(id); }));
  const VTime t_recovered = rig.clock.now();
  // Replacement boot (10s) + provisioning wave (2s) + image fetch.
  CHECK(t_recovered - t_fail >= 12 * kSec);
  CHECK(t_recovered - t_fail <= 13 * kSec);

  const auto vms_after = rig.s.db.record(id).cluster->vm_ids;
  REQUIRE(vms_after.size() == 4);
  CHECK(vms_after[0] == vms_before[0]);
  CHECK(vms_after[1] == vms_before[1]);
  CHECK(vms_after[2] != vms_before[2]);
  CHECK(vms_after[3] == vms_before[3]);
  CHECK(rig.s.prov.actions_applied(vms_after[2]) == 3);
  CHECK(rig.s.mgr.coordinator_id(id) == 2);
  CHECK(rig.s.db.record(id).event_seq > seq_before);
  CHECK(rig.s.monitor.watching(id));

  const auto audit = rig.s.clouds.backend("snooze-sim").audit();
  CHECK(audit.consistent);
  CHECK(audit.up == 4);
  CHECK(audit.unreachable == 0);  // failed VM repaired back into the pool

  REQUIRE(rig.run_until([&] { return rig.s.mgr.runtime(id)->completed(); }));
  CHECK(rig.s.mgr.runtime(id)->final_output() == oracle_final(body));
}

TEST_CASE("vm failure on a heartbeat-only backend is found within period plus roundtrip") {
  Rig rig;
  const Json body = asr_body(4, 600, "openstack-sim", 11);
  const std::uint64_t id = rig.s.mgr.submit(body);
  rig.s.mgr.start_pipeline(id);
  REQUIRE(rig.run_until([&] { return rig.state(id) == AppState::RUNNING; }, 600 * kSec));
  REQUIRE(rig.run_until([&] { return rig.s.mgr.runtime(id)->iterations_done() >= 40; }));
  rig.s.mgr.checkpoint_now(id);
  rig.clock.run_for(5 * kSec);  // replication must beat the dying VM's local store

  const auto vms = rig.s.db.record(id).cluster->vm_ids;
  const VTime t_fail = rig.clock.now();
  rig.s.clouds.backend("openstack-sim").inject_failure(vms[1]);
  REQUIRE(rig.run_until([&] { return rig.s.mgr.recovering(id); }, t_fail + 60 * kSec));
  // Next round starts at most one period after the failure; the verdict
  // arrives one roundtrip later (4 VMs: depth 2, 1s links, 3s probe
  // timeouts for the dead child).
  CHECK(rig.clock.now() - t_fail <= 25 * kSec);

  REQUIRE(rig.run_until([&] { return !rig.s.mgr.recovering(id); }, rig.clock.now() + 300 * kSec));
  REQUIRE(rig.run_until([&] { return rig.s.mgr.runtime(id)->completed(); }));
  CHECK(rig.s.mgr.runtime(id)->final_output() == oracle_final(body));
}

TEST_CASE("application failure restarts in place on the same cluster") {
  Rig rig;
  const Json body = asr_body(4, 400, "snooze-sim", 21);
  const std::uint64_t id = launch(rig, body);
  REQUIRE(rig.run_until([&] { return rig.s.mgr.runtime(id)->iterations_done() >= 60; }));
  rig.s.mgr.checkpoint_now(id);
  REQUIRE(rig.run_until([&] { return !rig.s.mgr.runtime(id)->frozen(); }));

  const auto vms_before = rig.s.db.record(id).cluster->vm_ids;
  const auto audit_before = rig.s.clouds.backend("snooze-sim").audit();
  const VTime t_fail = rig.clock.now();
  rig.s.mgr.runtime(id)->set_health(2, false);

  // In-place recovery from local images is instantaneous, so wait for its
  // durable marker: the fresh coordinator incarnation.
  REQUIRE(rig.run_until([&] { return rig.s.mgr.coordinator_id(id) == 2; }, t_fail + 30 * kSec));
  CHECK(rig.clock.now() - t_fail <= 15 * kSec);  // one period + one roundtrip
  CHECK_FALSE(rig.s.mgr.recovering(id));

  CHECK(rig.state(id) == AppState::RUNNING);
  CHECK(rig.s.db.record(id).cluster->vm_ids == vms_before);
  CHECK(rig.s.mgr.coordinator_id(id) == 2);
  const auto audit_after = rig.s.clouds.backend("snooze-sim").audit();
  CHECK(audit_after.up == audit_before.up);
  CHECK(audit_after.idle == audit_before.idle);

  REQUIRE(rig.run_until([&] { return rig.s.mgr.runtime(id)->completed(); }));
  CHECK(rig.s.mgr.runtime(id)->final_output() == oracle_final(body));
}

TEST_CASE("failure with no checkpoint parks the app in ERROR and frees the cluster") {
  Rig rig;
  const std::uint64_t id = launch(rig, asr_body(4, 400));
  const auto vms = rig.s.db.record(id).cluster->vm_ids;
  rig.s.clouds.backend("snooze-sim").inject_failure(vms[0]);
  REQUIRE(rig.run_until([&] { return rig.state(id) == AppState::ERROR; }, rig.clock.now() + 5));

  CHECK(rig.s.mgr.runtime(id) == nullptr);
  CHECK_FALSE(rig.s.monitor.watching(id));
  CHECK_FALSE(rig.s.db.record(id).cluster.has_value());
  rig.drain();
  const auto audit = rig.s.clouds.backend("snooze-sim").audit();
  CHECK(audit.consistent);
  CHECK(audit.idle == audit.capacity);

  rig.s.mgr.terminate(id);
  CHECK_THROWS_AS(rig.s.mgr.terminate(id), CacsError);
}

TEST_CASE("progress hook tolerates its window then forces an in-place recovery") {
  // A pathologically slow local disk makes one checkpoint freeze the app for
  // over a minute, long enough for progress_within(2) to trip but harmless
  // for the default process hook.
  auto slow_disk = [](Config& c) { c.service.local_write_bandwidth_bps = 1.0; };

  Json guarded = asr_body(2, 200);
  guarded["health_hook"] = "progress_within(2)";
  Rig rig(slow_disk);
  const std::uint64_t id = launch(rig, guarded);
  REQUIRE(rig.run_until([&] { return rig.s.mgr.runtime(id)->iterations_done() >= 10; }));
  rig.s.mgr.checkpoint_now(id);
  CHECK(rig.s.mgr.runtime(id)->frozen());

  REQUIRE(rig.run_until([&] { return rig.s.mgr.coordinator_id(id) == 2; },
                        rig.clock.now() + 120 * kSec));
  CHECK_FALSE(rig.s.mgr.recovering(id));
  REQUIRE(rig.run_until([&] { return rig.s.mgr.runtime(id)->completed(); }, 4000 * kSec));
  CHECK(rig.s.mgr.runtime(id)->final_output() == oracle_final(guarded));

  // Same freeze under the default hook: no recovery, the app just resumes.
  Rig calm(slow_disk);
  const std::uint64_t cid = launch(calm, asr_body(2, 200));
  REQUIRE(calm.run_until([&] { return calm.s.mgr.runtime(cid)->iterations_done() >= 10; }));
  calm.s.mgr.checkpoint_now(cid);
  REQUIRE(calm.run_until([&] { return calm.s.mgr.runtime(cid)->completed(); }, 4000 * kSec));
  CHECK(calm.s.mgr.coordinator_id(cid) == 1);
}

TEST_CASE("a completed app keeps reporting healthy") {
  Rig rig;
  Json body = asr_body(1, 3);
  body["health_hook"] = "progress_within(1)";
  const std::uint64_t id = launch(rig, body);
  REQUIRE(rig.run_until([&] { return rig.s.mgr.runtime(id)->completed(); }));
  const VTime done_at = rig.clock.now();
  rig.clock.advance(done_at + 100 * kSec);
  CHECK(rig.state(id) == AppState::RUNNING);
  CHECK(rig.s.mgr.coordinator_id(id) == 1);
  CHECK(rig.s.monitor.rounds_run(id) >= 9);
}

TEST_CASE("terminate deletes record, checkpoints and cluster in that order") {
  Rig rig;
  const std::uint64_t id = launch(rig, asr_body(4, 200));
  REQUIRE(rig.run_until([&] { return rig.s.mgr.runtime(id)->iterations_done() >= 10; }));
  rig.s.mgr.checkpoint_now(id);
  REQUIRE(rig.run_until([&] { return !rig.s.mgr.runtime(id)->frozen(); }));
  rig.clock.run_for(10 * kSec);  // let replication land remotely
  CHECK(rig.s.ckpts.remote().bytes_used() > 0);

  rig.s.mgr.terminate(id);
  CHECK_THROWS_AS((void)rig.s.db.record(id), CacsError);
  CHECK(rig.s.ckpts.list(id).empty());
  CHECK(rig.s.ckpts.remote().bytes_used() == 0);
  CHECK(rig.s.ckpts.local_bytes_used() == 0);
  CHECK_FALSE(rig.s.monitor.watching(id));
  rig.drain();
  const auto audit = rig.s.clouds.backend("snooze-sim").audit();
  CHECK(audit.consistent);
  CHECK(audit.idle == audit.capacity);

  const auto& entries = rig.trace.entries();
  auto index_of = [&](const std::string& needle) {
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (entries[i].text.find(needle) != std::string::npos) return i;
    return entries.size();
  };
  const std::size_t s1 = index_of("terminate step 1");
  const std::size_t s2 = index_of("terminate step 2");
  const std::size_t s3 = index_of("terminate step 3");
  REQUIRE(s3 < entries.size());
  CHECK(s1 < s2);
  CHECK(s2 < s3);

  CHECK_THROWS_AS(rig.s.mgr.terminate(id), CacsError);
}

TEST_CASE("terminate mid-boot cancels the pending claim") {
  Rig rig;
  int done_calls = 0;
  bool done_ok = true;
  const std::uint64_t id = rig.s.mgr.submit(asr_body(8, 5));
  rig.s.mgr.start_pipeline(id, [&](bool ok) {
    ++done_calls;
    done_ok = ok;
  });
  rig.clock.run_for(3 * kSec);
  CHECK(rig.state(id) == AppState::CREATING);

  rig.s.mgr.terminate(id);
  // Superseding the pipeline reports failure to its caller exactly once.
  CHECK(done_calls == 1);
  CHECK_FALSE(done_ok);
  CHECK(rig.s.db.size() == 0);
  rig.drain();
  CHECK(done_calls == 1);
  const auto audit = rig.s.clouds.backend("snooze-sim").audit();
  CHECK(audit.consistent);
  CHECK(audit.idle == audit.capacity);
  CHECK(rig.net.open_flows() == 0);
}

TEST_CASE("clone carries a checkpoint to a second service and starts it there") {
  EventQueue clock;
  TraceLog trace;
  NetMeter net;
  Stack source(clock, trace, net);
  Stack target(clock, trace, net);

  struct TargetClient : ApiClient {
    Stack& t;
    explicit TargetClient(Stack& s) : t(s) {}
    ApiResponse call(const ApiRequest& req) override {
      // Stand-in for the REST gateway: only the three routes cloning uses.
      if (req.method == "POST" && req.path == "/coordinators") {
        const std::uint64_t id = t.mgr.submit(*req.body);
        t.mgr.start_pipeline(id);
        return {202, Json{{"id", id}}};
      }
      if (req.method == "POST" && req.body && req.body->contains("data")) {
        const std::uint64_t id = std::stoull(req.path.substr(14));
        auto set = t.ckpts.upload_image(id, req.body->at("vm_index").get<std::uint32_t>(),
                                        req.body->at("count").get<std::uint32_t>(),
                                        base64_decode(req.body->at("data").get<std::string>()));
        Json out{{"complete", set.has_value()}};
        if (set) out["id"] = set->generation;
        return {200, out};
      }
      if (req.method == "POST" && req.path.find("/checkpoints/") != std::string::npos) {
        const std::uint64_t id = std::stoull(req.path.substr(14));
        const std::uint64_t gen = std::stoull(req.path.substr(req.path.rfind('/') + 1));
        t.mgr.restart_from(id, gen);
        return {202, Json::object()};
      }
      return {404, Json::object()};
    }
  } client(target);

  const Json body = asr_body(2, 30, "snooze-sim", 77);
  const std::uint64_t src = source.mgr.submit(body);
  source.mgr.start_pipeline(src);
  REQUIRE(clock.advance_until([&] { return source.db.record(src).state == AppState::RUNNING; },
                              60 * kSec));
  REQUIRE(clock.advance_until([&] { return source.mgr.runtime(src)->iterations_done() >= 8; },
                              120 * kSec));
  const std::uint64_t gen = source.mgr.checkpoint_now(src);
  const std::uint64_t at_cut = source.mgr.runtime(src)->iterations_done();

  const std::uint64_t dst = source.mgr.clone_to(src, client, "snooze-sim", gen);
  CHECK(dst == 1);
  // The restart request landed before the target cluster finished booting
  // and must wait for READY instead of failing.
  CHECK(target.db.record(dst).state == AppState::CREATING);

  REQUIRE(clock.advance_until([&] { return target.db.record(dst).state == AppState::RUNNING; },
                              clock.now() + 60 * kSec));
  CHECK(target.mgr.runtime(dst)->iterations_done() == at_cut);
  REQUIRE(clock.advance_until([&] { return target.mgr.runtime(dst)->completed(); },
                              clock.now() + 120 * kSec));
  CHECK(target.mgr.runtime(dst)->final_output() == reference::ring_sum(77, 2, 30));

  // The source kept running the whole time.
  CHECK(source.db.record(src).state == AppState::RUNNING);
  CHECK(source.clouds.backend("snooze-sim").audit().up == 2);
}

TEST_CASE("migrate is clone plus source termination") {
  EventQueue clock;
  TraceLog trace;
  NetMeter net;
  Stack source(clock, trace, net);
  Stack target(clock, trace, net);

  struct TargetClient : ApiClient {
    Stack& t;
    explicit TargetClient(Stack& s) : t(s) {}
    ApiResponse call(const ApiRequest& req) override {
      if (req.method == "POST" && req.path == "/coordinators") {
        const std::uint64_t id = t.mgr.submit(*req.body);
        t.mgr.start_pipeline(id);
        return {202, Json{{"id", id}}};
      }
      if (req.method == "POST" && req.body && req.body->contains("data")) {
        const std::uint64_t id = std::stoull(req.path.substr(14));
        auto set = t.ckpts.upload_image(id, req.body->at("vm_index").get<std::uint32_t>(),
                                        req.body->at("count").get<std::uint32_t>(),
                                        base64_decode(req.body->at("data").get<std::string>()));
        Json out = Json::object();
        if (set) out["id"] = set->generation;
        return {200, out};
      }
      if (req.method == "POST" && req.path.find("/checkpoints/") != std::string::npos) {
        const std::uint64_t id = std::stoull(req.path.substr(14));
        const std::uint64_t gen = std::stoull(req.path.substr(req.path.rfind('/') + 1));
        t.mgr.restart_from(id, gen);
        return {202, Json::object()};
      }
      return {404, Json::object()};
    }
  } client(target);

  const Json body = asr_body(4, 40, "snooze-sim", 1001);
  const std::uint64_t src = source.mgr.submit(body);
  source.mgr.start_pipeline(src);
  REQUIRE(clock.advance_until([&] { return source.db.record(src).state == AppState::RUNNING; },
                              60 * kSec));
  REQUIRE(clock.advance_until([&] { return source.mgr.runtime(src)->iterations_done() >= 15; },
                              120 * kSec));

  // No generation given: migrate takes a fresh stop-and-copy cut.
  const std::uint64_t dst = source.mgr.migrate_to(src, client, "snooze-sim", std::nullopt);
  CHECK_THROWS_AS((void)source.db.record(src), CacsError);

  REQUIRE(clock.advance_until([&] {
    return target.db.contains(dst) && target.db.record(dst).state == AppState::RUNNING;
  }, clock.now() + 90 * kSec));
  CHECK(target.mgr.runtime(dst)->iterations_done() >= 15);
  REQUIRE(clock.advance_until([&] { return target.mgr.runtime(dst)->completed(); },
                              clock.now() + 120 * kSec));
  CHECK(target.mgr.runtime(dst)->final_output() == reference::ring_sum(1001, 4, 40));

  clock.run_for(30 * kSec);  // the target stays watched, so the queue never empties
  const auto audit = source.clouds.backend("snooze-sim").audit();
  CHECK(audit.consistent);
  CHECK(audit.idle == audit.capacity);
}

TEST_CASE("coordinator ids are unique across apps and incarnations") {
  Rig rig;
  const std::uint64_t a = launch(rig, asr_body(2, 50));
  const std::uint64_t b = launch(rig, asr_body(2, 50));
  CHECK(rig.s.mgr.coordinator_id(a) == 1);
  CHECK(rig.s.mgr.coordinator_id(b) == 2);
  REQUIRE(rig.run_until([&] { return rig.s.mgr.runtime(a)->iterations_done() >= 5; }));
  rig.s.mgr.checkpoint_now(a);
  rig.s.mgr.restart_from(a, std::nullopt);
  CHECK(rig.s.mgr.coordinator_id(a) == 3);
  rig.s.mgr.restart_from(a, std::nullopt);
  CHECK(rig.s.mgr.coordinator_id(a) == 4);
  CHECK(rig.s.mgr.coordinator_id(b) == 2);
}

TEST_CASE("coordinators db snapshots round-trip") {
  TraceLog trace;
  CoordinatorsDb db(trace);
  AppSubmissionRequest asr = asr_from_json(asr_body(2, 5));
  const std::uint64_t a = db.insert(asr);
  const std::uint64_t b = db.insert(asr);
  db.apply_event(a, AppEvent::VmsAllocated);
  VirtualCluster cluster;
  cluster.backend_id = "snooze-sim";
  cluster.vm_ids = {"vm-1", "vm-2"};
  db.set_cluster(a, cluster);
  db.apply_event(a, AppEvent::ProvisionDone);

  CoordinatorsDb other(trace);
  other.load_json(db.to_json());
  CHECK(other.size() == 2);
  CHECK(other.record(a).state == AppState::READY);
  CHECK(other.record(a).event_seq == 2);
  REQUIRE(other.record(a).cluster.has_value());
  CHECK(other.record(a).cluster->vm_ids == cluster.vm_ids);
  CHECK(other.record(b).state == AppState::CREATING);
  const std::uint64_t c = other.insert(asr);
  CHECK(c == b + 1);

  CHECK_THROWS_AS(db.apply_event(b, AppEvent::ProvisionDone), CacsError);  // no edge
  CHECK_THROWS_AS((void)db.record(999), CacsError);
  CHECK_THROWS_AS(db.erase(999), CacsError);
}

}  // namespace

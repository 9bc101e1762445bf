#include "cacs/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "cacs/gateway.hpp"
#include "cacs/lifecycle.hpp"
#include "cacs/monitor.hpp"
#include "cacs/workerrt.hpp"

namespace cacs {

double traffic(const NetworkModel& model) {
  return model.m * model.c1 + model.n * model.c2;
}

void MetricReport::add(VTime at, const std::string& metric, double value) {
  for (auto it = series_.rbegin(); it != series_.rend(); ++it) {
    if (it->metric != metric) continue;
    if (at < it->at)
      raise(ErrorCode::Internal, "metric " + metric + " sampled out of order");
    break;
  }
  series_.push_back({at, metric, value});
}

std::vector<std::pair<double, double>> MetricReport::curve(const std::string& metric) const {
  std::vector<std::pair<double, double>> out;
  for (const MetricPoint& p : series_)
    if (p.metric == metric) out.emplace_back(static_cast<double>(p.at), p.value);
  return out;
}

std::string MetricReport::csv() const {
  std::ostringstream out;
  out << "metric,at,value\n";
  for (const MetricPoint& p : series_) out << p.metric << ',' << p.at << ',' << p.value << '\n';
  return out.str();
}

Json MetricReport::to_json() const {
  Json rows = Json::array();
  for (const MetricPoint& p : series_)
    rows.push_back(Json{{"at", p.at}, {"metric", p.metric}, {"value", p.value}});
  return Json{{"scenario", scenario_}, {"series", rows}, {"summary", summary_}};
}

namespace {

constexpr VTime kSec = 1'000'000;

[[noreturn]] void scenario_fail(const std::string& scenario, const std::string& what) {
  raise(ErrorCode::Internal, "scenario " + scenario + " failed: " + what);
}

// A full deployment on its own simulated world.
struct World {
  EventQueue clock;
  TraceLog trace;
  NetMeter net;
  Service svc;

  World(const Config& cfg, std::uint64_t seed) : svc(cfg, clock, trace, net, seed) {}

  ApiResponse call(const std::string& method, const std::string& path,
                   std::optional<Json> body = std::nullopt) {
    return svc.handle({method, path, std::move(body)});
  }
};

Json app_body(std::size_t n, std::uint64_t iterations, const std::string& backend,
              std::uint64_t seed, const std::string& mode = "user",
              std::uint64_t state_bytes = 4096) {
  Json templates = Json::array();
  for (std::size_t i = 0; i < n; ++i) templates.push_back({{"vcpus", 1}});
  return Json{{"backend", backend},
              {"vm_templates", templates},
              {"checkpoint_policy", {{"mode", mode}}},
              {"app_spec",
               {{"kind", n == 1 ? "single_counter" : "ring_sum"},
                {"iterations", iterations},
                {"state_bytes_total", state_bytes}}},
              {"seed", seed}};
}

std::string state_of(Service& svc, std::uint64_t id) {
  return std::string(app_state_name(svc.db().record(id).state));
}

void wait_state(World& w, std::uint64_t id, const std::string& target, VTime deadline,
                const std::string& scenario) {
  const bool ok = w.clock.advance_until(
      [&] { return state_of(w.svc, id) == target; }, deadline);
  if (!ok)
    scenario_fail(scenario, "app " + std::to_string(id) + " never reached " + target +
                                " (is " + state_of(w.svc, id) + ")");
}

// ---- scaling ---------------------------------------------------------------

void scaling_sweep(MetricReport& report, const ExperimentParams& params,
                   const std::string& backend, const std::string& prefix, bool assert_knee) {
  const std::string& scenario = report.scenario();
  std::vector<double> provision_s;
  const std::vector<std::size_t> sizes{1, 2, 4, 8, 16, 32, 64, 128};
  for (std::size_t n : sizes) {
    World w(params.config, params.seed + n);
    const ApiResponse created =
        w.call("POST", "/coordinators", app_body(n, 600, backend, params.seed + n));
    if (created.status != 202) scenario_fail(scenario, "submit rejected: " + created.body.dump());
    const std::uint64_t id = created.body.at("id").get<std::uint64_t>();

    wait_state(w, id, "RUNNING", 600 * kSec, scenario);
    const double provision = to_seconds(w.clock.now());
    provision_s.push_back(provision);
    report.add(static_cast<VTime>(n), prefix + "provision_s", provision);

    const VTime t1 = w.clock.now();
    if (w.call("POST", "/coordinators/" + std::to_string(id) + "/checkpoints").status != 202)
      scenario_fail(scenario, "checkpoint trigger rejected");
    const bool thawed = w.clock.advance_until(
        [&] {
          const AppRuntime* rt = w.svc.apps().runtime(id);
          if (rt == nullptr || rt->frozen()) return false;
          const ApiResponse listing =
              w.call("GET", "/coordinators/" + std::to_string(id) + "/checkpoints");
          return !listing.body.at("checkpoints").empty();
        },
        t1 + 600 * kSec);
    if (!thawed) scenario_fail(scenario, "checkpoint never completed at n=" + std::to_string(n));
    report.add(static_cast<VTime>(n), prefix + "checkpoint_s", to_seconds(w.clock.now() - t1));

    const VTime t2 = w.clock.now();
    if (w.call("POST", "/coordinators/" + std::to_string(id) + "/checkpoints/1").status != 202)
      scenario_fail(scenario, "restart rejected");
    const bool restarted = w.clock.advance_until(
        [&] {
          const ApiResponse r = w.call("GET", "/coordinators/" + std::to_string(id));
          return r.body.at("coordinator_id").get<std::uint64_t>() == 2 &&
                 r.body.at("state") == "RUNNING";
        },
        t2 + 600 * kSec);
    if (!restarted) scenario_fail(scenario, "restart never completed at n=" + std::to_string(n));
    report.add(static_cast<VTime>(n), prefix + "restart_s", to_seconds(w.clock.now() - t2));
  }

  if (assert_knee) {
    const int limit = params.config.service.ssh_max_concurrent;
    double below = -1;
    double prev_above = -1;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (static_cast<int>(sizes[i]) <= limit) {
        if (below < 0) below = provision_s[i];
        if (provision_s[i] != below)
          scenario_fail(scenario, "provision time varies below the connection limit");
      } else {
        const double floor = prev_above < 0 ? below : prev_above;
        if (provision_s[i] <= floor)
          scenario_fail(scenario,
                        "provision time did not grow at n=" + std::to_string(sizes[i]));
        prev_above = provision_s[i];
      }
    }
  }
}

MetricReport run_scaling(const ExperimentParams& params) {
  MetricReport report("scaling");
  scaling_sweep(report, params, "snooze-sim", "", true);
  report.summary()["sizes"] = {1, 2, 4, 8, 16, 32, 64, 128};
  report.summary()["backend"] = "snooze-sim";
  return report;
}

// ---- burst100 --------------------------------------------------------------

MetricReport run_burst100(const ExperimentParams& params) {
  MetricReport report("burst100");
  const std::string scenario = report.scenario();
  World w(params.config, params.seed);
  const double c1 = params.config.backends.at("snooze-sim").poll_bytes_per_s;
  const double c2 = params.config.service.exec_bytes_per_s;

  const int apps = 100;
  VTime last_submit = 0;
  std::vector<double> decline_t, decline_y;  // post-submission window while m > 0
  for (int t = 0;; ++t) {
    w.clock.advance(static_cast<VTime>(t) * kSec);

    int creating = 0, provisioning = 0;
    for (std::uint64_t id : w.svc.db().ids()) {
      const AppState s = w.svc.db().record(id).state;
      if (s == AppState::CREATING) ++creating;
      if (s == AppState::PROVISION) ++provisioning;
    }
    const int m = w.net.count("poll");
    const int n = w.net.count("exec");
    const double measured = w.net.total_rate();
    const double model = traffic({static_cast<double>(m), static_cast<double>(n), c1, c2});
    if (m != creating || n != provisioning)
      scenario_fail(scenario, "flow counts diverge from lifecycle states at t=" +
                                  std::to_string(t) + " (poll " + std::to_string(m) + " vs " +
                                  std::to_string(creating) + ", exec " + std::to_string(n) +
                                  " vs " + std::to_string(provisioning) + ")");
    if (measured != model)
      scenario_fail(scenario, "measured traffic deviates from m*c1+n*c2 at t=" +
                                  std::to_string(t));
    if (w.svc.pool().busy() > w.svc.pool().capacity())
      scenario_fail(scenario, "worker pool exceeded capacity");

    const VTime at = w.clock.now();
    report.add(at, "poll_workers", m);
    report.add(at, "exec_workers", n);
    report.add(at, "traffic_bps", measured);
    report.add(at, "busy_workers", w.svc.pool().busy());

    if (t >= apps && m > 0) {
      decline_t.push_back(static_cast<double>(t));
      decline_y.push_back(measured);
    }
    if (t >= apps && m == 0 && n == 0) break;
    if (t > 400) scenario_fail(scenario, "boot traffic never drained");

    if (t < apps) {
      const ApiResponse r = w.call(
          "POST", "/coordinators", app_body(1, 1000, "snooze-sim", params.seed + t));
      if (r.status != 202) scenario_fail(scenario, "submission " + std::to_string(t) + " rejected");
      last_submit = w.clock.now();
    }
  }

  const LinearFit fit = linear_fit(decline_t, decline_y);
  if (decline_t.size() < 3) scenario_fail(scenario, "post-submission window too short");
  if (fit.slope >= 0) scenario_fail(scenario, "post-submission traffic is not declining");
  if (fit.r_squared < 0.99) scenario_fail(scenario, "post-submission decline is not affine");

  report.summary()["last_submit_s"] = to_seconds(last_submit);
  report.summary()["peak_busy"] = w.svc.pool().peak_busy();
  report.summary()["pool_capacity"] = w.svc.pool().capacity();
  report.summary()["fit"] =
      Json{{"slope", fit.slope}, {"intercept", fit.intercept}, {"r2", fit.r_squared}};
  report.summary()["c1"] = c1;
  report.summary()["c2"] = c2;
  return report;
}

// ---- heartbeat -------------------------------------------------------------

MetricReport run_heartbeat(const ExperimentParams& params) {
  MetricReport report("heartbeat");
  const ServiceConfig& cfg = params.config.service;
  const HeartbeatCosts costs{cfg.heartbeat_link_latency, cfg.heartbeat_hook_cost,
                             cfg.heartbeat_hook_timeout, cfg.heartbeat_probe_timeout};
  NodeProbes probes;
  probes.reachable = [](std::uint32_t) { return true; };
  probes.hook = [](std::uint32_t) { return std::optional<bool>(true); };

  VDur previous = 0;
  for (std::size_t n = 1; n <= 1024; n *= 2) {
    const BroadcastTree tree = build_tree(n);
    const HealthReport round = heartbeat_round(tree, probes, costs);
    const VDur expected =
        2 * static_cast<VDur>(tree_depth(n)) * cfg.heartbeat_link_latency + cfg.heartbeat_hook_cost;
    if (round.roundtrip_time != expected)
      scenario_fail("heartbeat", "roundtrip at n=" + std::to_string(n) + " is " +
                                     std::to_string(round.roundtrip_time) + ", expected " +
                                     std::to_string(expected));
    if (n > 1 && round.roundtrip_time - previous != 2 * cfg.heartbeat_link_latency)
      scenario_fail("heartbeat", "doubling n=" + std::to_string(n / 2) +
                                     " did not add one tree level");
    previous = round.roundtrip_time;
    report.add(static_cast<VTime>(n), "roundtrip_s", to_seconds(round.roundtrip_time));
  }
  report.summary()["link_latency_s"] = to_seconds(cfg.heartbeat_link_latency);
  report.summary()["levels_delta_s"] = to_seconds(2 * cfg.heartbeat_link_latency);
  return report;
}

// ---- migrate40 -------------------------------------------------------------

MetricReport run_migrate40(const ExperimentParams& params) {
  MetricReport report("migrate40");
  const std::string scenario = report.scenario();

  Config cfg = params.config;
  cfg.service.msg_hop = vseconds(0.5);  // slow the workloads; they must outlive the run

  EventQueue clock;
  TraceLog trace;
  NetMeter net;
  Service source(cfg, clock, trace, net, params.seed);
  Service target(cfg, clock, trace, net, params.seed + 1);
  InProcessClient to_target(target);

  const int apps = 40;
  std::vector<std::uint64_t> source_ids;
  std::vector<std::uint64_t> target_ids;

  const auto sample = [&](VTime at) {
    report.add(at, "live_apps", static_cast<double>(source.db().size() + target.db().size()));
    report.add(at, "source_local_bytes",
               static_cast<double>(source.checkpoints().local_bytes_used()));
    report.add(at, "source_remote_bytes",
               static_cast<double>(source.checkpoints().remote().bytes_used()));
    report.add(at, "target_local_bytes",
               static_cast<double>(target.checkpoints().local_bytes_used()));
    report.add(at, "target_remote_bytes",
               static_cast<double>(target.checkpoints().remote().bytes_used()));
  };

  // Phase 1: populate the source backend, one submission per second, with the
  // default 60 s periodic checkpoint policy.
  const VTime clone_start = 130 * kSec;
  for (VTime t = 0;; t += kSec) {
    clock.advance(t);
    if (t % (10 * kSec) == 0) sample(t);
    const std::size_t i = static_cast<std::size_t>(t / kSec);
    if (i < static_cast<std::size_t>(apps)) {
      const ApiResponse r = source.handle(
          {"POST", "/coordinators",
           app_body(2, 200000, "snooze-sim", params.seed + i, "periodic", 65536)});
      if (r.status != 202) scenario_fail(scenario, "source submission rejected");
      source_ids.push_back(r.body.at("id").get<std::uint64_t>());
    }
    if (t >= clone_start - kSec) break;
  }

  // Every app must have produced at least one periodic cut by now (watch
  // started by ~53 s, first period at +60 s < 130 s).
  for (std::uint64_t id : source_ids) {
    const ApiResponse listing =
        source.handle({"GET", "/coordinators/" + std::to_string(id) + "/checkpoints"});
    if (listing.body.at("checkpoints").empty())
      scenario_fail(scenario, "app " + std::to_string(id) + " has no checkpoint to migrate");
  }

  // Phase 2: incremental cloning, one app every 5 s.
  for (std::size_t i = 0; i < source_ids.size(); ++i) {
    const VTime t = clone_start + static_cast<VTime>(i) * 5 * kSec;
    clock.advance(t);
    sample(t);
    target_ids.push_back(
        source.apps().clone_to(source_ids[i], to_target, "openstack-sim", std::nullopt));
  }

  // Phase 3: wait for every clone to boot and run on the target.
  const auto all_running = [&] {
    for (std::uint64_t id : target_ids)
      if (target.db().record(id).state != AppState::RUNNING) return false;
    return true;
  };
  VTime t = clone_start + static_cast<VTime>(apps) * 5 * kSec;
  while (!all_running()) {
    t += 10 * kSec;
    if (t > 3000 * kSec) scenario_fail(scenario, "clones never all reached RUNNING");
    clock.advance(t);
    sample(t);
  }

  const std::size_t live = source.db().size() + target.db().size();
  report.summary()["live_before_termination"] = live;
  if (live != 2 * static_cast<std::size_t>(apps))
    scenario_fail(scenario, "expected 80 live apps, have " + std::to_string(live));

  // Phase 4: terminate the source copies.
  for (std::uint64_t id : source_ids) {
    t += kSec;
    clock.advance(t);
    if (source.handle({"DELETE", "/coordinators/" + std::to_string(id)}).status != 202)
      scenario_fail(scenario, "source delete rejected");
  }
  const bool emptied =
      clock.advance_until([&] { return source.db().size() == 0; }, t + 60 * kSec);
  if (!emptied) scenario_fail(scenario, "source apps survived termination");
  sample(clock.now());

  report.summary()["source_after_termination"] = source.db().size();
  report.summary()["target_after_termination"] = target.db().size();
  if (target.db().size() != static_cast<std::size_t>(apps))
    scenario_fail(scenario, "target lost apps during source termination");
  return report;
}

// ---- compare ---------------------------------------------------------------

MetricReport run_compare(const ExperimentParams& params) {
  MetricReport report("compare");
  scaling_sweep(report, params, "snooze-sim", "snooze-sim/", true);
  scaling_sweep(report, params, "openstack-sim", "openstack-sim/", false);

  const auto fast = report.curve("snooze-sim/provision_s");
  const auto slow = report.curve("openstack-sim/provision_s");
  for (std::size_t i = 0; i < fast.size(); ++i)
    if (slow[i].second <= fast[i].second)
      scenario_fail("compare", "openstack-sim provisioned faster than snooze-sim at n=" +
                                   std::to_string(static_cast<int>(fast[i].first)));
  report.summary()["backends"] = {"snooze-sim", "openstack-sim"};
  return report;
}

}  // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"scaling", "burst100", "heartbeat", "migrate40",
                                              "compare"};
  return names;
}

MetricReport run_experiment(const std::string& name, const ExperimentParams& params) {
  if (name == "scaling") return run_scaling(params);
  if (name == "burst100") return run_burst100(params);
  if (name == "heartbeat") return run_heartbeat(params);
  if (name == "migrate40") return run_migrate40(params);
  if (name == "compare") return run_compare(params);
  raise(ErrorCode::InvalidRequest, "unknown experiment: " + name);
}

}  // namespace cacs

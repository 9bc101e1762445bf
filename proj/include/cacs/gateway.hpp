#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>

#include "cacs/api.hpp"
#include "cacs/appmgr.hpp"
#include "cacs/ckptstore.hpp"
#include "cacs/cloudsim.hpp"
#include "cacs/config.hpp"
#include "cacs/coordinators_db.hpp"
#include "cacs/errors.hpp"
#include "cacs/event_queue.hpp"
#include "cacs/monitor.hpp"
#include "cacs/net_meter.hpp"
#include "cacs/provision.hpp"
#include "cacs/trace.hpp"

namespace cacs {

int http_status_for(ErrorCode code);

// Bounded pool of background workers on the virtual clock. A task occupies a
// worker until it reports completion, so long pipelines genuinely consume
// capacity. Tasks sharing a key (one key per application) run one at a time
// in arrival order; tasks with distinct keys run concurrently up to the cap.
class WorkerPool {
 public:
  // The task must call done() exactly once when its work — including any
  // asynchronous continuations — has finished.
  using Task = std::function<void(std::function<void()> done)>;

  WorkerPool(EventQueue& clock, int capacity);

  void enqueue(std::uint64_t key, Task task);

  int capacity() const { return capacity_; }
  int busy() const { return busy_; }
  int peak_busy() const { return peak_busy_; }
  std::size_t queued() const;

 private:
  void pump();
  void finish(std::uint64_t key);

  EventQueue& clock_;
  int capacity_;
  int busy_ = 0;
  int peak_busy_ = 0;
  std::map<std::uint64_t, std::deque<Task>> waiting_;  // per-key FIFO
  std::deque<std::uint64_t> order_;                    // arrival order of runnable keys
  std::set<std::uint64_t> running_;
};

struct RouteMatch {
  std::string resource;  // "coordinators" or "checkpoints"
  std::string action;
  std::optional<std::uint64_t> coordinator;
  std::optional<std::uint64_t> checkpoint;
};

// One service deployment: the REST resource layer and every manager behind
// it. The clock, trace and network meter stay outside so several deployments
// (migration experiments) can share one simulated world.
class Service {
 public:
  Service(const Config& cfg, EventQueue& clock, TraceLog& trace, NetMeter& net,
          std::uint64_t seed, std::unique_ptr<RemoteStore> remote = nullptr);

  // Maps exactly the published route table; raises UnknownRoute otherwise.
  static RouteMatch route(const std::string& method, const std::string& path);

  ApiResponse handle(const ApiRequest& req);

  const Config& config() const { return cfg_; }
  CloudManager& clouds() { return clouds_; }
  ProvisionManager& provisioner() { return prov_; }
  CheckpointManager& checkpoints() { return ckpts_; }
  MonitoringManager& monitor() { return monitor_; }
  CoordinatorsDb& db() { return db_; }
  AppManager& apps() { return mgr_; }
  WorkerPool& pool() { return pool_; }
  NetMeter& net() { return net_; }

 private:
  ApiResponse dispatch(const RouteMatch& m, const ApiRequest& req,
                       const std::map<std::string, std::string>& query);
  ApiResponse checkpoint_listing(std::uint64_t app_id);
  ApiResponse checkpoint_detail(std::uint64_t app_id, std::uint64_t generation,
                                bool include_images);
  void enqueue_guarded(std::uint64_t key, const std::string& what,
                       std::function<void(std::function<void()>)> work);

  Config cfg_;
  EventQueue& clock_;
  TraceLog& trace_;
  NetMeter& net_;
  CloudManager clouds_;
  ProvisionManager prov_;
  CheckpointManager ckpts_;
  MonitoringManager monitor_;
  CoordinatorsDb db_;
  AppManager mgr_;
  WorkerPool pool_;
};

// ApiClient over an in-process Service: what the experiment harness and
// same-world service pairs use instead of HTTP.
class InProcessClient : public ApiClient {
 public:
  explicit InProcessClient(Service& service) : service_(service) {}
  ApiResponse call(const ApiRequest& req) override { return service_.handle(req); }

 private:
  Service& service_;
};

}  // namespace cacs

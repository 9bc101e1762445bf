#include "cacs/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <utility>
#include <vector>

#include "cacs/lifecycle.hpp"
#include "cacs/util.hpp"
#include "cacs/workerrt.hpp"

namespace cacs {

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidAsr:
    case ErrorCode::InvalidRequest:
    case ErrorCode::CorruptImage:
    case ErrorCode::EmptyCluster:
      return 400;
    case ErrorCode::UnknownRoute:
    case ErrorCode::UnknownApp:
    case ErrorCode::UnknownCheckpoint:
    case ErrorCode::UnknownVm:
    case ErrorCode::UnknownBackend:
    case ErrorCode::UnknownDaemon:
    case ErrorCode::NoCheckpoint:
      return 404;
    case ErrorCode::IllegalTransition:
    case ErrorCode::StateConflict:
    case ErrorCode::ClusterMismatch:
    case ErrorCode::CountMismatch:
    case ErrorCode::QuiesceTimeout:
      return 409;
    case ErrorCode::ClusterUnavailable:
    case ErrorCode::NodeUnreachable:
    case ErrorCode::StorageFull:
    case ErrorCode::RemoteUnavailable:
    case ErrorCode::UploadFailed:
    case ErrorCode::Internal:
      return 500;
  }
  return 500;
}

WorkerPool::WorkerPool(EventQueue& clock, int capacity) : clock_(clock), capacity_(capacity) {}

void WorkerPool::enqueue(std::uint64_t key, Task task) {
  auto& q = waiting_[key];
  q.push_back(std::move(task));
  if (q.size() == 1 && running_.count(key) == 0) order_.push_back(key);
  pump();
}

std::size_t WorkerPool::queued() const {
  std::size_t n = 0;
  for (const auto& [key, q] : waiting_) n += q.size();
  return n;
}

void WorkerPool::pump() {
  while (busy_ < capacity_ && !order_.empty()) {
    const std::uint64_t key = order_.front();
    order_.pop_front();
    auto it = waiting_.find(key);
    if (it == waiting_.end() || it->second.empty()) continue;
    Task task = std::move(it->second.front());
    it->second.pop_front();
    if (it->second.empty()) waiting_.erase(it);
    running_.insert(key);
    ++busy_;
    peak_busy_ = std::max(peak_busy_, busy_);
    // The worker slot is taken now; the task itself starts once the caller
    // returns to the event loop.
    auto fired = std::make_shared<bool>(false);
    clock_.immediate([this, key, task, fired] {
      task([this, key, fired] {
        if (*fired) return;
        *fired = true;
        finish(key);
      });
    });
  }
}

void WorkerPool::finish(std::uint64_t key) {
  --busy_;
  running_.erase(key);
  auto it = waiting_.find(key);
  if (it != waiting_.end() && !it->second.empty()) order_.push_back(key);
  pump();
}

namespace {

std::unique_ptr<RemoteStore> or_mem(std::unique_ptr<RemoteStore> remote) {
  if (remote) return remote;
  return std::make_unique<MemObjectStore>();
}

std::optional<std::uint64_t> parse_num(const std::string& text) {
  if (text.empty() || text.size() > 18) return std::nullopt;
  for (char c : text)
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
  return std::stoull(text);
}

std::map<std::string, std::string> parse_query(const std::string& text) {
  std::map<std::string, std::string> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t amp = text.find('&', start);
    if (amp == std::string::npos) amp = text.size();
    const std::string pair = text.substr(start, amp - start);
    const std::size_t eq = pair.find('=');
    if (eq == std::string::npos)
      out[pair] = "";
    else
      out[pair.substr(0, eq)] = pair.substr(eq + 1);
    start = amp + 1;
  }
  return out;
}

Json set_summary(const CheckpointSet& set) {
  std::uint64_t total = 0;
  for (const ImageEntry& img : set.images) total += img.size_bytes;
  return Json{{"id", set.generation},
              {"created_at", set.created_at},
              {"size_bytes", total},
              {"image_count", set.images.size()},
              {"replicated", set.replicated}};
}

}  // namespace

Service::Service(const Config& cfg, EventQueue& clock, TraceLog& trace, NetMeter& net,
                 std::uint64_t seed, std::unique_ptr<RemoteStore> remote)
    : cfg_(cfg),
      clock_(clock),
      trace_(trace),
      net_(net),
      clouds_(cfg_, clock, trace, net, seed),
      prov_(clouds_, clock, trace, net, cfg_.service.exec_bytes_per_s),
      ckpts_(cfg_.service, clock, trace, or_mem(std::move(remote))),
      monitor_(clock, trace, cfg_.service),
      db_(trace, cfg_.service.db_snapshot_path, &clock),
      mgr_(cfg_, clock, trace, clouds_, prov_, ckpts_, monitor_, db_),
      pool_(clock, cfg_.service.worker_pool_capacity) {}

RouteMatch Service::route(const std::string& method, const std::string& path) {
  std::string p = path;
  if (const std::size_t q = p.find('?'); q != std::string::npos) p.erase(q);
  const auto bad = [&]() -> RouteMatch {
    raise(ErrorCode::UnknownRoute, method + " " + path + " matches no route");
  };

  if (p.empty() || p.front() != '/') return bad();
  std::vector<std::string> segs;
  std::size_t start = 1;
  while (start <= p.size()) {
    const std::size_t slash = p.find('/', start);
    const std::string seg =
        slash == std::string::npos ? p.substr(start) : p.substr(start, slash - start);
    if (seg.empty()) return bad();
    segs.push_back(seg);
    if (slash == std::string::npos) break;
    start = slash + 1;
  }

  if (segs.empty() || segs[0] != "coordinators" || segs.size() > 4) return bad();

  RouteMatch m;
  if (segs.size() == 1) {
    m.resource = "coordinators";
    if (method == "GET") m.action = "list";
    else if (method == "POST") m.action = "create";
    else return bad();
    return m;
  }

  const std::optional<std::uint64_t> id = parse_num(segs[1]);
  if (!id) return bad();
  m.coordinator = id;

  if (segs.size() == 2) {
    m.resource = "coordinators";
    if (method == "GET") m.action = "show";
    else if (method == "DELETE") m.action = "delete";
    else return bad();
    return m;
  }

  if (segs[2] != "checkpoints") return bad();
  m.resource = "checkpoints";
  if (segs.size() == 3) {
    if (method == "GET") m.action = "list";
    else if (method == "POST") m.action = "save";
    else return bad();
    return m;
  }

  const std::optional<std::uint64_t> gen = parse_num(segs[3]);
  if (!gen) return bad();
  m.checkpoint = gen;
  if (method == "GET") m.action = "show";
  else if (method == "POST") m.action = "restart";
  else if (method == "DELETE") m.action = "delete";
  else return bad();
  return m;
}

ApiResponse Service::handle(const ApiRequest& req) {
  try {
    std::string path = req.path;
    std::map<std::string, std::string> query;
    if (const std::size_t q = path.find('?'); q != std::string::npos) {
      query = parse_query(path.substr(q + 1));
      path.erase(q);
    }
    const RouteMatch m = route(req.method, path);
    return dispatch(m, req, query);
  } catch (const CacsError& e) {
    return {http_status_for(e.code()),
            Json{{"error", std::string(error_code_name(e.code()))}, {"message", e.what()}}};
  }
}

ApiResponse Service::dispatch(const RouteMatch& m, const ApiRequest& req,
                              const std::map<std::string, std::string>& query) {
  if (m.resource == "coordinators") {
    if (m.action == "list") return {200, Json{{"coordinators", mgr_.list()}}};

    if (m.action == "create") {
      if (!req.body) raise(ErrorCode::InvalidRequest, "missing request body");
      const std::uint64_t id = mgr_.submit(*req.body);
      enqueue_guarded(id, "pipeline app=" + std::to_string(id),
                      [this, id](std::function<void()> done) {
                        mgr_.start_pipeline(id, [done](bool) { done(); });
                      });
      return {202, Json{{"id", id}, {"state", app_state_name(AppState::CREATING)}}};
    }

    const std::uint64_t id = *m.coordinator;
    if (m.action == "show") return {200, mgr_.describe(id)};

    // delete: acknowledge only for apps that exist right now.
    db_.record(id);
    enqueue_guarded(id, "terminate app=" + std::to_string(id),
                    [this, id](std::function<void()> done) {
                      mgr_.terminate(id);
                      done();
                    });
    return {202, Json{{"id", id}}};
  }

  const std::uint64_t id = *m.coordinator;
  const ApplicationRecord& rec = db_.record(id);

  if (m.action == "list") return checkpoint_listing(id);

  if (m.action == "save") {
    if (req.body && req.body->is_object() && req.body->contains("data")) {
      // Image upload: bounded payloads, handled synchronously so the final
      // piece can report the registered generation.
      const Json& b = *req.body;
      if (!b.contains("vm_index") || !b.contains("count"))
        raise(ErrorCode::InvalidRequest, "upload needs vm_index, count and data");
      const std::uint32_t vm_index = b.at("vm_index").get<std::uint32_t>();
      const std::uint32_t count = b.at("count").get<std::uint32_t>();
      auto data = base64_decode(b.at("data").get<std::string>());
      const auto completed = ckpts_.upload_image(id, vm_index, count, std::move(data));
      Json out{{"vm_index", vm_index}, {"complete", completed.has_value()}};
      if (completed) out["id"] = completed->generation;
      return {200, out};
    }
    if (rec.state != AppState::RUNNING)
      raise(ErrorCode::StateConflict, "checkpoint needs RUNNING, app " + std::to_string(id) +
                                          " is " + std::string(app_state_name(rec.state)));
    // The worker stays busy while the app is frozen writing, so a second
    // trigger queued on the same app starts only once the first cut is done.
    enqueue_guarded(id, "checkpoint app=" + std::to_string(id),
                    [this, id](std::function<void()> done) {
                      VDur freeze = 0;
                      mgr_.checkpoint_now(id, &freeze);
                      if (freeze > 0)
                        clock_.in(freeze, std::move(done));
                      else
                        done();
                    });
    return {202, Json{{"id", id}}};
  }

  if (m.action == "show")
    return checkpoint_detail(id, *m.checkpoint, [&] {
      const auto it = query.find("include_images");
      return it != query.end() && (it->second == "true" || it->second == "1");
    }());

  if (m.action == "restart") {
    ckpts_.select_image(id, m.checkpoint);  // reject before accepting the work
    const bool queueable = !rec.asr.autostart && (rec.state == AppState::CREATING ||
                                                  rec.state == AppState::PROVISION);
    if (!queueable && rec.state != AppState::READY && rec.state != AppState::RUNNING)
      raise(ErrorCode::StateConflict, "restart needs READY or RUNNING, app " +
                                          std::to_string(id) + " is " +
                                          std::string(app_state_name(rec.state)));
    const std::optional<std::uint64_t> gen = m.checkpoint;
    enqueue_guarded(id, "restart app=" + std::to_string(id),
                    [this, id, gen](std::function<void()> done) {
                      mgr_.restart_from(id, gen, [done](bool) { done(); });
                    });
    return {202, Json{{"id", id}, {"checkpoint", *m.checkpoint}}};
  }

  // delete checkpoint: purely a storage operation, synchronous.
  ckpts_.select_image(id, m.checkpoint);
  ckpts_.delete_set(id, *m.checkpoint);
  return {204, Json()};
}

ApiResponse Service::checkpoint_listing(std::uint64_t app_id) {
  Json arr = Json::array();
  for (const CheckpointSet& set : ckpts_.list(app_id)) arr.push_back(set_summary(set));
  return {200, Json{{"checkpoints", arr}}};
}

ApiResponse Service::checkpoint_detail(std::uint64_t app_id, std::uint64_t generation,
                                       bool include_images) {
  const CheckpointSet set = ckpts_.select_image(app_id, generation);
  Json out = set_summary(set);
  Json images = Json::array();
  if (include_images) {
    const auto fetched = ckpts_.fetch(app_id, set);
    for (std::size_t i = 0; i < fetched.images.size(); ++i)
      images.push_back(Json{{"vm_index", set.images[i].vm_index},
                            {"size_bytes", set.images[i].size_bytes},
                            {"data", base64_encode(fetched.images[i])}});
  } else {
    for (const ImageEntry& img : set.images)
      images.push_back(Json{{"vm_index", img.vm_index}, {"size_bytes", img.size_bytes}});
  }
  out["images"] = images;
  return {200, out};
}

void Service::enqueue_guarded(std::uint64_t key, const std::string& what,
                              std::function<void(std::function<void()>)> work) {
  pool_.enqueue(key, [this, what, work = std::move(work)](std::function<void()> done) {
    try {
      work(done);
    } catch (const CacsError& e) {
      trace_.append(clock_.now(), "gateway", what + " failed: " + e.what());
      done();
    }
  });
}

}  // namespace cacs

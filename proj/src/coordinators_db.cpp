#include "cacs/coordinators_db.hpp"

#include <fstream>
#include <utility>

#include "cacs/errors.hpp"

namespace cacs {

namespace {

Json cluster_to_json(const VirtualCluster& c) {
  return Json{{"backend_id", c.backend_id},
              {"vm_ids", c.vm_ids},
              {"created_at", c.created_at}};
}

VirtualCluster cluster_from_json(const Json& j) {
  VirtualCluster c;
  c.backend_id = j.at("backend_id").get<std::string>();
  c.vm_ids = j.at("vm_ids").get<std::vector<std::string>>();
  c.created_at = j.at("created_at").get<VTime>();
  return c;
}

}  // namespace

CoordinatorsDb::CoordinatorsDb(TraceLog& trace, std::string snapshot_path,
                               const EventQueue* clock)
    : trace_(trace), snapshot_path_(std::move(snapshot_path)), clock_(clock) {}

std::uint64_t CoordinatorsDb::insert(AppSubmissionRequest asr) {
  ApplicationRecord rec;
  rec.app_id = next_app_id_++;
  rec.state = AppState::CREATING;
  rec.asr = std::move(asr);
  rec.created_at = now();
  const std::uint64_t id = rec.app_id;
  records_.emplace(id, std::move(rec));
  trace_.append(now(), "db", "insert app=" + std::to_string(id));
  persist();
  return id;
}

ApplicationRecord& CoordinatorsDb::record(std::uint64_t app_id) {
  auto it = records_.find(app_id);
  if (it == records_.end()) raise(ErrorCode::UnknownApp, "no app " + std::to_string(app_id));
  return it->second;
}

const ApplicationRecord& CoordinatorsDb::record(std::uint64_t app_id) const {
  auto it = records_.find(app_id);
  if (it == records_.end()) raise(ErrorCode::UnknownApp, "no app " + std::to_string(app_id));
  return it->second;
}

std::vector<std::uint64_t> CoordinatorsDb::ids() const {
  std::vector<std::uint64_t> out;
  out.reserve(records_.size());
  for (const auto& [id, rec] : records_) out.push_back(id);
  return out;
}

AppState CoordinatorsDb::apply_event(std::uint64_t app_id, AppEvent event) {
  ApplicationRecord& rec = record(app_id);
  const AppState next = transition(rec.state, event);
  trace_.append(now(), "db",
                "app=" + std::to_string(app_id) + " " + std::string(app_event_name(event)) +
                    ": " + std::string(app_state_name(rec.state)) + " -> " +
                    std::string(app_state_name(next)));
  rec.state = next;
  ++rec.event_seq;
  persist();
  return next;
}

void CoordinatorsDb::set_cluster(std::uint64_t app_id, std::optional<VirtualCluster> cluster) {
  record(app_id).cluster = std::move(cluster);
  persist();
}

void CoordinatorsDb::erase(std::uint64_t app_id) {
  if (records_.erase(app_id) == 0)
    raise(ErrorCode::UnknownApp, "no app " + std::to_string(app_id));
  persist();
}

Json CoordinatorsDb::to_json() const {
  Json apps = Json::array();
  for (const auto& [id, rec] : records_) {
    Json j{{"app_id", rec.app_id},
           {"state", app_state_name(rec.state)},
           {"asr", asr_to_json(rec.asr)},
           {"event_seq", rec.event_seq},
           {"created_at", rec.created_at}};
    j["cluster"] = rec.cluster ? cluster_to_json(*rec.cluster) : Json(nullptr);
    apps.push_back(std::move(j));
  }
  return Json{{"next_app_id", next_app_id_}, {"apps", std::move(apps)}};
}

void CoordinatorsDb::load_json(const Json& snapshot) {
  records_.clear();
  next_app_id_ = snapshot.value("next_app_id", std::uint64_t{1});
  for (const Json& j : snapshot.at("apps")) {
    ApplicationRecord rec;
    rec.app_id = j.at("app_id").get<std::uint64_t>();
    rec.state = parse_app_state(j.at("state").get<std::string>());
    rec.asr = asr_from_json(j.at("asr"));
    rec.event_seq = j.at("event_seq").get<std::uint64_t>();
    rec.created_at = j.at("created_at").get<VTime>();
    if (!j.at("cluster").is_null()) rec.cluster = cluster_from_json(j.at("cluster"));
    const std::uint64_t id = rec.app_id;
    records_.insert_or_assign(id, std::move(rec));
    if (id >= next_app_id_) next_app_id_ = id + 1;
  }
}

void CoordinatorsDb::persist() const {
  if (snapshot_path_.empty()) return;
  std::ofstream out(snapshot_path_, std::ios::trunc);
  out << to_json().dump(2) << '\n';
}

}  // namespace cacs

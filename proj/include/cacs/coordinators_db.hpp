#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cacs/event_queue.hpp"
#include "cacs/lifecycle.hpp"
#include "cacs/trace.hpp"

namespace cacs {

// The service's source of truth for application records. State changes go
// through apply_event so every mutation is a legal state-machine edge, gets
// an event sequence number, and lands in the optional write-through JSON
// snapshot (crash durability for the daemon).
class CoordinatorsDb {
 public:
  explicit CoordinatorsDb(TraceLog& trace, std::string snapshot_path = "",
                          const EventQueue* clock = nullptr);

  std::uint64_t insert(AppSubmissionRequest asr);

  ApplicationRecord& record(std::uint64_t app_id);              // throws UnknownApp
  const ApplicationRecord& record(std::uint64_t app_id) const;  // throws UnknownApp
  bool contains(std::uint64_t app_id) const { return records_.count(app_id) != 0; }
  std::vector<std::uint64_t> ids() const;  // ascending
  std::size_t size() const { return records_.size(); }

  // Applies the edge (IllegalTransition if the machine has none), bumps
  // event_seq, traces, snapshots. Returns the new state.
  AppState apply_event(std::uint64_t app_id, AppEvent event);

  void set_cluster(std::uint64_t app_id, std::optional<VirtualCluster> cluster);

  void erase(std::uint64_t app_id);  // throws UnknownApp

  Json to_json() const;
  void load_json(const Json& snapshot);

 private:
  void persist() const;
  VTime now() const { return clock_ ? clock_->now() : 0; }

  TraceLog& trace_;
  std::string snapshot_path_;
  const EventQueue* clock_ = nullptr;
  std::map<std::uint64_t, ApplicationRecord> records_;
  std::uint64_t next_app_id_ = 1;
};

}  // namespace cacs

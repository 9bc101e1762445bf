#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cacs/config.hpp"
#include "cacs/event_queue.hpp"
#include "cacs/trace.hpp"

namespace cacs {

struct ImageEntry {
  std::uint32_t vm_index = 0;
  std::uint64_t size_bytes = 0;
};

struct CheckpointSet {
  std::uint64_t app_id = 0;
  std::uint64_t generation = 0;
  VTime created_at = 0;
  std::vector<ImageEntry> images;  // ascending vm_index
  bool replicated = false;
};

// Minimal object-store contract: put/get/delete/list over string keys.
// set_available(false) simulates an outage; every operation then raises
// RemoteUnavailable until the store comes back.
class RemoteStore {
 public:
  virtual ~RemoteStore() = default;

  void put(const std::string& key, const std::vector<std::uint8_t>& data);
  std::optional<std::vector<std::uint8_t>> get(const std::string& key);
  void del(const std::string& key);
  std::vector<std::string> list(const std::string& prefix);  // sorted
  bool has(const std::string& key);

  void set_available(bool up) { available_ = up; }
  bool available() const { return available_; }

  virtual std::uint64_t bytes_used() = 0;

 protected:
  virtual void do_put(const std::string& key, const std::vector<std::uint8_t>& data) = 0;
  virtual std::optional<std::vector<std::uint8_t>> do_get(const std::string& key) = 0;
  virtual void do_del(const std::string& key) = 0;
  virtual std::vector<std::string> do_list(const std::string& prefix) = 0;

 private:
  void check() const;
  bool available_ = true;
};

// In-process object store.
class MemObjectStore : public RemoteStore {
 public:
  std::uint64_t bytes_used() override;

 protected:
  void do_put(const std::string& key, const std::vector<std::uint8_t>& data) override;
  std::optional<std::vector<std::uint8_t>> do_get(const std::string& key) override;
  void do_del(const std::string& key) override;
  std::vector<std::string> do_list(const std::string& prefix) override;

 private:
  std::map<std::string, std::vector<std::uint8_t>> objects_;
};

// Directory-tree store: keys are relative paths under root.
class DirStore : public RemoteStore {
 public:
  explicit DirStore(std::string root);

  std::uint64_t bytes_used() override;

 protected:
  void do_put(const std::string& key, const std::vector<std::uint8_t>& data) override;
  std::optional<std::vector<std::uint8_t>> do_get(const std::string& key) override;
  void do_del(const std::string& key) override;
  std::vector<std::string> do_list(const std::string& prefix) override;

 private:
  std::string path_of(const std::string& key) const;
  std::string root_;
};

// Serializes transfers over one shared link at a fixed rate; returns how long
// a transfer starting now takes to complete, including queueing behind
// transfers already under way.
class BandwidthLink {
 public:
  BandwidthLink(EventQueue& clock, double bytes_per_s)
      : clock_(clock), bytes_per_s_(bytes_per_s) {}

  VDur enqueue(std::uint64_t bytes);
  void set_rate(double bytes_per_s) { bytes_per_s_ = bytes_per_s; }

 private:
  EventQueue& clock_;
  double bytes_per_s_;
  VTime busy_until_ = 0;
};

// Checkpoint Manager. Images are written VM-locally first; a low-priority
// replication task copies them to the remote store afterwards. The manager's
// own index of checkpoint sets fills in lazily: daemon-side writes register
// nothing, and sets become known only when a list/select scan discovers their
// manifests.
class CheckpointManager {
 public:
  CheckpointManager(const ServiceConfig& cfg, EventQueue& clock, TraceLog& trace,
                    std::unique_ptr<RemoteStore> remote);

  // --- daemon-side path -------------------------------------------------
  struct LocalWrite {
    CheckpointSet set;
    VDur write_time = 0;  // parallel per-VM writes; max over images
  };
  // images[i] is process i's blob, written to vm_ids[i]'s local store.
  // Throws StorageFull and leaves no partial set behind.
  LocalWrite store_local(std::uint64_t app_id, const std::vector<std::string>& vm_ids,
                         const std::vector<std::vector<std::uint8_t>>& images);

  // Lazy replication of a set written by store_local. Retries with backoff
  // while the remote store is unavailable. No-op if already replicated.
  void schedule_replication(std::uint64_t app_id, std::uint64_t generation,
                            std::vector<std::string> vm_ids);

  // --- API-side path ----------------------------------------------------
  // Rescans local stores and the remote store for manifests (this is where
  // the index learns about daemon-written sets), ascending by generation.
  std::vector<CheckpointSet> list(std::uint64_t app_id);

  // The given generation, else the highest. NoCheckpoint / UnknownCheckpoint.
  CheckpointSet select_image(std::uint64_t app_id, std::optional<std::uint64_t> generation);

  struct Fetched {
    CheckpointSet set;
    std::vector<std::vector<std::uint8_t>> images;  // ascending vm_index
    VDur transfer_time = 0;
  };
  // Loads every image of the set, local copies first, remote otherwise.
  Fetched fetch(std::uint64_t app_id, const CheckpointSet& set);

  // External upload (migration path): images arrive one POST at a time; the
  // set registers once all `count` images are present. Returns the completed
  // set on the final piece.
  std::optional<CheckpointSet> upload_image(std::uint64_t app_id, std::uint32_t vm_index,
                                            std::uint32_t count, std::vector<std::uint8_t> data);

  void delete_set(std::uint64_t app_id, std::uint64_t generation);
  void delete_all(std::uint64_t app_id);

  // VM teardown: its local store (and any unreplicated images on it) is gone.
  void drop_vm_store(const std::string& vm_id);

  // Cached index only — no scan. Empty until list()/select_image() runs.
  std::vector<CheckpointSet> known_sets(std::uint64_t app_id) const;

  RemoteStore& remote() { return *remote_; }
  std::uint64_t local_bytes_used() const;
  std::uint64_t local_bytes_used(const std::string& vm_id) const;

 private:
  using Blob = std::vector<std::uint8_t>;
  using KeyMap = std::map<std::string, Blob>;

  std::string set_prefix(std::uint64_t app_id, std::uint64_t generation) const;
  std::string image_key(std::uint64_t app_id, std::uint64_t generation,
                        std::uint32_t vm_index) const;
  std::string manifest_key(std::uint64_t app_id, std::uint64_t generation) const;
  std::string app_prefix(std::uint64_t app_id) const;

  Blob encode_manifest(const CheckpointSet& set) const;
  std::optional<CheckpointSet> decode_manifest(const Blob& data) const;

  bool remote_has_set(const CheckpointSet& set);
  void run_replication(std::uint64_t app_id, std::uint64_t generation,
                       std::vector<std::string> vm_ids, std::uint64_t epoch);
  void index_put(const CheckpointSet& set);

  const ServiceConfig& cfg_;
  EventQueue& clock_;
  TraceLog& trace_;
  std::unique_ptr<RemoteStore> remote_;
  BandwidthLink remote_link_;

  std::map<std::string, KeyMap> vm_stores_;
  std::map<std::uint64_t, std::uint64_t> next_generation_;
  std::map<std::uint64_t, std::map<std::uint64_t, CheckpointSet>> index_;
  std::map<std::uint64_t, std::uint64_t> delete_epoch_;

  struct PendingUpload {
    std::uint64_t generation = 0;
    std::uint32_t count = 0;
    std::map<std::uint32_t, Blob> pieces;
  };
  std::map<std::uint64_t, PendingUpload> uploads_;
};

}  // namespace cacs

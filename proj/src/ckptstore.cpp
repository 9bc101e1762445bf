#include "cacs/ckptstore.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "nlohmann/json.hpp"

#include "cacs/errors.hpp"

namespace fs = std::filesystem;

namespace cacs {

// --- RemoteStore -----------------------------------------------------------

void RemoteStore::check() const {
  if (!available_) raise(ErrorCode::RemoteUnavailable, "remote store offline");
}

void RemoteStore::put(const std::string& key, const std::vector<std::uint8_t>& data) {
  check();
  do_put(key, data);
}

std::optional<std::vector<std::uint8_t>> RemoteStore::get(const std::string& key) {
  check();
  return do_get(key);
}

void RemoteStore::del(const std::string& key) {
  check();
  do_del(key);
}

std::vector<std::string> RemoteStore::list(const std::string& prefix) {
  check();
  std::vector<std::string> keys = do_list(prefix);
  std::sort(keys.begin(), keys.end());
  return keys;
}

bool RemoteStore::has(const std::string& key) { return get(key).has_value(); }

// --- MemObjectStore --------------------------------------------------------

std::uint64_t MemObjectStore::bytes_used() {
  std::uint64_t total = 0;
  for (const auto& [key, data] : objects_) total += data.size();
  return total;
}

void MemObjectStore::do_put(const std::string& key, const std::vector<std::uint8_t>& data) {
  objects_[key] = data;
}

std::optional<std::vector<std::uint8_t>> MemObjectStore::do_get(const std::string& key) {
  auto it = objects_.find(key);
  if (it == objects_.end()) return std::nullopt;
  return it->second;
}

void MemObjectStore::do_del(const std::string& key) { objects_.erase(key); }

std::vector<std::string> MemObjectStore::do_list(const std::string& prefix) {
  std::vector<std::string> keys;
  for (const auto& [key, data] : objects_) {
    if (key.rfind(prefix, 0) == 0) keys.push_back(key);
  }
  return keys;
}

// --- DirStore ---------------------------------------------------------------

DirStore::DirStore(std::string root) : root_(std::move(root)) {
  fs::create_directories(root_);
}

std::string DirStore::path_of(const std::string& key) const { return root_ + "/" + key; }

std::uint64_t DirStore::bytes_used() {
  std::uint64_t total = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root_)) {
    if (entry.is_regular_file()) total += entry.file_size();
  }
  return total;
}

void DirStore::do_put(const std::string& key, const std::vector<std::uint8_t>& data) {
  fs::path p = path_of(key);
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::Internal, "cannot write " + p.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

std::optional<std::vector<std::uint8_t>> DirStore::do_get(const std::string& key) {
  fs::path p = path_of(key);
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

void DirStore::do_del(const std::string& key) {
  std::error_code ec;
  fs::remove(path_of(key), ec);
}

std::vector<std::string> DirStore::do_list(const std::string& prefix) {
  std::vector<std::string> keys;
  for (const auto& entry : fs::recursive_directory_iterator(root_)) {
    if (!entry.is_regular_file()) continue;
    std::string rel = fs::relative(entry.path(), root_).generic_string();
    if (rel.rfind(prefix, 0) == 0) keys.push_back(rel);
  }
  return keys;
}

// --- BandwidthLink ----------------------------------------------------------

VDur BandwidthLink::enqueue(std::uint64_t bytes) {
  VTime start = std::max(clock_.now(), busy_until_);
  VDur dur = 0;
  if (bytes_per_s_ > 0) {
    dur = static_cast<VDur>(static_cast<double>(bytes) / bytes_per_s_ *
                                static_cast<double>(kMicrosPerSecond) +
                            0.5);
  }
  busy_until_ = start + dur;
  return busy_until_ - clock_.now();
}

// --- CheckpointManager ------------------------------------------------------

CheckpointManager::CheckpointManager(const ServiceConfig& cfg, EventQueue& clock, TraceLog& trace,
                                     std::unique_ptr<RemoteStore> remote)
    : cfg_(cfg),
      clock_(clock),
      trace_(trace),
      remote_(std::move(remote)),
      remote_link_(clock, cfg.remote_bandwidth_bps) {}

std::string CheckpointManager::app_prefix(std::uint64_t app_id) const {
  return "app_" + std::to_string(app_id) + "/";
}

std::string CheckpointManager::set_prefix(std::uint64_t app_id, std::uint64_t generation) const {
  return app_prefix(app_id) + "gen_" + std::to_string(generation) + "/";
}

std::string CheckpointManager::image_key(std::uint64_t app_id, std::uint64_t generation,
                                         std::uint32_t vm_index) const {
  return set_prefix(app_id, generation) + "vm_" + std::to_string(vm_index) + ".img";
}

std::string CheckpointManager::manifest_key(std::uint64_t app_id, std::uint64_t generation) const {
  return set_prefix(app_id, generation) + "manifest.json";
}

CheckpointManager::Blob CheckpointManager::encode_manifest(const CheckpointSet& set) const {
  nlohmann::json images = nlohmann::json::array();
  for (const ImageEntry& e : set.images) {
    images.push_back({{"vm_index", e.vm_index}, {"size", e.size_bytes}});
  }
  nlohmann::json j = {{"app", set.app_id},
                      {"generation", set.generation},
                      {"created_at", set.created_at},
                      {"images", images}};
  std::string s = j.dump();
  return Blob(s.begin(), s.end());
}

std::optional<CheckpointSet> CheckpointManager::decode_manifest(const Blob& data) const {
  nlohmann::json j = nlohmann::json::parse(data.begin(), data.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  try {
    CheckpointSet set;
    set.app_id = j.at("app").get<std::uint64_t>();
    set.generation = j.at("generation").get<std::uint64_t>();
    set.created_at = j.at("created_at").get<VTime>();
    for (const auto& je : j.at("images")) {
      set.images.push_back({je.at("vm_index").get<std::uint32_t>(),
                            je.at("size").get<std::uint64_t>()});
    }
    std::sort(set.images.begin(), set.images.end(),
              [](const ImageEntry& a, const ImageEntry& b) { return a.vm_index < b.vm_index; });
    return set;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

CheckpointManager::LocalWrite CheckpointManager::store_local(
    std::uint64_t app_id, const std::vector<std::string>& vm_ids,
    const std::vector<std::vector<std::uint8_t>>& images) {
  if (vm_ids.size() != images.size()) {
    raise(ErrorCode::CountMismatch, "one image per VM required");
  }
  if (cfg_.local_quota_bytes > 0) {
    for (std::size_t i = 0; i < images.size(); ++i) {
      std::uint64_t used = local_bytes_used(vm_ids[i]);
      if (used + images[i].size() > cfg_.local_quota_bytes) {
        raise(ErrorCode::StorageFull,
              vm_ids[i] + ": quota " + std::to_string(cfg_.local_quota_bytes) + " bytes exceeded");
      }
    }
  }

  std::uint64_t generation = ++next_generation_[app_id];
  CheckpointSet set;
  set.app_id = app_id;
  set.generation = generation;
  set.created_at = clock_.now();

  std::uint64_t largest = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::uint32_t idx = static_cast<std::uint32_t>(i);
    vm_stores_[vm_ids[i]][image_key(app_id, generation, idx)] = images[i];
    set.images.push_back({idx, images[i].size()});
    largest = std::max<std::uint64_t>(largest, images[i].size());
  }
  Blob manifest = encode_manifest(set);
  for (const std::string& vm_id : vm_ids) {
    vm_stores_[vm_id][manifest_key(app_id, generation)] = manifest;
  }

  LocalWrite result;
  result.set = set;
  if (cfg_.local_write_bandwidth_bps > 0) {
    result.write_time = static_cast<VDur>(static_cast<double>(largest) /
                                              cfg_.local_write_bandwidth_bps *
                                              static_cast<double>(kMicrosPerSecond) +
                                          0.5);
  }
  trace_.append(clock_.now(), "ckpt",
                "app " + std::to_string(app_id) + " gen " + std::to_string(generation) +
                    " stored locally (" + std::to_string(images.size()) + " images)");
  return result;
}

bool CheckpointManager::remote_has_set(const CheckpointSet& set) {
  if (!remote_->available()) return false;
  if (!remote_->has(manifest_key(set.app_id, set.generation))) return false;
  for (const ImageEntry& e : set.images) {
    if (!remote_->has(image_key(set.app_id, set.generation, e.vm_index))) return false;
  }
  return true;
}

void CheckpointManager::schedule_replication(std::uint64_t app_id, std::uint64_t generation,
                                             std::vector<std::string> vm_ids) {
  std::uint64_t epoch = delete_epoch_[app_id];
  clock_.immediate([this, app_id, generation, vm_ids = std::move(vm_ids), epoch]() mutable {
    run_replication(app_id, generation, std::move(vm_ids), epoch);
  });
}

void CheckpointManager::run_replication(std::uint64_t app_id, std::uint64_t generation,
                                        std::vector<std::string> vm_ids, std::uint64_t epoch) {
  if (epoch != delete_epoch_[app_id]) return;

  // Recover the set description from any surviving local manifest.
  std::optional<CheckpointSet> set;
  for (const std::string& vm_id : vm_ids) {
    auto sit = vm_stores_.find(vm_id);
    if (sit == vm_stores_.end()) continue;
    auto kit = sit->second.find(manifest_key(app_id, generation));
    if (kit == sit->second.end()) continue;
    set = decode_manifest(kit->second);
    if (set) break;
  }
  if (!set) return;  // nothing left to replicate

  if (remote_->available() && remote_has_set(*set)) {
    auto iit = index_.find(app_id);
    if (iit != index_.end()) {
      auto git = iit->second.find(generation);
      if (git != iit->second.end()) git->second.replicated = true;
    }
    return;
  }

  if (!remote_->available()) {
    trace_.append(clock_.now(), "ckpt",
                  "app " + std::to_string(app_id) + " gen " + std::to_string(generation) +
                      " replication deferred (remote offline)");
    clock_.in(cfg_.replication_retry,
              [this, app_id, generation, vm_ids = std::move(vm_ids), epoch]() mutable {
                run_replication(app_id, generation, std::move(vm_ids), epoch);
              });
    return;
  }

  // Collect the blobs while they are still on local disks, then occupy the
  // shared remote link for their combined transfer time.
  std::vector<std::pair<std::string, Blob>> to_put;
  VDur delay = 0;
  for (const ImageEntry& e : set->images) {
    std::string key = image_key(app_id, generation, e.vm_index);
    std::optional<Blob> blob;
    for (auto& [vm_id, store] : vm_stores_) {
      auto kit = store.find(key);
      if (kit != store.end()) {
        blob = kit->second;
        break;
      }
    }
    if (!blob) {
      if (remote_->has(key)) continue;  // already copied earlier
      trace_.append(clock_.now(), "ckpt",
                    "app " + std::to_string(app_id) + " gen " + std::to_string(generation) +
                        " replication abandoned (image lost)");
      return;
    }
    delay = remote_link_.enqueue(blob->size());
    to_put.emplace_back(std::move(key), std::move(*blob));
  }

  Blob manifest = encode_manifest(*set);
  clock_.in(delay, [this, app_id, generation, epoch, to_put = std::move(to_put),
                    manifest = std::move(manifest), vm_ids = std::move(vm_ids)]() mutable {
    if (epoch != delete_epoch_[app_id]) return;
    if (!remote_->available()) {
      clock_.in(cfg_.replication_retry,
                [this, app_id, generation, vm_ids = std::move(vm_ids), epoch]() mutable {
                  run_replication(app_id, generation, std::move(vm_ids), epoch);
                });
      return;
    }
    for (auto& [key, blob] : to_put) remote_->put(key, blob);
    remote_->put(manifest_key(app_id, generation), manifest);
    auto iit = index_.find(app_id);
    if (iit != index_.end()) {
      auto git = iit->second.find(generation);
      if (git != iit->second.end()) git->second.replicated = true;
    }
    trace_.append(clock_.now(), "ckpt",
                  "app " + std::to_string(app_id) + " gen " + std::to_string(generation) +
                      " replicated");
  });
}

void CheckpointManager::index_put(const CheckpointSet& set) {
  index_[set.app_id][set.generation] = set;
}

std::vector<CheckpointSet> CheckpointManager::list(std::uint64_t app_id) {
  std::map<std::uint64_t, CheckpointSet> found;

  for (const auto& [vm_id, store] : vm_stores_) {
    for (const auto& [key, data] : store) {
      if (key.rfind(app_prefix(app_id), 0) != 0) continue;
      if (key.size() < 13 || key.compare(key.size() - 13, 13, "manifest.json") != 0) continue;
      if (auto set = decode_manifest(data)) found[set->generation] = *set;
    }
  }
  if (remote_->available()) {
    for (const std::string& key : remote_->list(app_prefix(app_id))) {
      if (key.size() < 13 || key.compare(key.size() - 13, 13, "manifest.json") != 0) continue;
      if (auto data = remote_->get(key)) {
        if (auto set = decode_manifest(*data)) {
          if (!found.count(set->generation)) found[set->generation] = *set;
        }
      }
    }
  }

  std::vector<CheckpointSet> out;
  for (auto& [generation, set] : found) {
    set.replicated = remote_has_set(set);
    index_put(set);
    // Generations survive manager restarts via the scan: never hand out an
    // already-used number.
    auto& next = next_generation_[app_id];
    next = std::max(next, generation);
    out.push_back(set);
  }
  return out;
}

CheckpointSet CheckpointManager::select_image(std::uint64_t app_id,
                                              std::optional<std::uint64_t> generation) {
  std::vector<CheckpointSet> sets = list(app_id);
  if (generation) {
    for (const CheckpointSet& s : sets) {
      if (s.generation == *generation) return s;
    }
    raise(ErrorCode::UnknownCheckpoint,
          "app " + std::to_string(app_id) + " has no checkpoint " + std::to_string(*generation));
  }
  if (sets.empty()) {
    raise(ErrorCode::NoCheckpoint, "app " + std::to_string(app_id) + " has no checkpoints");
  }
  return sets.back();
}

CheckpointManager::Fetched CheckpointManager::fetch(std::uint64_t app_id,
                                                    const CheckpointSet& set) {
  Fetched out;
  out.set = set;
  for (const ImageEntry& e : set.images) {
    std::string key = image_key(app_id, set.generation, e.vm_index);
    std::optional<Blob> blob;
    for (auto& [vm_id, store] : vm_stores_) {
      auto kit = store.find(key);
      if (kit != store.end()) {
        blob = kit->second;
        break;
      }
    }
    if (!blob) {
      if (!remote_->available()) {
        raise(ErrorCode::RemoteUnavailable, "image " + key + " only on offline remote");
      }
      blob = remote_->get(key);
      if (!blob) raise(ErrorCode::CorruptImage, "image " + key + " lost");
      out.transfer_time = remote_link_.enqueue(blob->size());
    }
    out.images.push_back(std::move(*blob));
  }
  return out;
}

std::optional<CheckpointSet> CheckpointManager::upload_image(std::uint64_t app_id,
                                                             std::uint32_t vm_index,
                                                             std::uint32_t count,
                                                             std::vector<std::uint8_t> data) {
  if (count == 0) raise(ErrorCode::InvalidRequest, "upload count must be positive");
  if (vm_index >= count) {
    raise(ErrorCode::InvalidRequest, "vm_index " + std::to_string(vm_index) +
                                         " out of range for count " + std::to_string(count));
  }
  auto it = uploads_.find(app_id);
  if (it == uploads_.end()) {
    PendingUpload pending;
    pending.generation = ++next_generation_[app_id];
    pending.count = count;
    it = uploads_.emplace(app_id, std::move(pending)).first;
  } else if (it->second.count != count) {
    raise(ErrorCode::CountMismatch,
          "upload declared " + std::to_string(count) + " images, expected " +
              std::to_string(it->second.count));
  }
  PendingUpload& pending = it->second;
  if (pending.pieces.count(vm_index)) {
    raise(ErrorCode::UploadFailed, "image " + std::to_string(vm_index) + " already uploaded");
  }
  pending.pieces[vm_index] = std::move(data);
  if (pending.pieces.size() < pending.count) return std::nullopt;

  CheckpointSet set;
  set.app_id = app_id;
  set.generation = pending.generation;
  set.created_at = clock_.now();
  try {
    for (auto& [idx, blob] : pending.pieces) {
      remote_->put(image_key(app_id, set.generation, idx), blob);
      set.images.push_back({idx, blob.size()});
    }
    remote_->put(manifest_key(app_id, set.generation), encode_manifest(set));
  } catch (...) {
    // Keep the staged pieces minus the one just added so the final POST can
    // be retried once the remote store is back.
    pending.pieces.erase(vm_index);
    throw;
  }
  set.replicated = true;
  index_put(set);
  uploads_.erase(it);
  trace_.append(clock_.now(), "ckpt",
                "app " + std::to_string(app_id) + " gen " + std::to_string(set.generation) +
                    " uploaded (" + std::to_string(set.images.size()) + " images)");
  return set;
}

void CheckpointManager::delete_set(std::uint64_t app_id, std::uint64_t generation) {
  std::vector<CheckpointSet> sets = list(app_id);
  bool known = false;
  for (const CheckpointSet& s : sets) known = known || s.generation == generation;
  if (!known) {
    raise(ErrorCode::UnknownCheckpoint,
          "app " + std::to_string(app_id) + " has no checkpoint " + std::to_string(generation));
  }
  std::string prefix = set_prefix(app_id, generation);
  for (auto& [vm_id, store] : vm_stores_) {
    for (auto kit = store.begin(); kit != store.end();) {
      if (kit->first.rfind(prefix, 0) == 0) kit = store.erase(kit);
      else ++kit;
    }
  }
  for (const std::string& key : remote_->list(prefix)) remote_->del(key);
  auto iit = index_.find(app_id);
  if (iit != index_.end()) iit->second.erase(generation);
  trace_.append(clock_.now(), "ckpt",
                "app " + std::to_string(app_id) + " gen " + std::to_string(generation) +
                    " deleted");
}

void CheckpointManager::delete_all(std::uint64_t app_id) {
  ++delete_epoch_[app_id];
  uploads_.erase(app_id);
  std::string prefix = app_prefix(app_id);
  for (auto& [vm_id, store] : vm_stores_) {
    for (auto kit = store.begin(); kit != store.end();) {
      if (kit->first.rfind(prefix, 0) == 0) kit = store.erase(kit);
      else ++kit;
    }
  }
  index_.erase(app_id);
  if (remote_->available()) {
    for (const std::string& key : remote_->list(prefix)) remote_->del(key);
  } else {
    // Remote wipe has to wait out the outage; repeating it is idempotent.
    clock_.in(cfg_.replication_retry, [this, app_id] {
      if (remote_->available()) {
        for (const std::string& key : remote_->list(app_prefix(app_id))) remote_->del(key);
      } else {
        delete_all(app_id);
      }
    });
  }
  trace_.append(clock_.now(), "ckpt", "app " + std::to_string(app_id) + " storage cleared");
}

void CheckpointManager::drop_vm_store(const std::string& vm_id) { vm_stores_.erase(vm_id); }

std::vector<CheckpointSet> CheckpointManager::known_sets(std::uint64_t app_id) const {
  std::vector<CheckpointSet> out;
  auto it = index_.find(app_id);
  if (it == index_.end()) return out;
  for (const auto& [generation, set] : it->second) out.push_back(set);
  return out;
}

std::uint64_t CheckpointManager::local_bytes_used() const {
  std::uint64_t total = 0;
  for (const auto& [vm_id, store] : vm_stores_) {
    for (const auto& [key, data] : store) total += data.size();
  }
  return total;
}

std::uint64_t CheckpointManager::local_bytes_used(const std::string& vm_id) const {
  std::uint64_t total = 0;
  auto it = vm_stores_.find(vm_id);
  if (it == vm_stores_.end()) return 0;
  for (const auto& [key, data] : it->second) total += data.size();
  return total;
}

}  // namespace cacs

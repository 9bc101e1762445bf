#include "cacs/cloudsim.hpp"

#include <utility>

#include "cacs/errors.hpp"

namespace cacs {

Backend::Backend(BackendProfile profile, EventQueue& clock, TraceLog& trace, NetMeter& net,
                 std::uint64_t seed)
    : profile_(std::move(profile)),
      clock_(clock),
      trace_(trace),
      net_(net),
      rng_(mix_seed(seed, fnv1a(profile_.name))),
      idle_(profile_.capacity) {}

VirtualCluster Backend::create_cluster(const std::vector<VmTemplate>& templates,
                                       std::function<void(const VirtualCluster&)> on_ready) {
  int n = static_cast<int>(templates.size());
  if (n == 0) raise(ErrorCode::InvalidRequest, "cluster must have at least one VM");
  if (idle_ < n) {
    raise(ErrorCode::ClusterUnavailable,
          name() + ": requested " + std::to_string(n) + " VMs, " + std::to_string(idle_) +
              " idle");
  }
  idle_ -= n;

  std::uint64_t claim_id = next_claim_++;
  Claim claim;
  claim.pending = n;
  claim.on_ready = std::move(on_ready);
  claim.started_at = clock_.now();
  claim.poll_flow = net_.open("poll", profile_.poll_bytes_per_s);

  VirtualCluster cluster;
  cluster.backend_id = name();
  cluster.created_at = clock_.now();
  for (int i = 0; i < n; ++i) {
    std::string vm_id = name() + "-vm" + std::to_string(next_vm_serial_++);
    VmRec rec;
    rec.desc = {vm_id, name(), "10.64." + std::to_string(claim_id) + "." + std::to_string(i),
                VmStatus::BOOTING};
    rec.claim = claim_id;
    vms_[vm_id] = std::move(rec);
    cluster.vm_ids.push_back(vm_id);
    claim.vm_ids.push_back(vm_id);
    boot_queue_.push_back(vm_id);
  }
  claims_[claim_id] = std::move(claim);
  trace_.append(clock_.now(), "cloud",
                name() + " claim " + std::to_string(claim_id) + " size " + std::to_string(n));
  pump_boots();
  return cluster;
}

void Backend::pump_boots() {
  while (!boot_queue_.empty() &&
         (profile_.max_concurrent_boots == 0 || active_boots_ < profile_.max_concurrent_boots)) {
    std::string vm_id = boot_queue_.front();
    boot_queue_.pop_front();
    ++active_boots_;
    VDur d = profile_.boot_latency;
    if (profile_.boot_jitter > 0) d += static_cast<VDur>(rng_.below(profile_.boot_jitter + 1));
    clock_.in(d, [this, vm_id] { finish_boot(vm_id); });
  }
}

void Backend::finish_boot(const std::string& vm_id) {
  --active_boots_;
  auto it = vms_.find(vm_id);
  if (it != vms_.end()) {
    VmRec& rec = it->second;
    rec.desc.status = VmStatus::UP;
    auto cit = claims_.find(rec.claim);
    if (rec.doomed) {
      release_internal(rec);
    } else {
      trace_.append(clock_.now(), "cloud", vm_id + " UP");
    }
    if (cit != claims_.end()) {
      Claim& claim = cit->second;
      if (--claim.pending == 0) {
        std::uint64_t claim_id = rec.claim;
        if (!claim.canceled) {
          net_.close(claim.poll_flow);
          VirtualCluster cluster{name(), claim.vm_ids, claim.started_at};
          auto cb = std::move(claim.on_ready);
          trace_.append(clock_.now(), "cloud",
                        name() + " claim " + std::to_string(claim_id) + " ready");
          claims_.erase(cit);
          if (cb) cb(cluster);
        } else {
          claims_.erase(cit);
        }
      }
    }
  }
  pump_boots();
}

void Backend::cancel_claim(Claim& claim) {
  if (claim.canceled) return;
  claim.canceled = true;
  claim.on_ready = nullptr;
  net_.close(claim.poll_flow);
}

void Backend::release_internal(VmRec& rec) {
  rec.desc.status = VmStatus::RELEASED;
  ++idle_;
  trace_.append(clock_.now(), "cloud", rec.desc.vm_id + " released");
}

void Backend::destroy_cluster(const VirtualCluster& cluster) {
  for (const std::string& vm_id : cluster.vm_ids) {
    auto it = vms_.find(vm_id);
    if (it == vms_.end()) continue;
    VmRec& rec = it->second;
    switch (rec.desc.status) {
      case VmStatus::RELEASED:
        break;
      case VmStatus::BOOTING: {
        rec.doomed = true;
        auto cit = claims_.find(rec.claim);
        if (cit != claims_.end()) cancel_claim(cit->second);
        break;
      }
      case VmStatus::UP:
      case VmStatus::UNREACHABLE: {
        auto cit = claims_.find(rec.claim);
        if (cit != claims_.end()) cancel_claim(cit->second);
        release_internal(rec);
        break;
      }
    }
  }
}

void Backend::release_vm(const std::string& vm_id) {
  auto it = vms_.find(vm_id);
  if (it == vms_.end()) raise(ErrorCode::UnknownVm, "no such VM: " + vm_id);
  VmRec& rec = it->second;
  if (rec.desc.status == VmStatus::RELEASED) return;
  if (rec.desc.status == VmStatus::BOOTING) {
    rec.doomed = true;
    return;
  }
  release_internal(rec);
}

void Backend::inject_failure(const std::string& vm_id) {
  auto it = vms_.find(vm_id);
  if (it == vms_.end() || it->second.desc.status == VmStatus::RELEASED) {
    raise(ErrorCode::UnknownVm, "no live VM: " + vm_id);
  }
  VmRec& rec = it->second;
  if (rec.desc.status != VmStatus::UP) {
    raise(ErrorCode::StateConflict, vm_id + " is not UP");
  }
  rec.desc.status = VmStatus::UNREACHABLE;
  trace_.append(clock_.now(), "cloud", vm_id + " UNREACHABLE");
  if (profile_.has_failure_notifications && failure_listener_) {
    auto listener = failure_listener_;
    clock_.immediate([listener, vm_id] { listener(vm_id); });
  }
}

const VmDescriptor& Backend::vm(const std::string& vm_id) const {
  auto it = vms_.find(vm_id);
  if (it == vms_.end()) raise(ErrorCode::UnknownVm, "no such VM: " + vm_id);
  return it->second.desc;
}

bool Backend::vm_reachable(const std::string& vm_id) const {
  auto it = vms_.find(vm_id);
  return it != vms_.end() && it->second.desc.status == VmStatus::UP;
}

Backend::PoolAudit Backend::audit() const {
  PoolAudit a;
  a.capacity = profile_.capacity;
  a.idle = idle_;
  for (const auto& [id, rec] : vms_) {
    switch (rec.desc.status) {
      case VmStatus::BOOTING: ++a.booting; break;
      case VmStatus::UP: ++a.up; break;
      case VmStatus::UNREACHABLE: ++a.unreachable; break;
      case VmStatus::RELEASED: break;
    }
  }
  a.consistent = (a.idle + a.booting + a.up + a.unreachable == a.capacity);
  return a;
}

CloudManager::CloudManager(const Config& config, EventQueue& clock, TraceLog& trace, NetMeter& net,
                           std::uint64_t seed) {
  for (const auto& [name, profile] : config.backends) {
    backends_[name] = std::make_unique<Backend>(profile, clock, trace, net, seed);
  }
}

Backend& CloudManager::backend(const std::string& name) {
  auto it = backends_.find(name);
  if (it == backends_.end()) raise(ErrorCode::UnknownBackend, "no such backend: " + name);
  return *it->second;
}

std::vector<std::string> CloudManager::backend_names() const {
  std::vector<std::string> names;
  for (const auto& [name, b] : backends_) names.push_back(name);
  return names;
}

Backend& CloudManager::backend_of_vm(const std::string& vm_id) {
  for (auto& [name, b] : backends_) {
    if (b->has_vm(vm_id)) return *b;
  }
  raise(ErrorCode::UnknownVm, "no backend owns VM " + vm_id);
}

}  // namespace cacs

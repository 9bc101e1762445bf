#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "cacs/vtime.hpp"

namespace cacs {

struct VmTemplate {
  int vcpus = 1;
  int memory_mb = 1024;
  std::string image_name = "base";
};

enum class VmStatus { BOOTING, UP, UNREACHABLE, RELEASED };

std::string_view vm_status_name(VmStatus s);

// Point-in-time view of one VM; authoritative status lives with the backend.
struct VmDescriptor {
  std::string vm_id;
  std::string backend_id;
  std::string address;
  VmStatus status = VmStatus::BOOTING;
};

// The set of interconnected VMs hosting one application. All VMs belong to
// the same backend.
struct VirtualCluster {
  std::string backend_id;
  std::vector<std::string> vm_ids;
  VTime created_at = 0;

  std::size_t size() const { return vm_ids.size(); }
};

}  // namespace cacs

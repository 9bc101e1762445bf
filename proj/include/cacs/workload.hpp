#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace cacs {

enum class WorkloadKind { RingSum, SingleCounter };

std::string_view workload_kind_name(WorkloadKind k);
WorkloadKind parse_workload_kind(const std::string& name);

// Deterministic stand-in workloads. RingSum circulates a token around the
// process ring accumulating seeded per-process contributions; SingleCounter
// is a one-process iteration counter.
struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::SingleCounter;
  std::uint64_t iterations = 1;
  std::uint32_t payload_bytes_per_msg = 64;
  std::uint64_t state_bytes_total = 4096;
};

}  // namespace cacs

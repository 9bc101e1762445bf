#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace cacs {

// One undelivered in-flight message captured in a checkpoint cut.
struct WireMessage {
  std::uint32_t src = 0;
  std::uint64_t round = 0;
  std::uint64_t value = 0;
  std::vector<std::uint8_t> payload;

  bool operator==(const WireMessage&) const = default;
};

// Complete serializable state of one workload process. Positions are logical
// (vm_index), so a blob restores onto any VM of any backend.
struct ProcessState {
  std::uint32_t vm_index = 0;
  std::uint64_t iteration = 0;
  std::uint64_t accumulator = 0;
  std::uint64_t rng_state = 0;
  std::vector<WireMessage> inbox;
  std::vector<std::uint8_t> padding;

  bool operator==(const ProcessState&) const = default;
};

// Image blob layout (little-endian, bit-exact):
//   'C' 'K'  version:u8=1  flags:u8=0
//   vm_index:u32  iteration:u64  accumulator:u64  rng_state:u64
//   inbox_count:u32  { src:u32 round:u64 value:u64 len:u32 payload[len] }*
//   padding_len:u32  padding[padding_len]
//   crc32:u32 over all preceding bytes
std::vector<std::uint8_t> encode_process_state(const ProcessState& st);

// Throws CacsError(CorruptImage) on bad magic/version, truncation, or
// checksum mismatch.
ProcessState decode_process_state(std::span<const std::uint8_t> blob);

// Encoded size without building the blob.
std::size_t encoded_size(const ProcessState& st);

}  // namespace cacs

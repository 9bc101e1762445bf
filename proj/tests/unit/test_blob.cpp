#include "doctest.h"

#include <zlib.h>

#include <string>
#include <vector>

#include "cacs/blob.hpp"
#include "cacs/errors.hpp"
#include "cacs/rng.hpp"

using namespace cacs;

namespace {

ProcessState random_state(SplitMix64& r) {
  ProcessState st;
  st.vm_index = static_cast<std::uint32_t>(r.below(64));
  st.iteration = r.next();
  st.accumulator = r.next();
  st.rng_state = r.next();
  std::uint64_t msgs = r.below(4);
  for (std::uint64_t i = 0; i < msgs; ++i) {
    WireMessage m;
    m.src = static_cast<std::uint32_t>(r.below(64));
    m.round = r.next();
    m.value = r.next();
    m.payload.resize(r.below(100));
    for (auto& b : m.payload) b = static_cast<std::uint8_t>(r.next());
    st.inbox.push_back(std::move(m));
  }
  st.padding.resize(r.below(512));
  for (auto& b : st.padding) b = static_cast<std::uint8_t>(r.next());
  return st;
}

}  // namespace

TEST_CASE("serialization round-trips 1200 randomized process states") {
  SplitMix64 r(2024);
  for (int i = 0; i < 1200; ++i) {
    ProcessState st = random_state(r);
    std::vector<std::uint8_t> blob = encode_process_state(st);
    CHECK(blob.size() == encoded_size(st));
    ProcessState back = decode_process_state(blob);
    REQUIRE(back == st);
  }
}

TEST_CASE("an empty state still carries the fixed framing") {
  ProcessState st;
  std::vector<std::uint8_t> blob = encode_process_state(st);
  // magic+version+flags, vm_index, iteration/accumulator/rng, inbox count,
  // padding length, crc.
  CHECK(blob.size() == 4 + 4 + 24 + 4 + 4 + 4);
  CHECK(blob[0] == 'C');
  CHECK(blob[1] == 'K');
  CHECK(decode_process_state(blob) == st);
}

TEST_CASE("every single-byte flip is detected") {
  SplitMix64 r(7);
  ProcessState st = random_state(r);
  st.padding.resize(40);
  std::vector<std::uint8_t> blob = encode_process_state(st);
  for (std::size_t i = 0; i < blob.size(); ++i) {
    std::vector<std::uint8_t> bad = blob;
    bad[i] ^= 0x40;
    CAPTURE(i);
    try {
      decode_process_state(bad);
      FAIL("expected CorruptImage at byte ", i);
    } catch (const CacsError& e) {
      CHECK(e.code() == ErrorCode::CorruptImage);
    }
  }
}

TEST_CASE("truncated and padded images are rejected") {
  std::vector<std::uint8_t> blob = encode_process_state(ProcessState{});
  for (std::size_t keep : {std::size_t{0}, std::size_t{3}, blob.size() - 1}) {
    std::vector<std::uint8_t> cut(blob.begin(), blob.begin() + static_cast<long>(keep));
    CHECK_THROWS_AS(decode_process_state(cut), CacsError);
  }
  std::vector<std::uint8_t> extended = blob;
  extended.push_back(0);
  CHECK_THROWS_AS(decode_process_state(extended), CacsError);
}

TEST_CASE("a different version byte is rejected even with a recomputed checksum") {
  std::vector<std::uint8_t> blob = encode_process_state(ProcessState{});
  blob[2] = 9;
  std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(blob.data()),
            static_cast<uInt>(blob.size() - 4)));
  for (int i = 0; i < 4; ++i) blob[blob.size() - 4 + i] = (crc >> (8 * i)) & 0xff;
  try {
    decode_process_state(blob);
    FAIL("expected CorruptImage");
  } catch (const CacsError& e) {
    CHECK(e.code() == ErrorCode::CorruptImage);
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }
}

TEST_CASE("encoded size grows with payload and padding exactly") {
  ProcessState st;
  std::size_t base = encoded_size(st);
  st.padding.resize(100);
  CHECK(encoded_size(st) == base + 100);
  WireMessage m;
  m.payload.resize(10);
  st.inbox.push_back(m);
  CHECK(encoded_size(st) == base + 100 + 24 + 10);
}

#include "cacs/blob.hpp"

#include <zlib.h>

#include "cacs/errors.hpp"

namespace cacs {
namespace {

constexpr std::uint8_t kMagic0 = 'C';
constexpr std::uint8_t kMagic1 = 'K';
constexpr std::uint8_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
  out.push_back((v >> 16) & 0xff);
  out.push_back((v >> 24) & 0xff);
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

std::uint32_t crc_of(std::span<const std::uint8_t> data) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
}

struct Reader {
  std::span<const std::uint8_t> data;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > data.size()) raise(ErrorCode::CorruptImage, "image truncated");
  }
  std::uint8_t u8() {
    need(1);
    return data[pos++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data[pos++]) << (8 * i);
    return v;
  }
  std::vector<std::uint8_t> bytes(std::size_t n) {
    need(n);
    std::vector<std::uint8_t> out(data.begin() + static_cast<long>(pos),
                                  data.begin() + static_cast<long>(pos + n));
    pos += n;
    return out;
  }
};

}  // namespace

std::size_t encoded_size(const ProcessState& st) {
  std::size_t n = 2 + 1 + 1 + 4 + 8 + 8 + 8 + 4;
  for (const WireMessage& m : st.inbox) n += 4 + 8 + 8 + 4 + m.payload.size();
  n += 4 + st.padding.size();
  n += 4;  // crc
  return n;
}

std::vector<std::uint8_t> encode_process_state(const ProcessState& st) {
  std::vector<std::uint8_t> out;
  out.reserve(encoded_size(st));
  out.push_back(kMagic0);
  out.push_back(kMagic1);
  out.push_back(kVersion);
  out.push_back(0);  // flags
  put_u32(out, st.vm_index);
  put_u64(out, st.iteration);
  put_u64(out, st.accumulator);
  put_u64(out, st.rng_state);
  put_u32(out, static_cast<std::uint32_t>(st.inbox.size()));
  for (const WireMessage& m : st.inbox) {
    put_u32(out, m.src);
    put_u64(out, m.round);
    put_u64(out, m.value);
    put_u32(out, static_cast<std::uint32_t>(m.payload.size()));
    out.insert(out.end(), m.payload.begin(), m.payload.end());
  }
  put_u32(out, static_cast<std::uint32_t>(st.padding.size()));
  out.insert(out.end(), st.padding.begin(), st.padding.end());
  put_u32(out, crc_of(out));
  return out;
}

ProcessState decode_process_state(std::span<const std::uint8_t> blob) {
  if (blob.size() < 2 + 1 + 1 + 4 + 8 + 8 + 8 + 4 + 4 + 4) {
    raise(ErrorCode::CorruptImage, "image too small");
  }
  std::span<const std::uint8_t> body = blob.first(blob.size() - 4);
  Reader tail{blob, blob.size() - 4};
  if (tail.u32() != crc_of(body)) raise(ErrorCode::CorruptImage, "image checksum mismatch");

  Reader r{body};
  if (r.u8() != kMagic0 || r.u8() != kMagic1) raise(ErrorCode::CorruptImage, "bad image magic");
  if (r.u8() != kVersion) raise(ErrorCode::CorruptImage, "unsupported image version");
  r.u8();  // flags

  ProcessState st;
  st.vm_index = r.u32();
  st.iteration = r.u64();
  st.accumulator = r.u64();
  st.rng_state = r.u64();
  std::uint32_t inbox_count = r.u32();
  st.inbox.reserve(inbox_count);
  for (std::uint32_t i = 0; i < inbox_count; ++i) {
    WireMessage m;
    m.src = r.u32();
    m.round = r.u64();
    m.value = r.u64();
    std::uint32_t len = r.u32();
    m.payload = r.bytes(len);
    st.inbox.push_back(std::move(m));
  }
  std::uint32_t padding_len = r.u32();
  st.padding = r.bytes(padding_len);
  if (r.pos != body.size()) raise(ErrorCode::CorruptImage, "trailing bytes in image");
  return st;
}

}  // namespace cacs

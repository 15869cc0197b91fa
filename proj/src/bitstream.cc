// Copyright 2026 The Psycal Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "psycal/bitstream.h"

#include <bit>
#include <cstring>
#include <stdexcept>
#include <string>

#include "psycal/errors.h"
#include "psycal/quantizer.h"

namespace psycal {

namespace {

constexpr char kMagic[4] = {'P', 'S', 'Y', 'B'};

class ByteSink {
 public:
  void U8(std::uint8_t v) { out_.push_back(v); }
  void U16(std::uint16_t v) { Int(v, 2); }
  void U32(std::uint32_t v) { Int(v, 4); }
  void U64(std::uint64_t v) { Int(v, 8); }
  void F32(float v) { U32(std::bit_cast<std::uint32_t>(v)); }
  void Bytes(std::span<const std::uint8_t> b) {
    out_.insert(out_.end(), b.begin(), b.end());
  }
  std::vector<std::uint8_t> Take() { return std::move(out_); }

 private:
  void Int(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class ByteSource {
 public:
  explicit ByteSource(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint8_t U8() { return static_cast<std::uint8_t>(Int(1)); }
  std::uint16_t U16() { return static_cast<std::uint16_t>(Int(2)); }
  std::uint32_t U32() { return static_cast<std::uint32_t>(Int(4)); }
  std::uint64_t U64() { return Int(8); }
  float F32() { return std::bit_cast<float>(U32()); }
  std::span<const std::uint8_t> Bytes(std::size_t n) {
    Need(n);
    auto out = in_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void Need(std::size_t n) const {
    if (in_.size() - pos_ < n) {
      throw DataError("bitstream truncated at byte " + std::to_string(pos_));
    }
  }
  std::uint64_t Int(int width) {
    Need(width);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= std::uint64_t{in_[pos_ + i]} << (8 * i);
    pos_ += width;
    return v;
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

SerializedBitstream SerializeBitstream(const Bitstream& stream) {
  const std::size_t modules = stream.module_count();
  const std::size_t k = stream.alphabet_size();
  if (modules == 0 || k == 0 || k > 0xFFFF || modules > 0xFFFF) {
    throw std::invalid_argument("bitstream needs 1..65535 modules and kernels");
  }
  for (const auto& row : stream.kernels) {
    if (row.size() != k) throw std::invalid_argument("ragged kernel table");
  }
  const std::uint64_t expected =
      std::uint64_t{stream.frame_count} * modules * stream.code_length;
  if (stream.indices.size() != expected) {
    throw std::invalid_argument("index count does not match frame geometry");
  }
  const HuffmanEncoded coded = HuffmanEncode(stream.indices, k);

  ByteSink sink;
  for (char c : kMagic) sink.U8(static_cast<std::uint8_t>(c));
  sink.U16(kBitstreamVersion);
  sink.U16(static_cast<std::uint16_t>(k));
  sink.U16(static_cast<std::uint16_t>(modules));
  sink.U16(0);
  sink.U32(stream.sample_rate);
  sink.U32(stream.frame_length);
  sink.U32(stream.overlap);
  sink.U32(stream.code_length);
  sink.U32(stream.frame_count);
  sink.U64(stream.sample_count);
  for (const auto& row : stream.kernels) {
    for (float v : row) sink.F32(v);
  }
  sink.Bytes(coded.table.lengths());
  sink.U64(coded.bits.bit_count);
  sink.Bytes(coded.bits.bytes);
  return {sink.Take(), coded.bits.bit_count};
}

Bitstream ParseBitstream(std::span<const std::uint8_t> bytes) {
  ByteSource src(bytes);
  const auto magic = src.Bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw DataError("not a psycal bitstream (bad magic)");
  }
  const std::uint16_t version = src.U16();
  if (version != kBitstreamVersion) {
    throw DataError("unsupported bitstream version " + std::to_string(version));
  }
  const std::size_t k = src.U16();
  const std::size_t modules = src.U16();
  if (src.U16() != 0) throw DataError("reserved header field is nonzero");
  if (k == 0 || modules == 0) throw DataError("empty kernel table");

  Bitstream out;
  out.sample_rate = src.U32();
  out.frame_length = src.U32();
  out.overlap = src.U32();
  out.code_length = src.U32();
  out.frame_count = src.U32();
  out.sample_count = src.U64();
  out.kernels.assign(modules, std::vector<float>(k));
  for (auto& row : out.kernels) {
    for (float& v : row) v = src.F32();
  }
  const auto length_bytes = src.Bytes(k);
  const HuffmanTable table = HuffmanTable::FromLengths(
      std::vector<std::uint8_t>(length_bytes.begin(), length_bytes.end()));
  BitString payload;
  payload.bit_count = src.U64();
  const std::size_t payload_bytes = (payload.bit_count + 7) / 8;
  if (payload_bytes != src.remaining()) {
    throw DataError(payload_bytes > src.remaining()
                        ? "bitstream payload truncated"
                        : "trailing bytes after payload");
  }
  const auto body = src.Bytes(payload_bytes);
  payload.bytes.assign(body.begin(), body.end());
  const std::uint64_t count =
      std::uint64_t{out.frame_count} * modules * out.code_length;
  if (count > payload.bit_count) {
    throw DataError("payload too short for declared frame geometry");
  }
  out.indices = HuffmanDecode(payload, table, count);
  return out;
}

}  // namespace psycal

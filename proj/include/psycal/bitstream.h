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

#ifndef PSYCAL_BITSTREAM_H_
#define PSYCAL_BITSTREAM_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace psycal {

inline constexpr std::uint16_t kBitstreamVersion = 1;

// Coded clip. All integers little-endian:
//   "PSYB" | u16 version | u16 K | u16 modules | u16 reserved (0)
//   u32 sample_rate | u32 frame_length | u32 overlap | u32 code_length
//   u32 frame_count | u64 sample_count
//   f32 kernels[modules][K] | u8 code_lengths[K]
//   u64 payload_bits | payload bytes
// The payload holds canonical Huffman codes of kernel indices, frame-major,
// then module in cascade order, then code position. Unused bits of the last
// byte are zero.
struct Bitstream {
  std::uint32_t sample_rate = 0;
  std::uint32_t frame_length = 0;
  std::uint32_t overlap = 0;
  std::uint32_t code_length = 0;
  std::uint32_t frame_count = 0;
  std::uint64_t sample_count = 0;
  std::vector<std::vector<float>> kernels;  // [module][K]
  // frame_count * modules * code_length entries in payload order.
  std::vector<std::uint32_t> indices;

  std::size_t module_count() const { return kernels.size(); }
  std::size_t alphabet_size() const {
    return kernels.empty() ? 0 : kernels.front().size();
  }
};

struct SerializedBitstream {
  std::vector<std::uint8_t> bytes;
  std::uint64_t payload_bits = 0;
};

// Builds the per-clip Huffman table from the indices and writes the stream.
SerializedBitstream SerializeBitstream(const Bitstream& stream);

// Throws DataError on bad magic, version, truncation or trailing data.
Bitstream ParseBitstream(std::span<const std::uint8_t> bytes);

}  // namespace psycal

#endif  // PSYCAL_BITSTREAM_H_

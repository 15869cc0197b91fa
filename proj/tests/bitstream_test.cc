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

#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include "psycal/errors.h"

namespace psycal {
namespace {

Bitstream SampleStream(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint32_t> pick(0, 7);
  std::normal_distribution<float> g;
  Bitstream s;
  s.sample_rate = 44100;
  s.frame_length = 512;
  s.overlap = 32;
  s.code_length = 6;
  s.frame_count = 5;
  s.sample_count = 2432;
  s.kernels.assign(2, std::vector<float>(8));
  for (auto& row : s.kernels) {
    for (float& v : row) v = g(rng);
  }
  s.indices.resize(5 * 2 * 6);
  for (auto& i : s.indices) i = pick(rng);
  return s;
}

std::uint32_t ReadU32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return b[at] | (b[at + 1] << 8) | (b[at + 2] << 16) |
         (std::uint32_t{b[at + 3]} << 24);
}

TEST(BitstreamTest, RoundTrip) {
  const Bitstream in = SampleStream(1);
  const SerializedBitstream bytes = SerializeBitstream(in);
  const Bitstream out = ParseBitstream(bytes.bytes);
  EXPECT_EQ(out.sample_rate, in.sample_rate);
  EXPECT_EQ(out.frame_length, in.frame_length);
  EXPECT_EQ(out.overlap, in.overlap);
  EXPECT_EQ(out.code_length, in.code_length);
  EXPECT_EQ(out.frame_count, in.frame_count);
  EXPECT_EQ(out.sample_count, in.sample_count);
  EXPECT_EQ(out.kernels, in.kernels);
  EXPECT_EQ(out.indices, in.indices);
}

TEST(BitstreamTest, HeaderLayoutIsLittleEndian) {
  const Bitstream in = SampleStream(2);
  const auto b = SerializeBitstream(in).bytes;
  ASSERT_GE(b.size(), 40u);
  EXPECT_EQ(std::memcmp(b.data(), "PSYB", 4), 0);
  EXPECT_EQ(b[4] | (b[5] << 8), kBitstreamVersion);
  EXPECT_EQ(b[6] | (b[7] << 8), 8);
  EXPECT_EQ(b[8] | (b[9] << 8), 2);
  EXPECT_EQ(ReadU32(b, 12), 44100u);
  EXPECT_EQ(ReadU32(b, 16), 512u);
  EXPECT_EQ(ReadU32(b, 28), 5u);
  float k0 = 0.0f;
  std::memcpy(&k0, b.data() + 40, 4);
  EXPECT_EQ(k0, in.kernels[0][0]);
}

TEST(BitstreamTest, SizeMatchesPayloadBits) {
  const SerializedBitstream s = SerializeBitstream(SampleStream(3));
  // 40-byte header, 16 f32 kernels, 8 code lengths, u64 bit count.
  EXPECT_EQ(s.bytes.size(), 40 + 16 * 4 + 8 + 8 + (s.payload_bits + 7) / 8);
}

TEST(BitstreamTest, Deterministic) {
  EXPECT_EQ(SerializeBitstream(SampleStream(4)).bytes,
            SerializeBitstream(SampleStream(4)).bytes);
}

TEST(BitstreamTest, RejectsBadMagic) {
  auto b = SerializeBitstream(SampleStream(5)).bytes;
  b[0] = 'X';
  EXPECT_THROW(ParseBitstream(b), DataError);
}

TEST(BitstreamTest, RejectsBadVersion) {
  auto b = SerializeBitstream(SampleStream(6)).bytes;
  b[4] = 9;
  EXPECT_THROW(ParseBitstream(b), DataError);
}

TEST(BitstreamTest, RejectsTruncation) {
  const auto b = SerializeBitstream(SampleStream(7)).bytes;
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{20},
                          b.size() - 1}) {
    const std::vector<std::uint8_t> part(b.begin(), b.begin() + cut);
    EXPECT_THROW(ParseBitstream(part), DataError) << cut;
  }
}

TEST(BitstreamTest, RejectsTrailingBytes) {
  auto b = SerializeBitstream(SampleStream(8)).bytes;
  b.push_back(0);
  EXPECT_THROW(ParseBitstream(b), DataError);
}

TEST(BitstreamTest, RejectsInconsistentInput) {
  Bitstream s = SampleStream(9);
  s.indices.pop_back();
  EXPECT_THROW(SerializeBitstream(s), std::invalid_argument);
  s = SampleStream(9);
  s.kernels[1].pop_back();
  EXPECT_THROW(SerializeBitstream(s), std::invalid_argument);
}

}  // namespace
}  // namespace psycal

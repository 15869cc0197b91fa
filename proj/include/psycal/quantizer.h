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

#ifndef PSYCAL_QUANTIZER_H_
#define PSYCAL_QUANTIZER_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace psycal {

inline constexpr double kDefaultAlpha = 300.0;
inline constexpr double kRateControlStep = 0.015;

// K trainable scalar representatives and the softmax scale.
struct Codebook {
  std::vector<double> kernels;
  double alpha = kDefaultAlpha;

  std::size_t size() const { return kernels.size(); }
  // Throws std::invalid_argument on K == 0, alpha <= 0 or non-finite kernels.
  void Validate() const;
};

// Kernels at evenly spaced quantiles of `data`, sorted ascending.
Codebook CodebookFromQuantiles(std::span<const double> data, std::size_t k,
                               double alpha = kDefaultAlpha);

struct Assignment {
  // softmax(-alpha * (z - kernel_k)^2).
  std::vector<double> soft;
  // Nearest kernel, lowest index on ties.
  std::size_t hard_index = 0;
  double soft_value = 0.0;  // soft . kernels
  double hard_value = 0.0;  // kernels[hard_index]

  std::vector<double> OneHot() const;
};

Assignment SoftAssign(double z, const Codebook& codebook);

enum class QuantMode { kSoft, kHard };

struct QuantizedCode {
  std::vector<double> values;
  std::vector<Assignment> assignments;
  std::vector<std::uint32_t> indices;
};

QuantizedCode QuantizeVector(std::span<const double> z,
                             const Codebook& codebook, QuantMode mode);

// Accumulates gradients of a loss through the soft path h_c = a_c . kernels:
// dz[c] += dL/dz_c and dkernels[k] += dL/dkernel_k given dh[c] = dL/dh_c.
void SoftQuantizeBackward(std::span<const double> z, const Codebook& codebook,
                          std::span<const Assignment> assignments,
                          std::span<const double> dh, std::span<double> dz,
                          std::span<double> dkernels);

enum class EntropyEstimator {
  kSoft,  // p from mean soft assignments (differentiable)
  kHard,  // p from hard counts
};

struct AssignmentStats {
  std::vector<double> probs;
  double entropy_bits = 0.0;
  // Quantized features per second, |h|.
  double feature_rate = 0.0;
};

AssignmentStats ComputeEntropy(std::span<const Assignment> assignments,
                               EntropyEstimator estimator,
                               double feature_rate = 0.0);

// Entropy in bits of a probability vector (zero entries contribute 0).
double EntropyOf(std::span<const double> probs);

// Accumulates `weight` * dH_soft/dz and dH_soft/dkernels for the soft
// entropy of the given assignments.
void SoftEntropyBackward(std::span<const double> z, const Codebook& codebook,
                         std::span<const Assignment> assignments,
                         double weight, std::span<double> dz,
                         std::span<double> dkernels);

// Features per second from sample rate, frame hop, code length per module
// and module count.
double FeatureRate(double sample_rate, std::size_t hop,
                   std::size_t code_length, std::size_t modules);

// |h| * H(h) in bits per second.
double BitrateLowerBound(const AssignmentStats& stats);

// Integral controller for the entropy regularizer weight.
struct RateController {
  double target_bps = 0.0;
  double blend_weight = 0.0;
  double step = kRateControlStep;
};

// +step when measured exceeds target, -step otherwise; never below zero.
RateController RateControllerStep(RateController controller,
                                  double measured_bps);

// Gradient descent on mean soft quantization SSE; returns the final SSE.
double FitCodebook(std::span<const double> data, Codebook& codebook,
                   std::size_t steps, double learning_rate);

struct BitString {
  std::vector<std::uint8_t> bytes;
  std::size_t bit_count = 0;
};

class BitWriter {
 public:
  // Appends the low `length` bits of `code`, most significant first.
  void Write(std::uint64_t code, unsigned length);
  const BitString& bits() const { return bits_; }
  BitString Take() { return std::move(bits_); }

 private:
  BitString bits_;
};

class BitReader {
 public:
  explicit BitReader(const BitString& bits) : bits_(bits) {}
  bool exhausted() const { return pos_ >= bits_.bit_count; }
  std::size_t position() const { return pos_; }
  // Throws DataError past the end.
  unsigned ReadBit();

 private:
  const BitString& bits_;
  std::size_t pos_ = 0;
};

// Canonical prefix code. Symbols with zero frequency get length 0. A lone
// used symbol gets a one-bit code.
class HuffmanTable {
 public:
  HuffmanTable() = default;

  static HuffmanTable FromFrequencies(std::span<const std::uint64_t> freqs);
  // Rebuilds canonical codes from serialized lengths; throws DataError when
  // the lengths cannot form a prefix code.
  static HuffmanTable FromLengths(std::vector<std::uint8_t> lengths);

  std::size_t alphabet_size() const { return lengths_.size(); }
  const std::vector<std::uint8_t>& lengths() const { return lengths_; }
  unsigned length(std::size_t symbol) const { return lengths_.at(symbol); }
  std::uint64_t code(std::size_t symbol) const { return codes_.at(symbol); }
  // sum_k 2^-length_k over used symbols.
  double KraftSum() const;

  void Encode(std::uint32_t symbol, BitWriter& writer) const;
  std::uint32_t Decode(BitReader& reader) const;

 private:
  void AssignCanonicalCodes();

  std::vector<std::uint8_t> lengths_;
  std::vector<std::uint64_t> codes_;
  // Canonical decoding tables indexed by code length.
  std::vector<std::uint64_t> first_code_;
  std::vector<std::uint32_t> count_;
  std::vector<std::uint32_t> offset_;
  std::vector<std::uint32_t> sorted_symbols_;
};

struct HuffmanEncoded {
  HuffmanTable table;
  BitString bits;
  std::size_t symbol_count = 0;

  double MeanCodeLength() const;
};

// Builds a table from the empirical frequencies of `indices` (all in
// [0, alphabet_size)) and encodes them.
HuffmanEncoded HuffmanEncode(std::span<const std::uint32_t> indices,
                             std::size_t alphabet_size);
// Throws DataError on truncated or invalid input.
std::vector<std::uint32_t> HuffmanDecode(const BitString& bits,
                                         const HuffmanTable& table,
                                         std::size_t count);

}  // namespace psycal

#endif  // PSYCAL_QUANTIZER_H_

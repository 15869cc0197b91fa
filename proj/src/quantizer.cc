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

#include "psycal/quantizer.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <string>
#include <tuple>

#include "psycal/errors.h"

namespace psycal {

void Codebook::Validate() const {
  if (kernels.empty()) throw std::invalid_argument("codebook has no kernels");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("softmax scale alpha must be positive");
  }
  for (double k : kernels) {
    if (!std::isfinite(k)) throw std::invalid_argument("non-finite kernel");
  }
}

Codebook CodebookFromQuantiles(std::span<const double> data, std::size_t k,
                               double alpha) {
  if (data.empty() || k == 0) {
    throw std::invalid_argument("need data and at least one kernel");
  }
  std::vector<double> sorted(data.begin(), data.end());
  std::sort(sorted.begin(), sorted.end());
  Codebook cb;
  cb.alpha = alpha;
  cb.kernels.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double q = (i + 0.5) / k * (sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(q));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    cb.kernels[i] = sorted[lo] + (q - lo) * (sorted[hi] - sorted[lo]);
  }
  return cb;
}

std::vector<double> Assignment::OneHot() const {
  std::vector<double> out(soft.size(), 0.0);
  out.at(hard_index) = 1.0;
  return out;
}

Assignment SoftAssign(double z, const Codebook& codebook) {
  const std::size_t k = codebook.size();
  Assignment a;
  a.soft.resize(k);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    const double d = (z - codebook.kernels[j]) * (z - codebook.kernels[j]);
    a.soft[j] = d;
    if (d < best) {
      best = d;
      a.hard_index = j;
    }
  }
  // Max-subtracted softmax of -alpha * d.
  double sum = 0.0;
  for (double& s : a.soft) {
    s = std::exp(-codebook.alpha * (s - best));
    sum += s;
  }
  for (std::size_t j = 0; j < k; ++j) {
    a.soft[j] /= sum;
    a.soft_value += a.soft[j] * codebook.kernels[j];
  }
  a.hard_value = codebook.kernels[a.hard_index];
  return a;
}

QuantizedCode QuantizeVector(std::span<const double> z,
                             const Codebook& codebook, QuantMode mode) {
  codebook.Validate();
  QuantizedCode out;
  out.values.reserve(z.size());
  out.assignments.reserve(z.size());
  out.indices.reserve(z.size());
  for (double value : z) {
    Assignment a = SoftAssign(value, codebook);
    out.values.push_back(mode == QuantMode::kSoft ? a.soft_value : a.hard_value);
    out.indices.push_back(static_cast<std::uint32_t>(a.hard_index));
    out.assignments.push_back(std::move(a));
  }
  return out;
}

void SoftQuantizeBackward(std::span<const double> z, const Codebook& codebook,
                          std::span<const Assignment> assignments,
                          std::span<const double> dh, std::span<double> dz,
                          std::span<double> dkernels) {
  const double alpha = codebook.alpha;
  const std::size_t k = codebook.size();
  for (std::size_t c = 0; c < z.size(); ++c) {
    const Assignment& a = assignments[c];
    const double h = a.soft_value;
    double dzc = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double beta = codebook.kernels[j];
      // dh/ds_j = a_j (beta_j - h), s_j = -alpha (z - beta_j)^2.
      const double dh_ds = a.soft[j] * (beta - h);
      const double ds_dz = -2.0 * alpha * (z[c] - beta);
      dzc += dh_ds * ds_dz;
      if (!dkernels.empty()) {
        dkernels[j] += dh[c] * (a.soft[j] - dh_ds * ds_dz);
      }
    }
    if (!dz.empty()) dz[c] += dh[c] * dzc;
  }
}

double EntropyOf(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  return std::max(0.0, h);
}

AssignmentStats ComputeEntropy(std::span<const Assignment> assignments,
                               EntropyEstimator estimator,
                               double feature_rate) {
  if (assignments.empty()) {
    throw std::invalid_argument("entropy needs at least one assignment");
  }
  const std::size_t k = assignments.front().soft.size();
  AssignmentStats stats;
  stats.feature_rate = feature_rate;
  stats.probs.assign(k, 0.0);
  for (const Assignment& a : assignments) {
    if (estimator == EntropyEstimator::kSoft) {
      for (std::size_t j = 0; j < k; ++j) stats.probs[j] += a.soft[j];
    } else {
      stats.probs[a.hard_index] += 1.0;
    }
  }
  for (double& p : stats.probs) p /= assignments.size();
  stats.entropy_bits = EntropyOf(stats.probs);
  return stats;
}

void SoftEntropyBackward(std::span<const double> z, const Codebook& codebook,
                         std::span<const Assignment> assignments,
                         double weight, std::span<double> dz,
                         std::span<double> dkernels) {
  if (assignments.empty() || weight == 0.0) return;
  const std::size_t k = codebook.size();
  const double n = static_cast<double>(assignments.size());
  const AssignmentStats stats =
      ComputeEntropy(assignments, EntropyEstimator::kSoft);
  // dH/da_ck = -(log2 p_k + 1/ln 2) / n.
  std::vector<double> g(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    if (stats.probs[j] > 0.0) {
      g[j] = -weight * (std::log2(stats.probs[j]) + 1.0 / std::log(2.0)) / n;
    }
  }
  const double alpha = codebook.alpha;
  for (std::size_t c = 0; c < assignments.size(); ++c) {
    const Assignment& a = assignments[c];
    double mean_g = 0.0;
    for (std::size_t j = 0; j < k; ++j) mean_g += a.soft[j] * g[j];
    double dzc = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double ds = a.soft[j] * (g[j] - mean_g);
      const double diff = z[c] - codebook.kernels[j];
      dzc += ds * (-2.0 * alpha * diff);
      if (!dkernels.empty()) dkernels[j] += ds * (2.0 * alpha * diff);
    }
    if (!dz.empty()) dz[c] += dzc;
  }
}

double FeatureRate(double sample_rate, std::size_t hop,
                   std::size_t code_length, std::size_t modules) {
  if (hop == 0) throw std::invalid_argument("hop must be positive");
  return sample_rate / hop * code_length * modules;
}

double BitrateLowerBound(const AssignmentStats& stats) {
  return stats.feature_rate * stats.entropy_bits;
}

RateController RateControllerStep(RateController controller,
                                  double measured_bps) {
  if (measured_bps > controller.target_bps) {
    controller.blend_weight += controller.step;
  } else {
    controller.blend_weight =
        std::max(0.0, controller.blend_weight - controller.step);
  }
  return controller;
}

double FitCodebook(std::span<const double> data, Codebook& codebook,
                   std::size_t steps, double learning_rate) {
  codebook.Validate();
  const double n = static_cast<double>(data.size());
  double sse = 0.0;
  std::vector<double> dh(data.size());
  for (std::size_t step = 0; step <= steps; ++step) {
    const QuantizedCode q = QuantizeVector(data, codebook, QuantMode::kSoft);
    sse = 0.0;
    for (std::size_t c = 0; c < data.size(); ++c) {
      const double d = q.values[c] - data[c];
      sse += d * d / n;
      dh[c] = 2.0 * d / n;
    }
    if (step == steps) break;
    std::vector<double> dk(codebook.size(), 0.0);
    SoftQuantizeBackward(data, codebook, q.assignments, dh, {}, dk);
    for (std::size_t j = 0; j < codebook.size(); ++j) {
      codebook.kernels[j] -= learning_rate * dk[j];
    }
  }
  return sse;
}

void BitWriter::Write(std::uint64_t code, unsigned length) {
  for (unsigned i = length; i-- > 0;) {
    const std::size_t byte = bits_.bit_count / 8;
    if (byte == bits_.bytes.size()) bits_.bytes.push_back(0);
    if ((code >> i) & 1) {
      bits_.bytes[byte] |= static_cast<std::uint8_t>(0x80 >> (bits_.bit_count % 8));
    }
    ++bits_.bit_count;
  }
}

unsigned BitReader::ReadBit() {
  if (pos_ >= bits_.bit_count) throw DataError("bitstream truncated");
  const unsigned bit = (bits_.bytes[pos_ / 8] >> (7 - pos_ % 8)) & 1;
  ++pos_;
  return bit;
}

namespace {

constexpr unsigned kMaxCodeLength = 63;

}  // namespace

HuffmanTable HuffmanTable::FromFrequencies(
    std::span<const std::uint64_t> freqs) {
  HuffmanTable table;
  table.lengths_.assign(freqs.size(), 0);
  std::vector<std::uint32_t> used;
  for (std::size_t s = 0; s < freqs.size(); ++s) {
    if (freqs[s] > 0) used.push_back(static_cast<std::uint32_t>(s));
  }
  if (used.size() == 1) {
    table.lengths_[used.front()] = 1;
  } else if (used.size() > 1) {
    // Nodes: leaves first, then merged nodes. Ties break on node id so the
    // tree is deterministic.
    std::vector<std::size_t> parent(2 * used.size() - 1, 0);
    using Entry = std::tuple<std::uint64_t, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    for (std::size_t i = 0; i < used.size(); ++i) heap.emplace(freqs[used[i]], i);
    std::size_t next = used.size();
    while (heap.size() > 1) {
      const auto [wa, a] = heap.top();
      heap.pop();
      const auto [wb, b] = heap.top();
      heap.pop();
      parent[a] = parent[b] = next;
      heap.emplace(wa + wb, next);
      ++next;
    }
    const std::size_t root = next - 1;
    for (std::size_t i = 0; i < used.size(); ++i) {
      unsigned depth = 0;
      for (std::size_t n = i; n != root; n = parent[n]) ++depth;
      if (depth > kMaxCodeLength) {
        throw std::runtime_error("Huffman code length exceeds 63 bits");
      }
      table.lengths_[used[i]] = static_cast<std::uint8_t>(depth);
    }
  }
  table.AssignCanonicalCodes();
  return table;
}

HuffmanTable HuffmanTable::FromLengths(std::vector<std::uint8_t> lengths) {
  HuffmanTable table;
  table.lengths_ = std::move(lengths);
  for (std::uint8_t l : table.lengths_) {
    if (l > kMaxCodeLength) throw DataError("Huffman code length out of range");
  }
  if (table.KraftSum() > 1.0) {
    throw DataError("Huffman code lengths violate the Kraft inequality");
  }
  table.AssignCanonicalCodes();
  return table;
}

void HuffmanTable::AssignCanonicalCodes() {
  codes_.assign(lengths_.size(), 0);
  first_code_.assign(kMaxCodeLength + 2, 0);
  count_.assign(kMaxCodeLength + 2, 0);
  offset_.assign(kMaxCodeLength + 2, 0);
  sorted_symbols_.clear();
  for (std::size_t s = 0; s < lengths_.size(); ++s) {
    if (lengths_[s] > 0) {
      ++count_[lengths_[s]];
      sorted_symbols_.push_back(static_cast<std::uint32_t>(s));
    }
  }
  std::stable_sort(sorted_symbols_.begin(), sorted_symbols_.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     return lengths_[a] < lengths_[b];
                   });
  std::uint64_t code = 0;
  std::uint32_t offset = 0;
  for (unsigned len = 1; len <= kMaxCodeLength; ++len) {
    code <<= 1;
    first_code_[len] = code;
    offset_[len] = offset;
    code += count_[len];
    offset += count_[len];
  }
  for (unsigned len = 1; len <= kMaxCodeLength; ++len) {
    for (std::uint32_t i = 0; i < count_[len]; ++i) {
      codes_[sorted_symbols_[offset_[len] + i]] = first_code_[len] + i;
    }
  }
}

double HuffmanTable::KraftSum() const {
  double sum = 0.0;
  for (std::uint8_t l : lengths_) {
    if (l > 0) sum += std::ldexp(1.0, -static_cast<int>(l));
  }
  return sum;
}

void HuffmanTable::Encode(std::uint32_t symbol, BitWriter& writer) const {
  if (symbol >= lengths_.size() || lengths_[symbol] == 0) {
    throw std::invalid_argument("symbol " + std::to_string(symbol) +
                                " has no Huffman code");
  }
  writer.Write(codes_[symbol], lengths_[symbol]);
}

std::uint32_t HuffmanTable::Decode(BitReader& reader) const {
  std::uint64_t code = 0;
  for (unsigned len = 1; len <= kMaxCodeLength; ++len) {
    code = (code << 1) | reader.ReadBit();
    if (count_[len] > 0 && code >= first_code_[len] &&
        code - first_code_[len] < count_[len]) {
      return sorted_symbols_[offset_[len] + (code - first_code_[len])];
    }
  }
  throw DataError("invalid Huffman code at bit " +
                  std::to_string(reader.position()));
}

double HuffmanEncoded::MeanCodeLength() const {
  return symbol_count == 0 ? 0.0
                           : static_cast<double>(bits.bit_count) / symbol_count;
}

HuffmanEncoded HuffmanEncode(std::span<const std::uint32_t> indices,
                             std::size_t alphabet_size) {
  std::vector<std::uint64_t> freqs(alphabet_size, 0);
  for (std::uint32_t s : indices) {
    if (s >= alphabet_size) {
      throw std::invalid_argument("symbol " + std::to_string(s) +
                                  " outside alphabet of " +
                                  std::to_string(alphabet_size));
    }
    ++freqs[s];
  }
  HuffmanEncoded out;
  out.table = HuffmanTable::FromFrequencies(freqs);
  out.symbol_count = indices.size();
  BitWriter writer;
  for (std::uint32_t s : indices) out.table.Encode(s, writer);
  out.bits = writer.Take();
  return out;
}

std::vector<std::uint32_t> HuffmanDecode(const BitString& bits,
                                         const HuffmanTable& table,
                                         std::size_t count) {
  if (bits.bytes.size() * 8 < bits.bit_count) {
    throw DataError("bit count exceeds buffer size");
  }
  BitReader reader(bits);
  std::vector<std::uint32_t> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(table.Decode(reader));
  if (!reader.exhausted()) {
    throw DataError("trailing bits after " + std::to_string(count) +
                    " symbols");
  }
  return out;
}

}  // namespace psycal

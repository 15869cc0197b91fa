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

#include "psycal/codec.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <stdexcept>
#include <string>

#include "psycal/errors.h"

namespace psycal {

std::vector<double> LinearCodecModule::Encode(
    std::span<const double> frame) const {
  if (frame.size() != frame_length()) {
    throw std::invalid_argument("frame length does not match analysis matrix");
  }
  const Eigen::Map<const Eigen::VectorXd> x(frame.data(), frame.size());
  const Eigen::VectorXd z = analysis * x;
  return {z.data(), z.data() + z.size()};
}

std::vector<double> LinearCodecModule::Decode(
    std::span<const double> code) const {
  if (code.size() != code_length()) {
    throw std::invalid_argument("code length does not match synthesis matrix");
  }
  const Eigen::Map<const Eigen::VectorXd> h(code.data(), code.size());
  const Eigen::VectorXd y = synthesis * h;
  return {y.data(), y.data() + y.size()};
}

Eigen::MatrixXd DctRows(std::size_t frame_length, std::size_t first_row,
                        std::size_t rows) {
  if (first_row + rows > frame_length) {
    throw std::invalid_argument("DCT rows exceed frame length");
  }
  Eigen::MatrixXd out(rows, frame_length);
  const double n = static_cast<double>(frame_length);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t k = first_row + r;
    const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (std::size_t t = 0; t < frame_length; ++t) {
      out(r, t) = scale * std::cos(std::numbers::pi * (t + 0.5) * k / n);
    }
  }
  return out;
}

std::size_t ResidualStack::frame_length() const {
  return modules.empty() ? 0 : modules.front().frame_length();
}

std::size_t ResidualStack::code_length() const {
  return modules.empty() ? 0 : modules.front().code_length();
}

void ResidualStack::Validate() const {
  if (modules.empty()) throw std::invalid_argument("stack has no modules");
  for (const LinearCodecModule& m : modules) {
    if (m.frame_length() != frame_length() || m.code_length() != code_length() ||
        static_cast<std::size_t>(m.synthesis.rows()) != frame_length() ||
        static_cast<std::size_t>(m.synthesis.cols()) != code_length()) {
      throw std::invalid_argument("inconsistent module shapes in stack");
    }
    m.codebook.Validate();
  }
}

std::vector<double> CmrlEncoding::Concatenated() const {
  std::vector<double> h;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const std::vector<double>& part =
        quantized.empty() ? codes[i] : quantized[i].values;
    h.insert(h.end(), part.begin(), part.end());
  }
  return h;
}

std::vector<ModuleFrame> CmrlEncoding::AsModuleFrames() const {
  std::vector<ModuleFrame> out(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    out[i] = {targets[i], recons[i]};
  }
  return out;
}

std::vector<double> CmrlEncoding::Reconstruction() const {
  std::vector<double> sum(recons.empty() ? 0 : recons.front().size(), 0.0);
  for (const auto& r : recons) {
    for (std::size_t t = 0; t < sum.size(); ++t) sum[t] += r[t];
  }
  return sum;
}

CmrlEncoding CmrlEncode(std::span<const double> frame,
                        const ResidualStack& stack, CodecQuant quant) {
  stack.Validate();
  CmrlEncoding enc;
  std::vector<double> residual(frame.begin(), frame.end());
  for (const LinearCodecModule& m : stack.modules) {
    enc.targets.push_back(residual);
    std::vector<double> z = m.Encode(residual);
    std::vector<double> recon;
    if (quant == CodecQuant::kNone) {
      recon = m.Decode(z);
    } else {
      QuantizedCode q = QuantizeVector(
          z, m.codebook,
          quant == CodecQuant::kSoft ? QuantMode::kSoft : QuantMode::kHard);
      recon = m.Decode(q.values);
      enc.quantized.push_back(std::move(q));
    }
    for (std::size_t t = 0; t < residual.size(); ++t) residual[t] -= recon[t];
    enc.codes.push_back(std::move(z));
    enc.recons.push_back(std::move(recon));
  }
  return enc;
}

std::vector<double> CmrlDecode(std::span<const double> h,
                               const ResidualStack& stack) {
  stack.Validate();
  const std::size_t c = stack.code_length();
  if (h.size() != c * stack.size()) {
    throw std::invalid_argument("code vector has " + std::to_string(h.size()) +
                                " values, expected " +
                                std::to_string(c * stack.size()));
  }
  std::vector<double> out(stack.frame_length(), 0.0);
  for (std::size_t i = 0; i < stack.size(); ++i) {
    const std::vector<double> part = stack.modules[i].Decode(h.subspan(i * c, c));
    for (std::size_t t = 0; t < out.size(); ++t) out[t] += part[t];
  }
  return out;
}

ResidualStack InitStack(std::span<const std::vector<double>> frames,
                        const StackInit& init) {
  if (frames.empty()) throw std::invalid_argument("no frames to initialize from");
  if (init.modules == 0 || init.frame_length < 2 || init.frame_length % 2 != 0) {
    throw std::invalid_argument("need >= 1 module and an even frame length");
  }
  const std::size_t code_length = init.frame_length / 2;
  ResidualStack stack;
  const Eigen::MatrixXd basis = DctRows(init.frame_length, 0, code_length);
  std::vector<std::vector<double>> residuals(frames.begin(), frames.end());
  for (std::size_t i = 0; i < init.modules; ++i) {
    LinearCodecModule m;
    m.analysis = basis;
    m.synthesis = basis.transpose();
    std::vector<double> codes;
    for (const auto& r : residuals) {
      const std::vector<double> z = m.Encode(r);
      codes.insert(codes.end(), z.begin(), z.end());
    }
    m.codebook = CodebookFromQuantiles(codes, init.kernels, init.alpha);
    for (auto& r : residuals) {
      const QuantizedCode q =
          QuantizeVector(m.Encode(r), m.codebook, QuantMode::kHard);
      const std::vector<double> recon = m.Decode(q.values);
      for (std::size_t t = 0; t < r.size(); ++t) r[t] -= recon[t];
    }
    stack.modules.push_back(std::move(m));
  }
  return stack;
}

namespace {

constexpr char kCheckpointMagic[4] = {'P', 'S', 'Y', 'C'};

template <typename T>
void Put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T Get(std::ifstream& in, const std::string& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw DataError(path + ": checkpoint truncated");
  }
  return value;
}

void PutMatrix(std::ofstream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) Put<double>(out, m(r, c));
  }
}

Eigen::MatrixXd GetMatrix(std::ifstream& in, const std::string& path,
                          std::size_t rows, std::size_t cols) {
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = Get<double>(in, path);
  }
  return m;
}

}  // namespace

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void SaveCheckpoint(const ResidualStack& stack, const CheckpointMeta& meta,
                    const std::filesystem::path& path) {
  stack.Validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(kCheckpointMagic, 4);
  Put<std::uint32_t>(out, kCheckpointVersion);
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(stack.frame_length()));
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(stack.code_length()));
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(stack.size()));
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(std::lround(meta.sample_rate)));
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(meta.overlap));
  for (const LinearCodecModule& m : stack.modules) {
    Put<std::uint32_t>(out, static_cast<std::uint32_t>(m.codebook.size()));
    Put<double>(out, m.codebook.alpha);
    for (double k : m.codebook.kernels) Put<double>(out, k);
    PutMatrix(out, m.analysis);
    PutMatrix(out, m.synthesis);
  }
  if (!out) throw DataError("write failed for " + path.string());
}

ResidualStack LoadCheckpoint(const std::filesystem::path& path,
                             CheckpointMeta* meta) {
  const std::string name = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + name);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw DataError(name + ": not a psycal checkpoint");
  }
  const auto version = Get<std::uint32_t>(in, name);
  if (version != kCheckpointVersion) {
    throw DataError(name + ": unsupported checkpoint version " +
                    std::to_string(version));
  }
  const auto frame_length = Get<std::uint32_t>(in, name);
  const auto code_length = Get<std::uint32_t>(in, name);
  const auto modules = Get<std::uint32_t>(in, name);
  const auto rate = Get<std::uint32_t>(in, name);
  const auto overlap = Get<std::uint32_t>(in, name);
  if (frame_length == 0 || code_length == 0 || modules == 0 ||
      frame_length > (1u << 16) || code_length > frame_length || modules > 64) {
    throw DataError(name + ": implausible checkpoint geometry");
  }
  if (meta) *meta = {static_cast<double>(rate), overlap};
  ResidualStack stack;
  for (std::uint32_t i = 0; i < modules; ++i) {
    LinearCodecModule m;
    const auto k = Get<std::uint32_t>(in, name);
    if (k == 0 || k > 0xFFFF) throw DataError(name + ": bad kernel count");
    m.codebook.alpha = Get<double>(in, name);
    m.codebook.kernels.resize(k);
    for (double& v : m.codebook.kernels) v = Get<double>(in, name);
    m.analysis = GetMatrix(in, name, code_length, frame_length);
    m.synthesis = GetMatrix(in, name, frame_length, code_length);
    stack.modules.push_back(std::move(m));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError(name + ": trailing bytes in checkpoint");
  }
  try {
    stack.Validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(name + ": " + e.what());
  }
  return stack;
}

Bitstream EncodeClip(const AudioClip& clip, const ResidualStack& stack,
                     std::size_t overlap) {
  stack.Validate();
  const std::size_t k = stack.modules.front().codebook.size();
  for (const LinearCodecModule& m : stack.modules) {
    if (m.codebook.size() != k) {
      throw std::invalid_argument("modules must share the kernel count");
    }
  }
  const std::vector<Frame> frames =
      FrameSignal(clip, {stack.frame_length(), overlap});
  Bitstream out;
  out.sample_rate = static_cast<std::uint32_t>(std::lround(clip.sample_rate));
  out.frame_length = static_cast<std::uint32_t>(stack.frame_length());
  out.overlap = static_cast<std::uint32_t>(overlap);
  out.code_length = static_cast<std::uint32_t>(stack.code_length());
  out.frame_count = static_cast<std::uint32_t>(frames.size());
  out.sample_count = clip.size();
  for (const LinearCodecModule& m : stack.modules) {
    out.kernels.emplace_back(m.codebook.kernels.begin(), m.codebook.kernels.end());
  }
  for (const Frame& frame : frames) {
    const CmrlEncoding enc = CmrlEncode(frame.samples, stack, CodecQuant::kHard);
    for (const QuantizedCode& q : enc.quantized) {
      out.indices.insert(out.indices.end(), q.indices.begin(), q.indices.end());
    }
  }
  return out;
}

AudioClip DecodeClip(const Bitstream& stream, const ResidualStack& stack) {
  stack.Validate();
  if (stream.frame_length != stack.frame_length() ||
      stream.code_length != stack.code_length() ||
      stream.module_count() != stack.size()) {
    throw DataError("bitstream geometry does not match checkpoint");
  }
  if (stream.overlap >= stream.frame_length) {
    throw DataError("bitstream overlap must be shorter than the frame");
  }
  const std::size_t c = stack.code_length();
  const std::size_t hop = stream.frame_length - stream.overlap;
  const std::size_t k = stream.alphabet_size();
  std::vector<Frame> frames(stream.frame_count);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    Frame& frame = frames[f];
    frame.start_index = f * hop;
    if (frame.start_index >= stream.sample_count) {
      throw DataError("frame count exceeds sample count");
    }
    frame.valid_length = static_cast<std::size_t>(std::min<std::uint64_t>(
        stream.frame_length, stream.sample_count - frame.start_index));
    frame.samples.assign(stream.frame_length, 0.0);
    for (std::size_t i = 0; i < stack.size(); ++i) {
      std::vector<double> h(c);
      for (std::size_t j = 0; j < c; ++j) {
        const std::uint32_t idx = stream.indices.at(pos++);
        if (idx >= k) throw DataError("kernel index out of range");
        h[j] = stream.kernels[i][idx];
      }
      const std::vector<double> part = stack.modules[i].Decode(h);
      for (std::size_t t = 0; t < part.size(); ++t) frame.samples[t] += part[t];
    }
  }
  AudioClip clip;
  clip.sample_rate = stream.sample_rate;
  clip.samples = OverlapAdd(frames);
  clip.samples.resize(stream.sample_count, 0.0);
  return clip;
}

}  // namespace psycal

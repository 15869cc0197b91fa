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

#include "psycal/audio.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <stdexcept>
#include <string>

#include "psycal/errors.h"

namespace psycal {

void ValidateClip(const AudioClip& clip) {
  if (!(clip.sample_rate > 0.0)) {
    throw std::invalid_argument("sample rate must be positive");
  }
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    if (!std::isfinite(clip.samples[i])) {
      throw std::invalid_argument("non-finite sample at index " +
                                  std::to_string(i));
    }
  }
}

std::vector<double> FadeInRamp(std::size_t overlap) {
  std::vector<double> ramp(overlap);
  for (std::size_t n = 0; n < overlap; ++n) {
    const double s = std::sin(std::numbers::pi * (n + 0.5) / (2.0 * overlap));
    ramp[n] = s * s;
  }
  return ramp;
}

std::vector<Frame> FrameSignal(const AudioClip& clip,
                               const FramingParams& params) {
  ValidateClip(clip);
  const std::size_t len = params.frame_length;
  const std::size_t overlap = params.overlap;
  if (len == 0 || overlap >= len) {
    throw std::invalid_argument("frame length must exceed overlap");
  }
  if (clip.size() < len) {
    throw std::invalid_argument("clip of " + std::to_string(clip.size()) +
                                " samples is shorter than one frame of " +
                                std::to_string(len));
  }
  const std::size_t hop = params.hop();
  // Every sample past the final overlap region must be covered by a frame
  // that does not fade it out.
  const std::size_t count = (clip.size() - overlap + hop - 1) / hop;

  const std::vector<double> fade_in = FadeInRamp(overlap);
  std::vector<Frame> frames(count);
  for (std::size_t k = 0; k < count; ++k) {
    Frame& frame = frames[k];
    frame.start_index = k * hop;
    frame.valid_length = std::min(len, clip.size() - frame.start_index);
    frame.samples.assign(len, 0.0);
    std::copy_n(clip.samples.begin() + frame.start_index, frame.valid_length,
                frame.samples.begin());
    if (k > 0) {
      for (std::size_t n = 0; n < overlap; ++n) frame.samples[n] *= fade_in[n];
    }
    if (k + 1 < count) {
      // Fade-out is the complement of the next frame's fade-in.
      for (std::size_t n = 0; n < overlap; ++n) {
        frame.samples[hop + n] *= 1.0 - fade_in[n];
      }
    }
  }
  return frames;
}

std::vector<double> OverlapAdd(std::span<const Frame> frames) {
  if (frames.empty()) return {};
  const std::size_t len = frames.front().samples.size();
  std::size_t total = 0;
  for (const Frame& frame : frames) {
    if (frame.samples.size() != len) {
      throw std::invalid_argument("inconsistent frame lengths");
    }
    if (frame.valid_length > len) {
      throw std::invalid_argument("frame valid length exceeds frame length");
    }
    total = std::max(total, frame.start_index + frame.valid_length);
  }
  std::vector<double> out(total, 0.0);
  for (const Frame& frame : frames) {
    for (std::size_t n = 0; n < frame.valid_length; ++n) {
      out[frame.start_index + n] += frame.samples[n];
    }
  }
  return out;
}

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t LoadU32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t LoadU16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void StoreU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}

void StoreU16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace

AudioClip ReadWav(const std::filesystem::path& path,
                  const WavReadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const std::vector<unsigned char> bytes(
      (std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = path.string() + ": ";
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw DataError(where + "missing RIFF/WAVE header");
  }

  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t size = LoadU32(chunk + 4);
    const std::size_t body = pos + 8;
    if (size > bytes.size() - body) {
      throw DataError(where + "chunk extends past end of file");
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw DataError(where + "short fmt chunk");
      format = LoadU16(chunk + 8);
      channels = LoadU16(chunk + 10);
      rate = LoadU32(chunk + 12);
      bits = LoadU16(chunk + 22);
      if (format == kFormatExtensible) {
        if (size < 40) throw DataError(where + "short extensible fmt chunk");
        // First two bytes of the subformat GUID carry the format tag.
        format = LoadU16(chunk + 8 + 24);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = size;
    }
    pos = body + size + (size & 1);
  }
  if (format == 0) throw DataError(where + "missing fmt chunk");
  if (data == nullptr) throw DataError(where + "missing data chunk");
  if (channels == 0 || rate == 0) {
    throw DataError(where + "invalid channel count or sample rate");
  }
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool float32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !float32) {
    throw DataError(where + "unsupported codec (format " +
                    std::to_string(format) + ", " + std::to_string(bits) +
                    " bits); expected PCM16 or float32");
  }
  if (channels > 1 && !options.downmix) {
    throw DataError(where + std::to_string(channels) +
                    " channels; mono required (enable downmix)");
  }

  const std::size_t width = bits / 8;
  const std::size_t frame_bytes = width * channels;
  const std::size_t count = data_size / frame_bytes;
  AudioClip clip;
  clip.sample_rate = rate;
  clip.samples.resize(count);
  for (std::size_t n = 0; n < count; ++n) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + n * frame_bytes + c * width;
      if (pcm16) {
        acc += static_cast<std::int16_t>(LoadU16(p)) / 32768.0;
      } else {
        acc += std::bit_cast<float>(LoadU32(p));
      }
    }
    clip.samples[n] = acc / channels;
    if (!std::isfinite(clip.samples[n])) {
      throw DataError(where + "non-finite sample at index " +
                      std::to_string(n));
    }
  }
  return clip;
}

void WriteWav(const AudioClip& clip, const std::filesystem::path& path,
              WavFormat format) {
  ValidateClip(clip);
  const bool pcm16 = format == WavFormat::kPcm16;
  const std::uint16_t bits = pcm16 ? 16 : 32;
  const std::uint32_t rate =
      static_cast<std::uint32_t>(std::lround(clip.sample_rate));
  const std::uint32_t data_size =
      static_cast<std::uint32_t>(clip.size() * (bits / 8));

  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  StoreU32(out, 36 + data_size);
  out += "WAVEfmt ";
  StoreU32(out, 16);
  StoreU16(out, pcm16 ? kFormatPcm : kFormatFloat);
  StoreU16(out, 1);
  StoreU32(out, rate);
  StoreU32(out, rate * (bits / 8));
  StoreU16(out, bits / 8);
  StoreU16(out, bits);
  out += "data";
  StoreU32(out, data_size);
  for (double x : clip.samples) {
    if (pcm16) {
      const double scaled = std::clamp(std::round(x * 32768.0), -32768.0,
                                       32767.0);
      StoreU16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
    } else {
      StoreU32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
    }
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw DataError("cannot open " + path.string() + " for writing");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw DataError("write failed for " + path.string());
}

}  // namespace psycal

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

#ifndef PSYCAL_AUDIO_H_
#define PSYCAL_AUDIO_H_

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace psycal {

inline constexpr std::size_t kDefaultFrameLength = 512;
inline constexpr std::size_t kDefaultOverlap = 32;

// Mono time-domain signal with nominal amplitude range [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  double sample_rate = 44100.0;

  std::size_t size() const { return samples.size(); }
  double seconds() const { return samples.size() / sample_rate; }
};

// Throws std::invalid_argument when the rate is not positive or a sample is
// not finite.
void ValidateClip(const AudioClip& clip);

struct Frame {
  std::vector<double> samples;
  // Offset of samples[0] in the source clip.
  std::size_t start_index = 0;
  // Number of samples that came from the clip; the rest is zero padding.
  std::size_t valid_length = 0;
};

struct FramingParams {
  std::size_t frame_length = kDefaultFrameLength;
  std::size_t overlap = kDefaultOverlap;

  std::size_t hop() const { return frame_length - overlap; }
};

// Raised-cosine cross-fade of width `overlap`. fade_in[n] + fade_out[n] == 1.
std::vector<double> FadeInRamp(std::size_t overlap);

// Splits `clip` into frames spaced hop() apart. The leading overlap region of
// every frame but the first is multiplied by the fade-in ramp and the
// trailing overlap region of every frame but the last by the fade-out ramp,
// so that OverlapAdd() of the unmodified frames returns the clip. A trailing
// remainder is zero-padded to the full frame length.
std::vector<Frame> FrameSignal(const AudioClip& clip,
                               const FramingParams& params = {});

// Sums frames at their start offsets. The output length is the furthest
// valid sample of any frame.
std::vector<double> OverlapAdd(std::span<const Frame> frames);

struct WavReadOptions {
  // Average channels instead of rejecting multichannel input.
  bool downmix = false;
};

enum class WavFormat { kPcm16, kFloat32 };

// PCM16 amplitudes are normalized by 1/32768.
AudioClip ReadWav(const std::filesystem::path& path,
                  const WavReadOptions& options = {});
void WriteWav(const AudioClip& clip, const std::filesystem::path& path,
              WavFormat format = WavFormat::kFloat32);

}  // namespace psycal

#endif  // PSYCAL_AUDIO_H_

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

#ifndef PSYCAL_LOSS_H_
#define PSYCAL_LOSS_H_

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "psycal/pam.h"
#include "psycal/spectral.h"

namespace psycal {

inline constexpr double kDefaultLambda = 0.1;

enum class ModelPreset { kA, kB, kC, kD };

// "model-a" .. "model-d" (case-insensitive, "a".."d" also accepted).
ModelPreset ParsePreset(std::string_view name);
std::string PresetName(ModelPreset preset);

struct LossConfig {
  double lambda = kDefaultLambda;
  bool use_sse = true;       // L1, time-domain SSE
  bool use_mel = false;      // L2, mel-spectrum SSE
  bool use_priority = false; // L3, masking-weighted magnitude SSE
  bool use_noise_modulation = false;  // L4, worst noise-to-mask ratio
  std::size_t mel_bands = kDefaultMelBands;
  MelNormalization mel_norm = MelNormalization::kPartitionOfUnity;

  static LossConfig FromPreset(ModelPreset preset);
  bool NeedsPam() const { return use_priority || use_noise_modulation; }
};

// One CMRL module's target s^(i) and reconstruction.
struct ModuleFrame {
  std::vector<double> target;
  std::vector<double> recon;
};

// Masking quantities derived from the reference frame only; treated as
// constants by the gradients.
struct PamOutputs {
  PerceptualWeights weights;
  GlobalMask mask;
  double norm_offset_db = 0.0;

  static PamOutputs FromAnalysis(const PamAnalysis& analysis);
};

struct NoiseToMask {
  // n_f / m_f in linear power.
  std::vector<double> ratio;
  // max_f ReLU(ratio_f - 1).
  double loss = 0.0;
  // Lowest index of the largest ratio.
  std::size_t argmax_bin = 0;
  double max_ratio = 0.0;
  std::size_t audible_bins = 0;
};

// L4 and its diagnostics from per-bin noise-to-mask power ratios.
NoiseToMask NoiseToMaskFromRatios(std::vector<double> ratio);

struct FrameLoss {
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;
  double l4 = 0.0;
  double total = 0.0;
  std::size_t l4_bin = 0;
  double max_nmr = 0.0;
  std::size_t audible_bins = 0;
};

struct LossReport {
  // Means over frames.
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;
  double l4 = 0.0;
  double total = 0.0;
  std::vector<FrameLoss> per_frame;
};

// Per-module dL/d(recon^(i)).
struct LossGradient {
  std::vector<std::vector<double>> g;
};

// Loss terms for frames of the analyzer's length. Immutable; Evaluate may be
// called concurrently.
class PerceptualLoss {
 public:
  PerceptualLoss(const SpectralAnalyzer& analyzer, LossConfig config);

  const LossConfig& config() const { return config_; }
  const SpectralAnalyzer& analyzer() const { return analyzer_; }
  const MelFilterbank& filterbank() const { return mel_; }

  double SseTime(std::span<const ModuleFrame> modules) const;
  double MelSse(std::span<const ModuleFrame> modules) const;
  double PrioritySse(std::span<const ModuleFrame> modules,
                     const PerceptualWeights& weights) const;
  // Noise is reference - sum_i recon^(i).
  NoiseToMask NoiseModulation(std::span<const double> reference,
                              std::span<const ModuleFrame> modules,
                              const PamOutputs& pam) const;

  // Enabled terms blended as L1 + lambda * (L2 + L3 + L4). `pam` may be
  // null only when neither L3 nor L4 is enabled. When `grad` is non-null it
  // receives the analytic gradient with respect to every recon.
  FrameLoss Evaluate(std::span<const double> reference,
                     std::span<const ModuleFrame> modules,
                     const PamOutputs* pam,
                     LossGradient* grad = nullptr) const;

 private:
  void CheckShapes(std::span<const ModuleFrame> modules) const;

  SpectralAnalyzer analyzer_;
  LossConfig config_;
  MelFilterbank mel_;
};

// Blends four component values under `config`.
double BlendTotal(const LossConfig& config, double l1, double l2, double l3,
                  double l4);

// Averages frame losses.
LossReport Aggregate(std::vector<FrameLoss> frames);

nlohmann::json ToJson(const FrameLoss& frame);
nlohmann::json ToJson(const LossReport& report, const LossConfig& config);

}  // namespace psycal

#endif  // PSYCAL_LOSS_H_

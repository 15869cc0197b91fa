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

#ifndef PSYCAL_CODEC_H_
#define PSYCAL_CODEC_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "psycal/audio.h"
#include "psycal/bitstream.h"
#include "psycal/loss.h"
#include "psycal/quantizer.h"

namespace psycal {

// Linear analysis/synthesis pair with a stride-2 code: T samples map to
// T/2 code values.
struct LinearCodecModule {
  Eigen::MatrixXd analysis;   // code_length x frame_length
  Eigen::MatrixXd synthesis;  // frame_length x code_length
  Codebook codebook;

  std::size_t frame_length() const { return analysis.cols(); }
  std::size_t code_length() const { return analysis.rows(); }

  std::vector<double> Encode(std::span<const double> frame) const;
  std::vector<double> Decode(std::span<const double> code) const;
};

// Rows [first_row, first_row + rows) of the orthonormal DCT-II basis.
Eigen::MatrixXd DctRows(std::size_t frame_length, std::size_t first_row,
                        std::size_t rows);

// Module i consumes s - sum_{j<i} recon^(j).
struct ResidualStack {
  std::vector<LinearCodecModule> modules;

  std::size_t size() const { return modules.size(); }
  std::size_t frame_length() const;
  std::size_t code_length() const;
  // Throws std::invalid_argument on empty or inconsistent modules.
  void Validate() const;
};

enum class CodecQuant { kNone, kSoft, kHard };

struct CmrlEncoding {
  std::vector<std::vector<double>> targets;    // s^(i)
  std::vector<std::vector<double>> codes;      // z^(i)
  std::vector<QuantizedCode> quantized;        // h^(i) (empty for kNone)
  std::vector<std::vector<double>> recons;     // recon^(i)

  // h = [h^(1); ...; h^(N)].
  std::vector<double> Concatenated() const;
  std::vector<ModuleFrame> AsModuleFrames() const;
  std::vector<double> Reconstruction() const;
};

CmrlEncoding CmrlEncode(std::span<const double> frame,
                        const ResidualStack& stack, CodecQuant quant);
// Sum of per-module syntheses of the segmented code vector.
std::vector<double> CmrlDecode(std::span<const double> h,
                               const ResidualStack& stack);

struct StackInit {
  std::size_t frame_length = kDefaultFrameLength;
  std::size_t modules = 1;
  std::size_t kernels = 32;
  double alpha = kDefaultAlpha;
};

// DCT analysis of the lowest T/2 frequencies for every module, synthesis
// its transpose, kernels at quantiles of each module's codes on `frames`.
ResidualStack InitStack(std::span<const std::vector<double>> frames,
                        const StackInit& init);

enum class TrainOptimizer {
  kMomentum,
  // Per-parameter steps scaled by running gradient moments; insensitive to
  // the very different magnitudes of the loss terms.
  kAdam,
};

struct TrainOptions {
  // Per module; the last entry repeats for further modules.
  std::vector<std::size_t> epochs = {50, 30};
  std::vector<double> learning_rates = {2e-4, 2e-5};
  std::size_t batch_size = 128;
  TrainOptimizer optimizer = TrainOptimizer::kAdam;
  double momentum = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  // Global gradient norm cap per batch; 0 disables clipping.
  double clip_norm = 0.0;
  bool rate_control = true;
  double sample_rate = 44100.0;
  std::size_t hop = kDefaultFrameLength - kDefaultOverlap;
  std::uint64_t seed = 1;
};

struct EpochLog {
  std::size_t module = 0;
  std::size_t epoch = 0;
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;
  double l4 = 0.0;
  double total = 0.0;
  double max_nmr = 0.0;
  double bitrate_bps = 0.0;
  double blend_weight = 0.0;
};

struct TrainResult {
  ResidualStack stack;
  std::vector<EpochLog> log;
  RateController controller;
};

// Trains modules in cascade order; earlier modules stay frozen and feed
// their hard-quantized reconstructions forward. Throws NumericError when
// the loss stops being finite.
TrainResult TrainStack(std::span<const std::vector<double>> frames,
                       ResidualStack stack, const LossConfig& config,
                       RateController controller,
                       const TrainOptions& options);

void WriteTrainingLogCsv(std::ostream& out, std::span<const EpochLog> log);

// Mean per-frame loss of a stack on `frames` under hard quantization.
LossReport EvaluateStack(std::span<const std::vector<double>> frames,
                         const ResidualStack& stack, const LossConfig& config,
                         double sample_rate);

inline constexpr double kDbPerBit = 6.020599913279624;  // 20 log10(2)

struct BitAllocation {
  std::vector<int> bits_per_band;
  int budget = 0;
  // Band NMR in dB before any allocation.
  std::vector<double> initial_nmr_db;
  // Max band NMR in dB: initial value, then after each allocated bit.
  std::vector<double> nmr_trace;

  int bits_used() const;
};

// Greedy allocation on band NMRs in dB: each bit lowers a band by kDbPerBit;
// the band with the highest NMR (lowest index on ties) receives the next bit
// until the budget is spent or every band is at or below 0 dB.
BitAllocation GreedyAllocateBands(std::span<const double> band_nmr_db,
                                  int budget);

// Band NMR from the power sums of the PSD and mask over each critical band.
std::vector<double> CriticalBandNmrDb(const PowerSpectrumDb& psd,
                                      const GlobalMask& mask);

BitAllocation GreedyNmrAllocate(const PowerSpectrumDb& psd,
                                const GlobalMask& mask, int budget);

enum class DegradationKind { kWhiteNoise, kQuantize };

struct Degradation {
  DegradationKind kind = DegradationKind::kWhiteNoise;
  double snr_db = 20.0;
  int bits = 8;
  std::uint64_t seed = 1;
};

std::vector<double> Degrade(std::span<const double> signal,
                            const Degradation& degradation);

enum class StepRule {
  // step = min(learning_rate, L / |grad|^2). Non-monotone; suited to the
  // max() in the noise-to-mask term, whose subgradient is often not a
  // descent direction near ties.
  kPolyak,
  // Backtracking from learning_rate: the step halves until the total drops
  // by armijo * step * |grad|^2; no move when max_backtracks halvings fail.
  kArmijo,
  kFixed,
};

struct OptimizeOptions {
  std::size_t steps = 2000;
  double learning_rate = 2e-4;
  StepRule step_rule = StepRule::kPolyak;
  double armijo = 1e-4;
  std::size_t max_backtracks = 40;
};

struct AudibilityPoint {
  std::size_t step = 0;
  std::size_t audible_bins = 0;
  double max_nmr = 0.0;
  double total = 0.0;
};

struct OptimizeResult {
  std::vector<double> recon;
  // steps + 1 points, the first for the starting frame.
  std::vector<AudibilityPoint> trace;
};

// Gradient descent on the total loss with the reconstruction itself as the
// free variable. `pam` must come from `reference`.
OptimizeResult OptimizeReconstruction(std::span<const double> reference,
                                      std::span<const double> start,
                                      const PerceptualLoss& loss,
                                      const PamOutputs& pam,
                                      const OptimizeOptions& options);

void WriteAudibilityCsv(std::ostream& out,
                        std::span<const AudibilityPoint> trace);

// Tonal test material: a handful of partials with random frequencies,
// amplitudes and phases over a quiet noise floor.
struct ToySourceOptions {
  double sample_rate = 44100.0;
  std::size_t min_partials = 3;
  std::size_t max_partials = 8;
  double min_hz = 100.0;
  double max_hz = 8000.0;
  double min_amplitude = 0.02;
  double max_amplitude = 0.25;
  double noise_rms = 1e-3;
};

std::vector<double> ToyFrame(std::mt19937_64& rng, std::size_t length,
                             const ToySourceOptions& options = {});
AudioClip ToyClip(std::mt19937_64& rng, std::size_t samples,
                  const ToySourceOptions& options = {});

struct CheckpointMeta {
  double sample_rate = 44100.0;
  std::size_t overlap = kDefaultOverlap;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// "PSYC" | u32 version | u32 frame_length | u32 code_length | u32 modules
// | u32 sample_rate | u32 overlap, then per module: u32 K | f64 alpha |
// f64 kernels[K] | f64 analysis (row-major) | f64 synthesis (row-major).
void SaveCheckpoint(const ResidualStack& stack, const CheckpointMeta& meta,
                    const std::filesystem::path& path);
ResidualStack LoadCheckpoint(const std::filesystem::path& path,
                             CheckpointMeta* meta = nullptr);

// Frames the clip, hard-codes every frame through the stack and packs the
// kernel indices.
Bitstream EncodeClip(const AudioClip& clip, const ResidualStack& stack,
                     std::size_t overlap);
// Rebuilds the clip from indices using the stack's synthesis matrices and
// the kernels carried in the stream.
AudioClip DecodeClip(const Bitstream& stream, const ResidualStack& stack);

}  // namespace psycal

#endif  // PSYCAL_CODEC_H_

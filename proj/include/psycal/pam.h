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

#ifndef PSYCAL_PAM_H_
#define PSYCAL_PAM_H_

#include <cstddef>
#include <ostream>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "psycal/spectral.h"

namespace psycal {

// Critical-band rate in Bark.
double HzToBark(double hz);

// Absolute threshold of hearing in dB SPL at `hz` (> 0).
double AbsoluteThresholdDb(double hz);

struct AbsoluteThreshold {
  std::vector<double> q;
};

// Q for bins 0..bins-1 spaced bin_hz apart. The DC bin takes the value of
// bin 1.
AbsoluteThreshold ComputeAbsoluteThreshold(double bin_hz, std::size_t bins);

// Contiguous bin ranges [first, last] sharing the same integer Bark value.
// The DC bin is excluded.
struct BandRange {
  std::size_t first = 0;
  std::size_t last = 0;
};
std::vector<BandRange> CriticalBands(double bin_hz, std::size_t bins);

enum class MaskerKind { kTonal, kNoise };

struct Masker {
  std::size_t bin = 0;
  double level_db = 0.0;
  MaskerKind kind = MaskerKind::kTonal;
  double bark = 0.0;
};

struct MaskerSet {
  std::vector<Masker> maskers;

  std::size_t tonal_count() const;
  std::size_t noise_count() const;
  std::vector<Masker> OfKind(MaskerKind kind) const;
};

// Two-slope spreading function over Bark distance dz = z(bin) - z(masker),
// with level-dependent slopes. Defined on [lower, upper), -inf outside.
struct SpreadingFunction {
  double lower = -3.0;
  double upper = 8.0;
  double steep_slope = 17.0;
  double lower_level_coef = 0.4;
  double lower_far_offset = 11.0;
  double lower_near_offset = 6.0;
  double upper_level_coef = 0.15;

  // Returns kDbFloor outside the support.
  double operator()(double dz, double masker_level_db) const;
};

struct PamConfig {
  double tonal_prominence_db = 7.0;
  // Neighbourhood edges and half-widths (in bins of a 512-point FFT).
  double near_band_edge_hz = 2500.0;
  double mid_band_edge_hz = 5500.0;
  std::size_t near_half_width = 2;
  std::size_t mid_half_width = 3;
  std::size_t far_half_width = 6;

  double tonal_bark_slope = 0.275;
  double tonal_offset_db = 6.025;
  double noise_bark_slope = 0.175;
  double noise_offset_db = 2.025;
  double decimation_bark = 0.5;
  SpreadingFunction spreading;
};

// Columns are maskers, rows are bins.
struct IndividualThresholds {
  Eigen::MatrixXd u;  // tonal, F x R
  Eigen::MatrixXd v;  // noise, F x B
};

struct GlobalMask {
  std::vector<double> m;
};

struct PerceptualWeights {
  std::vector<double> w;
};

// m_f = 10 log10(10^(Q_f/10) + sum_r 10^(U_fr/10) + sum_b 10^(V_fb/10)).
GlobalMask ComputeGlobalMask(const IndividualThresholds& thresholds,
                             const AbsoluteThreshold& ath);

// w_f = log10(10^(p_f/10) / 10^(m_f/10) + 1).
PerceptualWeights ComputePerceptualWeights(const PowerSpectrumDb& psd,
                                           const GlobalMask& mask);

struct PamAnalysis {
  PowerSpectrumDb psd;
  MaskerSet maskers;
  IndividualThresholds thresholds;
  GlobalMask mask;
  PerceptualWeights weights;
};

// Simultaneous-masking model for one frame length and sample rate. Bark and
// threshold tables are computed once; all methods are const.
class PsychoacousticModel {
 public:
  PsychoacousticModel(const SpectralAnalyzer& analyzer, PamConfig config = {});

  const SpectralAnalyzer& analyzer() const { return analyzer_; }
  const PamConfig& config() const { return config_; }
  std::size_t bins() const { return bark_.size(); }
  std::span<const double> bark() const { return bark_; }
  const AbsoluteThreshold& absolute_threshold() const { return ath_; }

  // Neighbourhood half-widths checked for tonal prominence at `bin`.
  std::size_t MaxNeighbourDistance(std::size_t bin) const;

  // Tonal peaks and per-band noise maskers before decimation.
  MaskerSet FindCandidates(const PowerSpectrumDb& psd) const;
  // Drops maskers below the absolute threshold, then keeps only the
  // strongest of any maskers closer than the decimation distance.
  MaskerSet Decimate(MaskerSet candidates) const;
  MaskerSet DetectMaskers(const PowerSpectrumDb& psd) const;

  IndividualThresholds ComputeIndividualThresholds(
      const MaskerSet& maskers) const;

  PamAnalysis Analyze(std::span<const double> frame) const;

 private:
  SpectralAnalyzer analyzer_;
  PamConfig config_;
  std::vector<double> bark_;
  AbsoluteThreshold ath_;
};

// Per-bin table: bin,hz,bark,psd_db,ath_db,mask_db,weight.
void WritePamBinsCsv(std::ostream& out, const PamAnalysis& analysis,
                     const PsychoacousticModel& model);
// bin,hz,bark,kind,level_db.
void WriteMaskersCsv(std::ostream& out, const MaskerSet& maskers,
                     double bin_hz);

}  // namespace psycal

#endif  // PSYCAL_PAM_H_

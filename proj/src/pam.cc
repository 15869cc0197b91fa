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

#include "psycal/pam.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace psycal {

namespace {

double DbToPower(double db) { return std::pow(10.0, 0.1 * db); }

double PowerToDb(double power) {
  if (!(power > 0.0)) return kDbFloor;
  return std::max(kDbFloor, 10.0 * std::log10(power));
}

}  // namespace

double HzToBark(double hz) {
  return 13.0 * std::atan(0.00076 * hz) +
         3.5 * std::atan((hz / 7500.0) * (hz / 7500.0));
}

double AbsoluteThresholdDb(double hz) {
  const double khz = hz / 1000.0;
  return 3.64 * std::pow(khz, -0.8) -
         6.5 * std::exp(-0.6 * (khz - 3.3) * (khz - 3.3)) +
         1e-3 * std::pow(khz, 4.0);
}

AbsoluteThreshold ComputeAbsoluteThreshold(double bin_hz, std::size_t bins) {
  if (!(bin_hz > 0.0)) throw std::invalid_argument("bin spacing must be > 0");
  AbsoluteThreshold ath;
  ath.q.resize(bins);
  for (std::size_t f = 1; f < bins; ++f) {
    ath.q[f] = AbsoluteThresholdDb(f * bin_hz);
  }
  if (bins > 1) {
    ath.q[0] = ath.q[1];
  } else if (bins == 1) {
    ath.q[0] = AbsoluteThresholdDb(bin_hz);
  }
  return ath;
}

std::vector<BandRange> CriticalBands(double bin_hz, std::size_t bins) {
  std::vector<BandRange> bands;
  long current = -1;
  for (std::size_t f = 1; f < bins; ++f) {
    const long band = static_cast<long>(std::floor(HzToBark(f * bin_hz)));
    if (band != current) {
      bands.push_back({f, f});
      current = band;
    } else {
      bands.back().last = f;
    }
  }
  return bands;
}

std::size_t MaskerSet::tonal_count() const {
  return std::count_if(maskers.begin(), maskers.end(), [](const Masker& m) {
    return m.kind == MaskerKind::kTonal;
  });
}

std::size_t MaskerSet::noise_count() const {
  return maskers.size() - tonal_count();
}

std::vector<Masker> MaskerSet::OfKind(MaskerKind kind) const {
  std::vector<Masker> out;
  for (const Masker& m : maskers) {
    if (m.kind == kind) out.push_back(m);
  }
  return out;
}

double SpreadingFunction::operator()(double dz, double level) const {
  if (dz < lower || dz >= upper) return kDbFloor;
  if (dz < -1.0) return steep_slope * dz - lower_level_coef * level + lower_far_offset;
  if (dz < 0.0) return (lower_level_coef * level + lower_near_offset) * dz;
  if (dz < 1.0) return -steep_slope * dz;
  return (upper_level_coef * level - steep_slope) * dz - upper_level_coef * level;
}

GlobalMask ComputeGlobalMask(const IndividualThresholds& thresholds,
                             const AbsoluteThreshold& ath) {
  const std::size_t bins = ath.q.size();
  if ((thresholds.u.cols() > 0 &&
       static_cast<std::size_t>(thresholds.u.rows()) != bins) ||
      (thresholds.v.cols() > 0 &&
       static_cast<std::size_t>(thresholds.v.rows()) != bins)) {
    throw std::invalid_argument("threshold matrices do not match bin count");
  }
  GlobalMask mask;
  mask.m.resize(bins);
  // Relative to Q_f, so the masker-free case returns Q_f bit for bit and
  // rounding can never pull m_f below it.
  for (std::size_t f = 0; f < bins; ++f) {
    const double q = ath.q[f];
    double excess = 0.0;
    for (Eigen::Index r = 0; r < thresholds.u.cols(); ++r) {
      excess += DbToPower(thresholds.u(f, r) - q);
    }
    for (Eigen::Index b = 0; b < thresholds.v.cols(); ++b) {
      excess += DbToPower(thresholds.v(f, b) - q);
    }
    mask.m[f] = q + 10.0 * std::log10(1.0 + excess);
  }
  return mask;
}

PerceptualWeights ComputePerceptualWeights(const PowerSpectrumDb& psd,
                                           const GlobalMask& mask) {
  if (psd.values.size() != mask.m.size()) {
    throw std::invalid_argument("PSD and mask lengths differ");
  }
  PerceptualWeights weights;
  weights.w.resize(psd.values.size());
  for (std::size_t f = 0; f < psd.values.size(); ++f) {
    const double ratio = std::pow(10.0, 0.1 * (psd.values[f] - mask.m[f]));
    weights.w[f] = std::log1p(ratio) / std::log(10.0);
  }
  return weights;
}

PsychoacousticModel::PsychoacousticModel(const SpectralAnalyzer& analyzer,
                                         PamConfig config)
    : analyzer_(analyzer), config_(config) {
  const std::size_t bins = analyzer_.bins();
  bark_.resize(bins);
  for (std::size_t f = 0; f < bins; ++f) {
    bark_[f] = HzToBark(f * analyzer_.bin_hz());
  }
  ath_ = ComputeAbsoluteThreshold(analyzer_.bin_hz(), bins);
}

std::size_t PsychoacousticModel::MaxNeighbourDistance(std::size_t bin) const {
  const double hz = bin * analyzer_.bin_hz();
  std::size_t base = config_.far_half_width;
  if (hz < config_.near_band_edge_hz) {
    base = config_.near_half_width;
  } else if (hz < config_.mid_band_edge_hz) {
    base = config_.mid_half_width;
  }
  const double scale = analyzer_.frame_length() / 512.0;
  return static_cast<std::size_t>(std::lround(base * scale));
}

MaskerSet PsychoacousticModel::FindCandidates(const PowerSpectrumDb& psd) const {
  const std::vector<double>& p = psd.values;
  const std::size_t bins = p.size();
  if (bins != this->bins()) {
    throw std::invalid_argument("PSD length does not match model");
  }
  MaskerSet set;
  std::vector<bool> consumed(bins, false);
  const std::size_t min_distance =
      std::max<std::size_t>(2, std::lround(2 * analyzer_.frame_length() / 512.0));

  for (std::size_t k = 1; k + 1 < bins; ++k) {
    if (!(p[k] > p[k - 1] && p[k] > p[k + 1])) continue;
    const std::size_t reach = MaxNeighbourDistance(k);
    bool prominent = true;
    for (std::size_t d = min_distance; d <= reach && prominent; ++d) {
      if (k >= d && !(p[k] > p[k - d] + config_.tonal_prominence_db)) {
        prominent = false;
      }
      if (k + d < bins && !(p[k] > p[k + d] + config_.tonal_prominence_db)) {
        prominent = false;
      }
    }
    if (!prominent) continue;
    const double level = PowerToDb(DbToPower(p[k - 1]) + DbToPower(p[k]) +
                                   DbToPower(p[k + 1]));
    set.maskers.push_back({k, level, MaskerKind::kTonal, bark_[k]});
    const std::size_t lo = k > reach ? k - reach : 0;
    const std::size_t hi = std::min(bins - 1, k + std::max<std::size_t>(reach, 1));
    for (std::size_t j = lo; j <= hi; ++j) consumed[j] = true;
  }

  for (const BandRange& band : CriticalBands(analyzer_.bin_hz(), bins)) {
    double power = 0.0;
    double log_sum = 0.0;
    for (std::size_t f = band.first; f <= band.last; ++f) {
      log_sum += std::log(static_cast<double>(f));
      if (!consumed[f]) power += DbToPower(p[f]);
    }
    if (!(power > 0.0)) continue;
    const double count = band.last - band.first + 1;
    std::size_t centre =
        static_cast<std::size_t>(std::lround(std::exp(log_sum / count)));
    centre = std::clamp(centre, band.first, band.last);
    set.maskers.push_back(
        {centre, PowerToDb(power), MaskerKind::kNoise, bark_[centre]});
  }
  return set;
}

MaskerSet PsychoacousticModel::Decimate(MaskerSet candidates) const {
  std::vector<Masker> audible;
  for (const Masker& m : candidates.maskers) {
    if (m.level_db >= ath_.q[m.bin]) audible.push_back(m);
  }
  std::stable_sort(audible.begin(), audible.end(),
                   [](const Masker& a, const Masker& b) {
                     if (a.bin != b.bin) return a.bin < b.bin;
                     return a.kind == MaskerKind::kTonal &&
                            b.kind == MaskerKind::kNoise;
                   });
  MaskerSet out;
  for (const Masker& m : audible) {
    if (!out.maskers.empty() &&
        m.bark - out.maskers.back().bark < config_.decimation_bark) {
      if (m.level_db > out.maskers.back().level_db) out.maskers.back() = m;
      continue;
    }
    out.maskers.push_back(m);
  }
  return out;
}

MaskerSet PsychoacousticModel::DetectMaskers(const PowerSpectrumDb& psd) const {
  return Decimate(FindCandidates(psd));
}

IndividualThresholds PsychoacousticModel::ComputeIndividualThresholds(
    const MaskerSet& maskers) const {
  const std::size_t bins = this->bins();
  const std::vector<Masker> tonal = maskers.OfKind(MaskerKind::kTonal);
  const std::vector<Masker> noise = maskers.OfKind(MaskerKind::kNoise);
  IndividualThresholds out;
  out.u.resize(bins, tonal.size());
  out.v.resize(bins, noise.size());
  const SpreadingFunction& sf = config_.spreading;
  for (std::size_t f = 0; f < bins; ++f) {
    for (std::size_t r = 0; r < tonal.size(); ++r) {
      const Masker& m = tonal[r];
      const double spread = sf(bark_[f] - m.bark, m.level_db);
      out.u(f, r) = spread <= kDbFloor
                        ? kDbFloor
                        : m.level_db - config_.tonal_bark_slope * m.bark +
                              spread - config_.tonal_offset_db;
    }
    for (std::size_t b = 0; b < noise.size(); ++b) {
      const Masker& m = noise[b];
      const double spread = sf(bark_[f] - m.bark, m.level_db);
      out.v(f, b) = spread <= kDbFloor
                        ? kDbFloor
                        : m.level_db - config_.noise_bark_slope * m.bark +
                              spread - config_.noise_offset_db;
    }
  }
  return out;
}

PamAnalysis PsychoacousticModel::Analyze(std::span<const double> frame) const {
  PamAnalysis a;
  a.psd = analyzer_.PsdSpl(frame);
  a.maskers = DetectMaskers(a.psd);
  a.thresholds = ComputeIndividualThresholds(a.maskers);
  a.mask = ComputeGlobalMask(a.thresholds, ath_);
  a.weights = ComputePerceptualWeights(a.psd, a.mask);
  return a;
}

void WritePamBinsCsv(std::ostream& out, const PamAnalysis& analysis,
                     const PsychoacousticModel& model) {
  const double bin_hz = model.analyzer().bin_hz();
  out << "bin,hz,bark,psd_db,ath_db,mask_db,weight\n";
  for (std::size_t f = 0; f < model.bins(); ++f) {
    out << f << ',' << f * bin_hz << ',' << model.bark()[f] << ','
        << analysis.psd.values[f] << ',' << model.absolute_threshold().q[f]
        << ',' << analysis.mask.m[f] << ',' << analysis.weights.w[f] << '\n';
  }
}

void WriteMaskersCsv(std::ostream& out, const MaskerSet& maskers,
                     double bin_hz) {
  out << "bin,hz,bark,kind,level_db\n";
  for (const Masker& m : maskers.maskers) {
    out << m.bin << ',' << m.bin * bin_hz << ',' << m.bark << ','
        << (m.kind == MaskerKind::kTonal ? "tonal" : "noise") << ','
        << m.level_db << '\n';
  }
}

}  // namespace psycal

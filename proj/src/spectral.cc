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

#include "psycal/spectral.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include <unsupported/Eigen/FFT>

namespace psycal {

namespace {

// Eigen's FFT caches plans in mutable state; one instance per thread keeps
// const analyzers safe to share.
Eigen::FFT<double>& ThreadFft() {
  thread_local Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::Unscaled);
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  return fft;
}

}  // namespace

RealFft::RealFft(std::size_t size) : size_(size) {
  if (size < 2 || size % 2 != 0) {
    throw std::invalid_argument("real FFT size must be even and >= 2");
  }
}

std::vector<std::complex<double>> RealFft::Forward(
    std::span<const double> x) const {
  if (x.size() != size_) throw std::invalid_argument("real FFT size mismatch");
  std::vector<std::complex<double>> out(size_ / 2 + 1);
  ThreadFft().fwd(out.data(), x.data(), static_cast<Eigen::Index>(size_));
  return out;
}

std::vector<double> RealFft::InverseHermitian(
    std::span<const std::complex<double>> half) const {
  if (half.size() != size_ / 2 + 1) {
    throw std::invalid_argument("Hermitian spectrum length mismatch");
  }
  std::vector<double> out(size_);
  ThreadFft().inv(out.data(), half.data(), static_cast<Eigen::Index>(size_));
  return out;
}

std::vector<double> HannWindow(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  }
  return w;
}

SpectralAnalyzer::SpectralAnalyzer(std::size_t frame_length,
                                   double sample_rate, AnalysisWindow window)
    : frame_length_(frame_length),
      sample_rate_(sample_rate),
      fft_(frame_length) {
  if (frame_length < 2 || frame_length % 2 != 0) {
    throw std::invalid_argument("frame length must be even and >= 2");
  }
  if (!(sample_rate > 0.0)) {
    throw std::invalid_argument("sample rate must be positive");
  }
  window_ = window == AnalysisWindow::kHann
                ? HannWindow(frame_length)
                : std::vector<double>(frame_length, 1.0);
  // An on-bin sinusoid of unit amplitude has |X_k| = T/2 * mean(window).
  const double coherent_gain =
      std::accumulate(window_.begin(), window_.end(), 0.0) / frame_length;
  norm_offset_db_ =
      kFullScaleSpl - 20.0 * std::log10(0.5 * frame_length * coherent_gain);
}

void SpectralAnalyzer::CheckFrame(std::span<const double> frame) const {
  if (frame.size() != frame_length_) {
    throw std::invalid_argument("frame has " + std::to_string(frame.size()) +
                                " samples, expected " +
                                std::to_string(frame_length_));
  }
}

std::vector<std::complex<double>> SpectralAnalyzer::Transform(
    std::span<const double> frame) const {
  CheckFrame(frame);
  std::vector<double> windowed(frame_length_);
  for (std::size_t t = 0; t < frame_length_; ++t) windowed[t] = window_[t] * frame[t];
  return fft_.Forward(windowed);
}

MagnitudeSpectrum SpectralAnalyzer::Magnitudes(
    std::span<const double> frame) const {
  const auto spec = Transform(frame);
  MagnitudeSpectrum out;
  out.bin_hz = bin_hz();
  out.values.resize(spec.size());
  for (std::size_t f = 0; f < spec.size(); ++f) out.values[f] = std::abs(spec[f]);
  return out;
}

std::vector<double> SpectralAnalyzer::Power(
    std::span<const double> frame) const {
  const auto spec = Transform(frame);
  std::vector<double> out(spec.size());
  for (std::size_t f = 0; f < spec.size(); ++f) out[f] = std::norm(spec[f]);
  return out;
}

double PowerToSpl(double power, double norm_offset_db) {
  if (!(power > 0.0)) return kDbFloor;
  return std::max(kDbFloor, norm_offset_db + 10.0 * std::log10(power));
}

PowerSpectrumDb SpectralAnalyzer::PsdSpl(std::span<const double> frame) const {
  const auto power = Power(frame);
  PowerSpectrumDb out;
  out.norm_offset_db = norm_offset_db_;
  out.bin_hz = bin_hz();
  out.values.resize(power.size());
  for (std::size_t f = 0; f < power.size(); ++f) {
    out.values[f] = PowerToSpl(power[f], norm_offset_db_);
  }
  return out;
}

std::vector<double> SpectralAnalyzer::Backprop(
    std::span<const std::complex<double>> grad_bins) const {
  if (grad_bins.size() != bins()) {
    throw std::invalid_argument("gradient bin count mismatch");
  }
  // dL/dx_t = w_t * Re(sum_f G_f exp(+2 pi i f t / T)), evaluated as the
  // inverse of a Hermitian spectrum holding G_f / 2 off the edges.
  const std::size_t last = bins() - 1;
  std::vector<std::complex<double>> half(bins());
  half[0] = grad_bins[0].real();
  half[last] = grad_bins[last].real();
  for (std::size_t f = 1; f < last; ++f) half[f] = 0.5 * grad_bins[f];
  std::vector<double> out = fft_.InverseHermitian(half);
  for (std::size_t t = 0; t < frame_length_; ++t) out[t] *= window_[t];
  return out;
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double MelToHz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

MelFilterbank::MelFilterbank(std::size_t bins, double sample_rate,
                             std::size_t bands, MelNormalization norm)
    : bins_(bins) {
  if (bands == 0) throw std::invalid_argument("mel band count must be >= 1");
  if (bins < 2) throw std::invalid_argument("need at least two bins");
  if (bands > bins) {
    throw std::invalid_argument(std::to_string(bands) +
                                " mel bands exceed " + std::to_string(bins) +
                                " spectral bins");
  }
  const double nyquist = sample_rate / 2.0;
  const double bin_hz = nyquist / (bins - 1);
  const double mel_max = HzToMel(nyquist);
  std::vector<double> centres(bands + 2);
  for (std::size_t i = 0; i < centres.size(); ++i) {
    centres[i] = MelToHz(mel_max * i / (bands + 1));
  }
  rows_.resize(bands);
  for (std::size_t l = 0; l < bands; ++l) {
    const double lo = centres[l];
    const double mid = centres[l + 1];
    const double hi = centres[l + 2];
    Row& row = rows_[l];
    const std::size_t first = static_cast<std::size_t>(std::ceil(lo / bin_hz));
    row.first_bin = std::min(first, bins);
    for (std::size_t k = row.first_bin; k < bins; ++k) {
      const double f = k * bin_hz;
      if (f > hi) break;
      const double rise = (f - lo) / (mid - lo);
      const double fall = (hi - f) / (hi - mid);
      row.weights.push_back(std::max(0.0, std::min(rise, fall)));
    }
    if (norm == MelNormalization::kArea) {
      const double sum =
          std::accumulate(row.weights.begin(), row.weights.end(), 0.0);
      if (sum > 0.0) {
        for (double& w : row.weights) w /= sum;
      }
    }
  }
}

MelSpectrum MelFilterbank::Apply(std::span<const double> power) const {
  if (power.size() != bins_) {
    throw std::invalid_argument("power spectrum length mismatch");
  }
  MelSpectrum out;
  out.values.resize(rows_.size());
  for (std::size_t l = 0; l < rows_.size(); ++l) {
    const Row& row = rows_[l];
    double acc = 0.0;
    for (std::size_t j = 0; j < row.weights.size(); ++j) {
      acc += row.weights[j] * power[row.first_bin + j];
    }
    out.values[l] = acc;
  }
  return out;
}

std::vector<double> MelFilterbank::ApplyTranspose(
    std::span<const double> grad_bands) const {
  if (grad_bands.size() != rows_.size()) {
    throw std::invalid_argument("mel gradient length mismatch");
  }
  std::vector<double> out(bins_, 0.0);
  for (std::size_t l = 0; l < rows_.size(); ++l) {
    const Row& row = rows_[l];
    for (std::size_t j = 0; j < row.weights.size(); ++j) {
      out[row.first_bin + j] += row.weights[j] * grad_bands[l];
    }
  }
  return out;
}

double MelFilterbank::Weight(std::size_t band, std::size_t bin) const {
  const Row& row = rows_.at(band);
  if (bin < row.first_bin || bin >= row.first_bin + row.weights.size()) {
    return 0.0;
  }
  return row.weights[bin - row.first_bin];
}

void WriteSpectrumCsv(std::ostream& out, std::span<const double> values,
                      double bin_hz) {
  out << "bin,hz,value\n";
  for (std::size_t f = 0; f < values.size(); ++f) {
    out << f << ',' << f * bin_hz << ',' << values[f] << '\n';
  }
}

}  // namespace psycal

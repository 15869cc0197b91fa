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

#ifndef PSYCAL_SPECTRAL_H_
#define PSYCAL_SPECTRAL_H_

#include <complex>
#include <cstddef>
#include <ostream>
#include <span>
#include <vector>

namespace psycal {

inline constexpr double kDbFloor = -200.0;
// Level assigned to the peak bin of a full-scale on-bin sinusoid.
inline constexpr double kFullScaleSpl = 96.0;
inline constexpr std::size_t kDefaultMelBands = 128;

// Real-input DFT of even length n.
class RealFft {
 public:
  explicit RealFft(std::size_t size);

  std::size_t size() const { return size_; }

  // Bins 0..n/2 of the forward DFT, exp(-i...) convention, unscaled.
  std::vector<std::complex<double>> Forward(std::span<const double> x) const;
  // Unscaled inverse of a Hermitian spectrum given by bins 0..n/2:
  // out[t] = sum_{k<n} X_k exp(+2 pi i k t / n), with X_{n-k} = conj(X_k).
  std::vector<double> InverseHermitian(
      std::span<const std::complex<double>> half) const;

 private:
  std::size_t size_;
};

enum class AnalysisWindow { kNone, kHann };

// Periodic Hann window of length n.
std::vector<double> HannWindow(std::size_t n);

struct MagnitudeSpectrum {
  std::vector<double> values;
  double bin_hz = 0.0;
};

// Per-bin level in dB SPL, floored at kDbFloor.
struct PowerSpectrumDb {
  std::vector<double> values;
  double norm_offset_db = 0.0;
  double bin_hz = 0.0;
};

struct MelSpectrum {
  std::vector<double> values;
  std::size_t band_count() const { return values.size(); }
};

// Windowed real-input spectrum of fixed-length frames. Immutable after
// construction; safe to share between threads.
class SpectralAnalyzer {
 public:
  SpectralAnalyzer(std::size_t frame_length, double sample_rate,
                   AnalysisWindow window = AnalysisWindow::kHann);

  std::size_t frame_length() const { return frame_length_; }
  // F = T/2 + 1.
  std::size_t bins() const { return frame_length_ / 2 + 1; }
  double sample_rate() const { return sample_rate_; }
  double bin_hz() const { return sample_rate_ / frame_length_; }
  std::span<const double> window() const { return window_; }
  // Offset such that a full-scale sinusoid on a bin centre peaks at 96 dB.
  double norm_offset_db() const { return norm_offset_db_; }

  // First F coefficients of DFT(window * frame).
  std::vector<std::complex<double>> Transform(
      std::span<const double> frame) const;

  MagnitudeSpectrum Magnitudes(std::span<const double> frame) const;
  // |X_f|^2 without SPL referencing.
  std::vector<double> Power(std::span<const double> frame) const;
  PowerSpectrumDb PsdSpl(std::span<const double> frame) const;

  // Adjoint of Transform for real-valued losses: given grad_bins[f] =
  // dL/dRe(X_f) + i dL/dIm(X_f), returns dL/dframe.
  std::vector<double> Backprop(
      std::span<const std::complex<double>> grad_bins) const;

 private:
  void CheckFrame(std::span<const double> frame) const;

  std::size_t frame_length_;
  double sample_rate_;
  std::vector<double> window_;
  double norm_offset_db_;
  RealFft fft_;
};

// Converts linear power |X|^2 to dB SPL with the given offset.
double PowerToSpl(double power, double norm_offset_db);

double HzToMel(double hz);
double MelToHz(double mel);

enum class MelNormalization {
  // Unit-height triangles; rows sum to one per bin between the first and
  // last band centres.
  kPartitionOfUnity,
  // Each triangle scaled so its weights sum to one.
  kArea,
};

// Triangular filters on the mel scale spanning 0 Hz to Nyquist. Each bin
// touches at most two bands.
class MelFilterbank {
 public:
  MelFilterbank(std::size_t bins, double sample_rate, std::size_t bands,
                MelNormalization norm = MelNormalization::kPartitionOfUnity);

  std::size_t bands() const { return rows_.size(); }
  std::size_t bins() const { return bins_; }

  MelSpectrum Apply(std::span<const double> power) const;
  // Adjoint: dL/dpower from dL/dmel.
  std::vector<double> ApplyTranspose(std::span<const double> grad_bands) const;
  // Dense weight of `bin` in `band`.
  double Weight(std::size_t band, std::size_t bin) const;

 private:
  struct Row {
    std::size_t first_bin = 0;
    std::vector<double> weights;
  };
  std::size_t bins_;
  std::vector<Row> rows_;
};

// "bin,hz,value" rows with a header line.
void WriteSpectrumCsv(std::ostream& out, std::span<const double> values,
                      double bin_hz);

}  // namespace psycal

#endif  // PSYCAL_SPECTRAL_H_

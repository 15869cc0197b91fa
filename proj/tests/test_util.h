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

// Independent reference implementations and fixtures shared by the tests.
// Nothing here calls into the library code it is used to check.

#ifndef PSYCAL_TESTS_TEST_UTIL_H_
#define PSYCAL_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <gtest/gtest.h>

namespace psycal::test {

inline std::filesystem::path TempDir(const std::string& name) {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  std::filesystem::path dir = std::filesystem::temp_directory_path() /
                              "psycal_tests" / name /
                              (std::string(info->test_suite_name()) + "." +
                               info->name());
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void PutU16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xFF));
  s.push_back(static_cast<char>(v >> 8));
}

inline void PutU32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>(v >> (8 * i)));
}

inline void WriteRawWav(const std::filesystem::path& path, std::uint16_t format,
                        std::uint16_t channels, std::uint32_t rate,
                        std::uint16_t bits, const std::string& payload) {
  std::string s = "RIFF";
  PutU32(s, static_cast<std::uint32_t>(36 + payload.size()));
  s += "WAVEfmt ";
  PutU32(s, 16);
  PutU16(s, format);
  PutU16(s, channels);
  PutU32(s, rate);
  PutU32(s, rate * channels * bits / 8);
  PutU16(s, static_cast<std::uint16_t>(channels * bits / 8));
  PutU16(s, bits);
  s += "data";
  PutU32(s, static_cast<std::uint32_t>(payload.size()));
  s += payload;
  std::ofstream(path, std::ios::binary) << s;
}

inline void WritePcm16File(const std::filesystem::path& path,
                           const std::vector<std::int16_t>& interleaved,
                           std::uint32_t rate, std::uint16_t channels) {
  std::string payload;
  for (std::int16_t v : interleaved) PutU16(payload, static_cast<std::uint16_t>(v));
  WriteRawWav(path, 1, channels, rate, 16, payload);
}

// O(n^2) DFT of a real sequence, bins 0..n/2.
inline std::vector<std::complex<double>> DirectDft(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    long double re = 0.0L;
    long double im = 0.0L;
    for (std::size_t t = 0; t < n; ++t) {
      const long double a = -2.0L * std::numbers::pi_v<long double> *
                            static_cast<long double>((k * t) % n) / n;
      re += x[t] * std::cos(a);
      im += x[t] * std::sin(a);
    }
    out[k] = {static_cast<double>(re), static_cast<double>(im)};
  }
  return out;
}

inline std::vector<double> Hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t t = 0; t < n; ++t) {
    w[t] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * t / n);
  }
  return w;
}

inline std::vector<double> Sine(std::size_t n, double rate, double hz,
                                double amplitude, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) {
    x[t] = amplitude * std::sin(2.0 * std::numbers::pi * hz * t / rate + phase);
  }
  return x;
}

// Terhardt-style threshold in quiet, dB SPL.
inline double AthOracle(double hz) {
  const double k = hz / 1000.0;
  return 3.64 * std::pow(k, -0.8) - 6.5 * std::exp(-0.6 * (k - 3.3) * (k - 3.3)) +
         1e-3 * k * k * k * k;
}

inline double BarkOracle(double hz) {
  return 13.0 * std::atan(7.6e-4 * hz) + 3.5 * std::atan((hz / 7500.0) * (hz / 7500.0));
}

// Level-dependent two-slope spreading function of the MPEG-1 model 1,
// dz = z(target) - z(masker) in Bark, p = masker level in dB.
inline double SpreadOracle(double dz, double p) {
  if (dz >= -3.0 && dz < -1.0) return 17.0 * dz - 0.4 * p + 11.0;
  if (dz >= -1.0 && dz < 0.0) return (0.4 * p + 6.0) * dz;
  if (dz >= 0.0 && dz < 1.0) return -17.0 * dz;
  if (dz >= 1.0 && dz < 8.0) return (0.15 * p - 17.0) * dz - 0.15 * p;
  return -std::numeric_limits<double>::infinity();
}

struct OracleMasker {
  double bark;
  double level;
  bool tonal;
};

// Global threshold at a bin of Bark rate z, as a direct power sum.
inline double GlobalMaskOracle(double z, double ath_db,
                               const std::vector<OracleMasker>& maskers) {
  long double sum = std::pow(10.0L, ath_db / 10.0L);
  for (const OracleMasker& m : maskers) {
    const double sf = SpreadOracle(z - m.bark, m.level);
    if (!std::isfinite(sf)) continue;
    const double t = m.tonal ? m.level - 0.275 * m.bark + sf - 6.025
                             : m.level - 0.175 * m.bark + sf - 2.025;
    sum += std::pow(10.0L, t / 10.0L);
  }
  return static_cast<double>(10.0L * std::log10(sum));
}

inline double MelOracle(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

inline double EntropyBits(std::span<const double> p) {
  double h = 0.0;
  for (double q : p) {
    if (q > 0.0) h -= q * std::log2(q);
  }
  return h;
}

}  // namespace psycal::test

#endif  // PSYCAL_TESTS_TEST_UTIL_H_

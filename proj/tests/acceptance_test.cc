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

// Runs the end-to-end acceptance checks and prints one PASS/FAIL line each.
// Exits non-zero when any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <string>

#include "psycal/codec.h"
#include "psycal/pam.h"
#include "psycal/quantizer.h"
#include "psycal/spectral.h"
#include "test_util.h"

namespace psycal {
namespace {

constexpr double kRate = 44100.0;
constexpr std::size_t kLength = 512;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

Outcome CheckGlobalMask() {
  const SpectralAnalyzer analyzer(kLength, kRate);
  const PsychoacousticModel model(analyzer);
  const auto& q = model.absolute_threshold().q;
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> bin(1, analyzer.bins() - 1);
  std::uniform_real_distribution<double> level(0.0, 100.0);
  std::bernoulli_distribution tonal(0.5);
  double worst = 0.0;
  bool above_q = true;
  for (int trial = 0; trial < 200; ++trial) {
    MaskerSet set;
    std::vector<test::OracleMasker> oracle;
    const int count = 1 + trial % 25;
    for (int i = 0; i < count; ++i) {
      const std::size_t b = bin(rng);
      const Masker m{b, level(rng), tonal(rng) ? MaskerKind::kTonal : MaskerKind::kNoise,
                     HzToBark(b * analyzer.bin_hz())};
      set.maskers.push_back(m);
      oracle.push_back({test::BarkOracle(b * analyzer.bin_hz()), m.level_db,
                        m.kind == MaskerKind::kTonal});
    }
    const auto mask = ComputeGlobalMask(model.ComputeIndividualThresholds(set),
                                        model.absolute_threshold());
    for (std::size_t f = 0; f < analyzer.bins(); ++f) {
      const double ath = test::AthOracle(std::max<std::size_t>(f, 1) * analyzer.bin_hz());
      const double ref =
          test::GlobalMaskOracle(test::BarkOracle(f * analyzer.bin_hz()), ath, oracle);
      worst = std::max(worst, std::abs(mask.m[f] - ref));
      above_q = above_q && mask.m[f] >= q[f];
    }
  }
  const IndividualThresholds none{Eigen::MatrixXd(analyzer.bins(), 0),
                                  Eigen::MatrixXd(analyzer.bins(), 0)};
  const bool exact_q = ComputeGlobalMask(none, model.absolute_threshold()).m == q;
  return {worst <= 1e-10 && above_q && exact_q,
          Format("200 sets, max |m - direct| = %.2e dB, m >= Q: %s, empty set == Q: %s",
                 worst, above_q ? "yes" : "no", exact_q ? "yes" : "no")};
}

Outcome CheckLossSemantics() {
  const SpectralAnalyzer analyzer(kLength, kRate);
  const PsychoacousticModel model(analyzer);
  const PerceptualLoss loss(analyzer, LossConfig::FromPreset(ModelPreset::kD));
  std::mt19937_64 rng(2);
  bool l3_zero = true;
  bool iff = true;
  std::size_t audible_cases = 0;
  for (int i = 0; i < 40; ++i) {
    const std::vector<double> s = ToyFrame(rng, kLength);
    const PamOutputs pam = PamOutputs::FromAnalysis(model.Analyze(s));
    const double snr = 10.0 + 2.0 * i;
    const std::vector<ModuleFrame> mods = {
        {s, Degrade(s, {.snr_db = snr, .seed = static_cast<std::uint64_t>(i)})}};
    PerceptualWeights zero;
    zero.w.assign(analyzer.bins(), 0.0);
    l3_zero = l3_zero && loss.PrioritySse(mods, zero) == 0.0;
    const NoiseToMask ntm = loss.NoiseModulation(s, mods, pam);
    const bool all_masked =
        std::all_of(ntm.ratio.begin(), ntm.ratio.end(), [](double r) { return r <= 1.0; });
    iff = iff && ((ntm.loss == 0.0) == all_masked);
    audible_cases += all_masked ? 0 : 1;
  }
  // Hand-built boundary cases.
  iff = iff && NoiseToMaskFromRatios({1.0, 0.2, 1.0}).loss == 0.0 &&
        NoiseToMaskFromRatios({1.0, 0.2, std::nextafter(1.0, 2.0)}).loss > 0.0;
  const double example = NoiseToMaskFromRatios({0.5, 2.0, 1.5}).loss;
  return {l3_zero && iff && example == 1.0 && audible_cases > 0 && audible_cases < 40,
          Format("L3(w=0) == 0: %s, L4 == 0 <=> all masked on 40 frames (%zu audible): %s, "
                 "L4(0.5, 2, 1.5) = %.17g",
                 l3_zero ? "yes" : "no", audible_cases, iff ? "yes" : "no", example)};
}

Outcome CheckGradients() {
  const SpectralAnalyzer analyzer(kLength, kRate);
  const PsychoacousticModel model(analyzer);
  const PerceptualLoss loss(analyzer, LossConfig::FromPreset(ModelPreset::kD));
  std::mt19937_64 rng(3);
  const double h = 1e-6;
  double worst = 0.0;
  int checked = 0;
  int skipped = 0;
  for (std::uint64_t p = 0; checked < 100; ++p) {
    const std::vector<double> s = ToyFrame(rng, kLength);
    const PamOutputs pam = PamOutputs::FromAnalysis(model.Analyze(s));
    std::vector<ModuleFrame> mods = {{s, Degrade(s, {.snr_db = 10.0, .seed = p})}};
    std::vector<double> r = loss.NoiseModulation(s, mods, pam).ratio;
    std::sort(r.rbegin(), r.rend());
    // Away from ties in the max and from the ReLU kink.
    if (r[0] - r[1] < 1e-3 * r[0] || std::abs(r[0] - 1.0) < 1e-3) {
      ++skipped;
      continue;
    }
    LossGradient g;
    loss.Evaluate(s, mods, &pam, &g);
    double diff = 0.0;
    double ga = 0.0;
    double gf = 0.0;
    for (std::size_t t = 0; t < kLength; ++t) {
      auto up = mods;
      auto down = mods;
      up[0].recon[t] += h;
      down[0].recon[t] -= h;
      const double fd =
          (loss.Evaluate(s, up, &pam).total - loss.Evaluate(s, down, &pam).total) / (2 * h);
      diff += (fd - g.g[0][t]) * (fd - g.g[0][t]);
      ga += g.g[0][t] * g.g[0][t];
      gf += fd * fd;
    }
    worst = std::max(worst, std::sqrt(diff / std::max(ga, gf)));
    ++checked;
  }
  return {worst <= 1e-5, Format("%d pairs (%d skipped near ties), worst relative error %.2e",
                                checked, skipped, worst)};
}

Outcome CheckNoiseSuppression() {
  const SpectralAnalyzer analyzer(kLength, kRate);
  const PsychoacousticModel model(analyzer);
  const PerceptualLoss model_c(analyzer, LossConfig::FromPreset(ModelPreset::kC));
  const PerceptualLoss model_d(analyzer, LossConfig::FromPreset(ModelPreset::kD));
  std::mt19937_64 rng(7);
  int cleared = 0;
  double audible_c = 0.0;
  double audible_d = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> s = ToyFrame(rng, kLength);
    const PamOutputs pam = PamOutputs::FromAnalysis(model.Analyze(s));
    const std::vector<double> start =
        Degrade(s, {.snr_db = 20.0, .seed = static_cast<std::uint64_t>(100 + i)});
    const OptimizeOptions options{.steps = 2000};
    const auto d = OptimizeReconstruction(s, start, model_d, pam, options);
    const auto c = OptimizeReconstruction(s, start, model_c, pam, options);
    cleared += d.trace.back().audible_bins == 0 ? 1 : 0;
    audible_d += d.trace.back().audible_bins / 50.0;
    audible_c += c.trace.back().audible_bins / 50.0;
  }
  return {cleared >= 45 && audible_c > audible_d,
          Format("model-d cleared %d/50 frames (mean %.2f audible bins), model-c mean %.2f",
                 cleared, audible_d, audible_c)};
}

Outcome CheckQuantizerEntropy() {
  std::mt19937_64 rng(5);
  std::geometric_distribution<std::uint32_t> geo(0.1);
  std::vector<std::uint32_t> symbols(100000);
  for (auto& s : symbols) s = std::min<std::uint32_t>(geo(rng), 63);
  const HuffmanEncoded enc = HuffmanEncode(symbols, 64);
  const bool round_trip = HuffmanDecode(enc.bits, enc.table, symbols.size()) == symbols;
  std::map<std::uint32_t, double> counts;
  for (auto s : symbols) counts[s] += 1.0;
  std::vector<double> p;
  for (const auto& [sym, c] : counts) p.push_back(c / symbols.size());
  const double h = test::EntropyBits(p);
  const double mean_len = enc.MeanCodeLength();

  std::vector<double> kernels(64);
  for (std::size_t k = 0; k < 64; ++k) kernels[k] = static_cast<double>(k);
  Codebook uniform;
  uniform.kernels = kernels;
  const double h64 = ComputeEntropy(QuantizeVector(kernels, uniform, QuantMode::kHard).assignments,
                                    EntropyEstimator::kHard)
                         .entropy_bits;

  std::normal_distribution<double> g;
  std::vector<double> z(4000);
  for (double& v : z) v = g(rng);
  Codebook cb = CodebookFromQuantiles(z, 32, 0.5);
  bool monotone = true;
  double prev = std::numeric_limits<double>::infinity();
  for (int step = 0; step < 24; ++step) {
    const QuantizedCode q = QuantizeVector(z, cb, QuantMode::kSoft);
    double gap = 0.0;
    for (const Assignment& a : q.assignments) gap += std::abs(a.soft_value - a.hard_value);
    monotone = monotone && gap <= prev;
    prev = gap;
    cb.alpha *= 2.0;
  }
  return {round_trip && mean_len >= h && mean_len < h + 1.0 && h64 == 6.0 && monotone,
          Format("round trip on 1e5 symbols: %s, H = %.4f <= mean length %.4f < H + 1, "
                 "uniform K=64 entropy %.17g bits, annealing monotone: %s",
                 round_trip ? "yes" : "no", h, mean_len, h64, monotone ? "yes" : "no")};
}

// Kernels alone learn under soft SSE plus the weighted soft entropy; the
// controller steers the weight.
Outcome CheckRateControl() {
  constexpr int kSteps = 500;
  constexpr std::size_t kBatch = 1024;
  const double feature_rate = FeatureRate(kRate, 480, 32, 1);
  Codebook init;
  for (int k = 0; k < 32; ++k) init.kernels.push_back(-2.0 + 4.0 * k / 31);
  auto run = [&](double target) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    Codebook cb = init;
    RateController c;
    c.target_bps = target;
    std::vector<double> bps(kSteps);
    for (int step = 0; step < kSteps; ++step) {
      std::vector<double> z(kBatch);
      for (double& v : z) v = g(rng);
      const QuantizedCode q = QuantizeVector(z, cb, QuantMode::kSoft);
      bps[step] = BitrateLowerBound(
          ComputeEntropy(q.assignments, EntropyEstimator::kSoft, feature_rate));
      std::vector<double> dh(kBatch);
      std::vector<double> dz(kBatch, 0.0);
      std::vector<double> dk(cb.size(), 0.0);
      for (std::size_t i = 0; i < kBatch; ++i) dh[i] = 2.0 * (q.values[i] - z[i]) / kBatch;
      SoftQuantizeBackward(z, cb, q.assignments, dh, dz, dk);
      if (c.blend_weight > 0.0) {
        SoftEntropyBackward(z, cb, q.assignments, c.blend_weight, dz, dk);
      }
      if (target > 0.0) c = RateControllerStep(c, bps[step]);
      for (std::size_t k = 0; k < cb.size(); ++k) cb.kernels[k] -= 0.2 * dk[k];
    }
    double tail = 0.0;
    for (int step = kSteps - 50; step < kSteps; ++step) tail += bps[step] / 50.0;
    return tail;
  };
  const double free_bps = run(0.0);
  const double target = 0.8 * free_bps;
  const double held = run(target);
  const double ratio = held / target;
  return {std::abs(ratio - 1.0) <= 0.05,
          Format("free %.0f bps, target %.0f bps, mean of last 50 steps %.0f bps (ratio %.4f)",
                 free_bps, target, held, ratio)};
}

Outcome CheckCascade() {
  std::mt19937_64 rng(8);
  std::vector<std::vector<double>> train;
  std::vector<std::vector<double>> held_out;
  for (int i = 0; i < 64; ++i) train.push_back(ToyFrame(rng, kLength));
  for (int i = 0; i < 32; ++i) held_out.push_back(ToyFrame(rng, kLength));

  const ResidualStack init = InitStack(train, {.modules = 3});
  bool identities = true;
  for (const auto& f : held_out) {
    const CmrlEncoding enc = CmrlEncode(f, init, CodecQuant::kHard);
    std::vector<double> running = f;
    for (std::size_t i = 0; i < enc.targets.size(); ++i) {
      identities = identities && enc.targets[i] == running;
      for (std::size_t t = 0; t < kLength; ++t) running[t] -= enc.recons[i][t];
    }
  }

  // A module that copies even samples reconstructs even-only frames exactly.
  LinearCodecModule copy;
  copy.analysis = Eigen::MatrixXd::Zero(kLength / 2, kLength);
  for (std::size_t i = 0; i < kLength / 2; ++i) copy.analysis(i, 2 * i) = 1.0;
  copy.synthesis = copy.analysis.transpose();
  copy.codebook.kernels = {0.0, 1.0};
  ResidualStack perfect;
  perfect.modules = {copy, copy};
  std::vector<double> even(kLength, 0.0);
  for (std::size_t t = 0; t < kLength; t += 2) even[t] = held_out[0][t];
  const bool zero_input =
      CmrlEncode(even, perfect, CodecQuant::kNone).targets[1] == std::vector<double>(kLength, 0.0);

  TrainOptions options;
  options.epochs = {20, 20};
  options.batch_size = 16;
  options.rate_control = false;
  const LossConfig cfg = LossConfig::FromPreset(ModelPreset::kA);
  ResidualStack one = InitStack(train, {.modules = 1});
  one = TrainStack(train, one, cfg, {}, options).stack;
  const ResidualStack two = TrainStack(train, InitStack(train, {.modules = 2}), cfg, {}, options).stack;
  auto sse = [&](const ResidualStack& stack) {
    double total = 0.0;
    for (const auto& f : held_out) {
      const auto r = CmrlEncode(f, stack, CodecQuant::kHard).Reconstruction();
      for (std::size_t t = 0; t < kLength; ++t) total += (f[t] - r[t]) * (f[t] - r[t]);
    }
    return total;
  };
  const double sse_one = sse(one);
  const double sse_two = sse(two);
  return {identities && zero_input && sse_two < sse_one,
          Format("residual identities exact: %s, perfect module 1 -> zero input: %s, "
                 "held-out SSE one module %.4f, two modules %.4f",
                 identities ? "yes" : "no", zero_input ? "yes" : "no", sse_one, sse_two)};
}

Outcome CheckAllocator() {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> db(-15.0, 35.0);
  std::uniform_int_distribution<int> band_count(1, 4);
  int mismatches = 0;
  int cases = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> nmr(band_count(rng));
    for (double& v : nmr) v = db(rng);
    for (int budget = 0; budget <= 6; ++budget) {
      const BitAllocation a = GreedyAllocateBands(nmr, budget);
      auto excess = [&](const std::vector<int>& bits) {
        double worst = 0.0;
        for (std::size_t b = 0; b < nmr.size(); ++b) {
          worst = std::max(worst, nmr[b] - 20.0 * std::log10(2.0) * bits[b]);
        }
        return worst;
      };
      double best = std::numeric_limits<double>::infinity();
      std::vector<int> bits(nmr.size(), 0);
      std::function<void(std::size_t, int)> place = [&](std::size_t band, int left) {
        if (band == nmr.size()) {
          best = std::min(best, excess(bits));
          return;
        }
        for (int k = 0; k <= left; ++k) {
          bits[band] = k;
          place(band + 1, left - k);
        }
        bits[band] = 0;
      };
      place(0, budget);
      ++cases;
      if (a.bits_used() > budget || std::abs(excess(a.bits_per_band) - best) > 1e-9) {
        ++mismatches;
      }
    }
  }
  const SpectralAnalyzer analyzer(kLength, kRate);
  const PsychoacousticModel model(analyzer);
  bool monotone = true;
  for (int i = 0; i < 50; ++i) {
    const PamAnalysis pam = model.Analyze(ToyFrame(rng, kLength));
    const BitAllocation a = GreedyNmrAllocate(pam.psd, pam.mask, 300);
    for (std::size_t k = 1; k < a.nmr_trace.size(); ++k) {
      monotone = monotone && a.nmr_trace[k] <= a.nmr_trace[k - 1];
    }
  }
  return {mismatches == 0 && monotone,
          Format("%d/%d cases match exhaustive search, max-NMR trace non-increasing on 50 "
                 "spectra: %s",
                 cases - mismatches, cases, monotone ? "yes" : "no")};
}

Outcome CheckThresholdInQuiet() {
  const double at_1k = AbsoluteThresholdDb(1000.0);
  double best_hz = 20.0;
  for (double hz = 20.0; hz <= 20000.0; hz += 1.0) {
    if (AbsoluteThresholdDb(hz) < AbsoluteThresholdDb(best_hz)) best_hz = hz;
  }
  return {std::abs(at_1k - 3.37) <= 0.01 && best_hz >= 3000.0 && best_hz <= 4000.0,
          Format("Q(1 kHz) = %.4f dB, minimum at %.0f Hz", at_1k, best_hz)};
}

}  // namespace
}  // namespace psycal

int main() {
  struct Check {
    const char* name;
    double budget_s;
    std::function<psycal::Outcome()> run;
  };
  const Check checks[] = {
      {"global mask power sum", 1.0, psycal::CheckGlobalMask},
      {"loss semantics", 1.0, psycal::CheckLossSemantics},
      {"analytic gradients", 30.0, psycal::CheckGradients},
      {"noise pushed under the mask", 300.0, psycal::CheckNoiseSuppression},
      {"quantizer and entropy", 10.0, psycal::CheckQuantizerEntropy},
      {"rate control", 60.0, psycal::CheckRateControl},
      {"residual cascade", 120.0, psycal::CheckCascade},
      {"greedy allocator", 10.0, psycal::CheckAllocator},
      {"threshold in quiet", 1.0, psycal::CheckThresholdInQuiet},
  };
  int failures = 0;
  int index = 0;
  for (const Check& c : checks) {
    ++index;
    const auto t0 = std::chrono::steady_clock::now();
    psycal::Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = out.pass && in_time;
    failures += pass ? 0 : 1;
    std::printf("%s %d %s (%.2f s of %.0f s): %s\n", pass ? "PASS" : "FAIL", index, c.name,
                secs, c.budget_s, out.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}

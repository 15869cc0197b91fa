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

#include "psycal/loss.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <utility>

namespace psycal {

ModelPreset ParsePreset(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower.starts_with("model-")) lower = lower.substr(6);
  if (lower == "a") return ModelPreset::kA;
  if (lower == "b") return ModelPreset::kB;
  if (lower == "c") return ModelPreset::kC;
  if (lower == "d") return ModelPreset::kD;
  throw std::invalid_argument("unknown preset '" + std::string(name) +
                              "' (expected model-a|b|c|d)");
}

std::string PresetName(ModelPreset preset) {
  switch (preset) {
    case ModelPreset::kA: return "model-a";
    case ModelPreset::kB: return "model-b";
    case ModelPreset::kC: return "model-c";
    case ModelPreset::kD: return "model-d";
  }
  return "model-?";
}

LossConfig LossConfig::FromPreset(ModelPreset preset) {
  LossConfig cfg;
  cfg.use_sse = true;
  cfg.use_mel = preset != ModelPreset::kA;
  cfg.use_priority = preset == ModelPreset::kC || preset == ModelPreset::kD;
  cfg.use_noise_modulation = preset == ModelPreset::kD;
  return cfg;
}

PamOutputs PamOutputs::FromAnalysis(const PamAnalysis& analysis) {
  return {analysis.weights, analysis.mask, analysis.psd.norm_offset_db};
}

double BlendTotal(const LossConfig& config, double l1, double l2, double l3,
                  double l4) {
  double freq = 0.0;
  if (config.use_mel) freq += l2;
  if (config.use_priority) freq += l3;
  if (config.use_noise_modulation) freq += l4;
  return (config.use_sse ? l1 : 0.0) + config.lambda * freq;
}

PerceptualLoss::PerceptualLoss(const SpectralAnalyzer& analyzer,
                               LossConfig config)
    : analyzer_(analyzer),
      config_(config),
      mel_(analyzer.bins(), analyzer.sample_rate(), config.mel_bands,
           config.mel_norm) {
  if (!(config.lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
}

void PerceptualLoss::CheckShapes(std::span<const ModuleFrame> modules) const {
  if (modules.empty()) throw std::invalid_argument("no modules to compare");
  const std::size_t len = analyzer_.frame_length();
  for (const ModuleFrame& m : modules) {
    if (m.target.size() != len || m.recon.size() != len) {
      throw std::invalid_argument("module frame length mismatch: expected " +
                                  std::to_string(len));
    }
  }
}

double PerceptualLoss::SseTime(std::span<const ModuleFrame> modules) const {
  CheckShapes(modules);
  double sum = 0.0;
  for (const ModuleFrame& m : modules) {
    for (std::size_t t = 0; t < m.target.size(); ++t) {
      const double d = m.recon[t] - m.target[t];
      sum += d * d;
    }
  }
  return sum;
}

double PerceptualLoss::MelSse(std::span<const ModuleFrame> modules) const {
  CheckShapes(modules);
  double sum = 0.0;
  for (const ModuleFrame& m : modules) {
    const MelSpectrum y = mel_.Apply(analyzer_.Power(m.target));
    const MelSpectrum y_hat = mel_.Apply(analyzer_.Power(m.recon));
    for (std::size_t l = 0; l < y.values.size(); ++l) {
      const double d = y.values[l] - y_hat.values[l];
      sum += d * d;
    }
  }
  return sum;
}

double PerceptualLoss::PrioritySse(std::span<const ModuleFrame> modules,
                                   const PerceptualWeights& weights) const {
  CheckShapes(modules);
  if (weights.w.size() != analyzer_.bins()) {
    throw std::invalid_argument("weight vector has " +
                                std::to_string(weights.w.size()) +
                                " bins, expected " +
                                std::to_string(analyzer_.bins()));
  }
  double sum = 0.0;
  for (const ModuleFrame& m : modules) {
    const MagnitudeSpectrum x = analyzer_.Magnitudes(m.target);
    const MagnitudeSpectrum x_hat = analyzer_.Magnitudes(m.recon);
    for (std::size_t f = 0; f < x.values.size(); ++f) {
      const double d = x.values[f] - x_hat.values[f];
      sum += weights.w[f] * d * d;
    }
  }
  return sum;
}

namespace {

std::vector<double> Residual(std::span<const double> reference,
                             std::span<const ModuleFrame> modules) {
  std::vector<double> e(reference.begin(), reference.end());
  for (const ModuleFrame& m : modules) {
    for (std::size_t t = 0; t < e.size(); ++t) e[t] -= m.recon[t];
  }
  return e;
}

NoiseToMask RatiosFromSpectrum(std::span<const std::complex<double>> spectrum,
                               const PamOutputs& pam,
                               std::vector<double>* scale_out) {
  const std::size_t bins = spectrum.size();
  if (pam.mask.m.size() != bins) {
    throw std::invalid_argument("mask has " + std::to_string(pam.mask.m.size()) +
                                " bins, expected " + std::to_string(bins));
  }
  std::vector<double> ratio(bins);
  if (scale_out) scale_out->resize(bins);
  for (std::size_t f = 0; f < bins; ++f) {
    // Shared SPL referencing: n_f / m_f = |E_f|^2 10^((offset - m_f) / 10).
    const double scale = std::pow(10.0, 0.1 * (pam.norm_offset_db - pam.mask.m[f]));
    if (scale_out) (*scale_out)[f] = scale;
    ratio[f] = std::norm(spectrum[f]) * scale;
  }
  return NoiseToMaskFromRatios(std::move(ratio));
}

}  // namespace

NoiseToMask NoiseToMaskFromRatios(std::vector<double> ratio) {
  NoiseToMask out;
  out.ratio = std::move(ratio);
  if (out.ratio.empty()) return out;
  for (std::size_t f = 0; f < out.ratio.size(); ++f) {
    if (out.ratio[f] > out.ratio[out.argmax_bin]) out.argmax_bin = f;
    if (out.ratio[f] > 1.0) ++out.audible_bins;
  }
  out.max_ratio = out.ratio[out.argmax_bin];
  out.loss = std::max(0.0, out.max_ratio - 1.0);
  return out;
}

NoiseToMask PerceptualLoss::NoiseModulation(
    std::span<const double> reference, std::span<const ModuleFrame> modules,
    const PamOutputs& pam) const {
  CheckShapes(modules);
  if (reference.size() != analyzer_.frame_length()) {
    throw std::invalid_argument("reference length mismatch");
  }
  const auto spectrum = analyzer_.Transform(Residual(reference, modules));
  return RatiosFromSpectrum(spectrum, pam, nullptr);
}

FrameLoss PerceptualLoss::Evaluate(std::span<const double> reference,
                                   std::span<const ModuleFrame> modules,
                                   const PamOutputs* pam,
                                   LossGradient* grad) const {
  CheckShapes(modules);
  if (reference.size() != analyzer_.frame_length()) {
    throw std::invalid_argument("reference length mismatch");
  }
  if (config_.NeedsPam() && pam == nullptr) {
    throw std::invalid_argument(
        "priority weighting / noise modulation need masking outputs");
  }
  if (pam != nullptr && config_.use_priority &&
      pam->weights.w.size() != analyzer_.bins()) {
    throw std::invalid_argument("weight vector length mismatch");
  }
  const std::size_t len = analyzer_.frame_length();
  const std::size_t bins = analyzer_.bins();
  const double lambda = config_.lambda;
  FrameLoss out;
  if (grad) grad->g.assign(modules.size(), std::vector<double>(len, 0.0));

  for (std::size_t i = 0; i < modules.size(); ++i) {
    const ModuleFrame& m = modules[i];
    for (std::size_t t = 0; t < len; ++t) {
      const double d = m.recon[t] - m.target[t];
      out.l1 += d * d;
      if (grad && config_.use_sse) grad->g[i][t] = 2.0 * d;
    }
    if (!config_.use_mel && !config_.use_priority) continue;

    const auto spec = analyzer_.Transform(m.target);
    const auto spec_hat = analyzer_.Transform(m.recon);
    std::vector<std::complex<double>> g_bins(bins, 0.0);

    if (config_.use_mel) {
      std::vector<double> power(bins), power_hat(bins);
      for (std::size_t f = 0; f < bins; ++f) {
        power[f] = std::norm(spec[f]);
        power_hat[f] = std::norm(spec_hat[f]);
      }
      const MelSpectrum y = mel_.Apply(power);
      const MelSpectrum y_hat = mel_.Apply(power_hat);
      std::vector<double> d_mel(y.values.size());
      for (std::size_t l = 0; l < y.values.size(); ++l) {
        const double d = y_hat.values[l] - y.values[l];
        out.l2 += d * d;
        d_mel[l] = 2.0 * d;
      }
      if (grad) {
        const std::vector<double> d_power = mel_.ApplyTranspose(d_mel);
        for (std::size_t f = 0; f < bins; ++f) {
          g_bins[f] += lambda * 2.0 * d_power[f] * spec_hat[f];
        }
      }
    }
    if (config_.use_priority) {
      const std::vector<double>& w = pam->weights.w;
      for (std::size_t f = 0; f < bins; ++f) {
        const double x = std::abs(spec[f]);
        const double x_hat = std::abs(spec_hat[f]);
        const double d = x_hat - x;
        out.l3 += w[f] * d * d;
        if (grad && x_hat > 0.0) {
          g_bins[f] += lambda * 2.0 * w[f] * d * spec_hat[f] / x_hat;
        }
      }
    }
    if (grad) {
      const std::vector<double> g_time = analyzer_.Backprop(g_bins);
      for (std::size_t t = 0; t < len; ++t) grad->g[i][t] += g_time[t];
    }
  }

  if (pam != nullptr) {
    const auto spectrum = analyzer_.Transform(Residual(reference, modules));
    std::vector<double> scale;
    const NoiseToMask nmr = RatiosFromSpectrum(spectrum, *pam, &scale);
    out.l4_bin = nmr.argmax_bin;
    out.max_nmr = nmr.max_ratio;
    out.audible_bins = nmr.audible_bins;
    if (config_.use_noise_modulation) {
      out.l4 = nmr.loss;
      if (grad && nmr.loss > 0.0) {
        // Only the argmax bin carries a subgradient; d/d(recon) = -d/d(noise).
        std::vector<std::complex<double>> g_bins(bins, 0.0);
        const std::size_t f = nmr.argmax_bin;
        g_bins[f] = 2.0 * scale[f] * spectrum[f];
        const std::vector<double> g_noise = analyzer_.Backprop(g_bins);
        for (auto& g : grad->g) {
          for (std::size_t t = 0; t < len; ++t) g[t] -= lambda * g_noise[t];
        }
      }
    }
  }
  if (!config_.use_mel) out.l2 = 0.0;
  out.total = BlendTotal(config_, out.l1, out.l2, out.l3, out.l4);
  return out;
}

LossReport Aggregate(std::vector<FrameLoss> frames) {
  LossReport report;
  report.per_frame = std::move(frames);
  if (report.per_frame.empty()) return report;
  for (const FrameLoss& f : report.per_frame) {
    report.l1 += f.l1;
    report.l2 += f.l2;
    report.l3 += f.l3;
    report.l4 += f.l4;
    report.total += f.total;
  }
  const double n = static_cast<double>(report.per_frame.size());
  report.l1 /= n;
  report.l2 /= n;
  report.l3 /= n;
  report.l4 /= n;
  report.total /= n;
  return report;
}

nlohmann::json ToJson(const FrameLoss& frame) {
  return {{"l1", frame.l1},         {"l2", frame.l2},
          {"l3", frame.l3},         {"l4", frame.l4},
          {"total", frame.total},   {"l4_bin", frame.l4_bin},
          {"max_nmr", frame.max_nmr}, {"audible_bins", frame.audible_bins}};
}

nlohmann::json ToJson(const LossReport& report, const LossConfig& config) {
  nlohmann::json frames = nlohmann::json::array();
  for (const FrameLoss& f : report.per_frame) frames.push_back(ToJson(f));
  nlohmann::json terms = nlohmann::json::array();
  if (config.use_sse) terms.push_back("l1");
  if (config.use_mel) terms.push_back("l2");
  if (config.use_priority) terms.push_back("l3");
  if (config.use_noise_modulation) terms.push_back("l4");
  return {{"lambda", config.lambda},
          {"terms", terms},
          {"mel_bands", config.mel_bands},
          {"aggregate",
           {{"l1", report.l1},
            {"l2", report.l2},
            {"l3", report.l3},
            {"l4", report.l4},
            {"total", report.total}}},
          {"frames", frames}};
}

}  // namespace psycal

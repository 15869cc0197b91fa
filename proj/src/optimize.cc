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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "psycal/codec.h"
#include "psycal/errors.h"

namespace psycal {

std::vector<double> Degrade(std::span<const double> signal,
                            const Degradation& degradation) {
  std::vector<double> out(signal.begin(), signal.end());
  if (degradation.kind == DegradationKind::kQuantize) {
    if (degradation.bits < 1 || degradation.bits > 31) {
      throw std::invalid_argument("quantizer bits must be in [1, 31]");
    }
    const double step = 2.0 / std::ldexp(1.0, degradation.bits);
    for (double& x : out) x = std::round(x / step) * step;
    return out;
  }
  double power = 0.0;
  for (double x : signal) power += x * x;
  power /= std::max<std::size_t>(1, signal.size());
  const double sigma = std::sqrt(power / std::pow(10.0, degradation.snr_db / 10.0));
  std::mt19937_64 rng(degradation.seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (double& x : out) x += noise(rng);
  return out;
}

OptimizeResult OptimizeReconstruction(std::span<const double> reference,
                                      std::span<const double> start,
                                      const PerceptualLoss& loss,
                                      const PamOutputs& pam,
                                      const OptimizeOptions& options) {
  if (reference.size() != start.size()) {
    throw std::invalid_argument("reference and start lengths differ");
  }
  if (!(options.learning_rate > 0.0)) {
    throw std::invalid_argument("learning rate must be positive");
  }
  const std::vector<double> target(reference.begin(), reference.end());
  std::vector<ModuleFrame> mods = {{target, {start.begin(), start.end()}}};
  OptimizeResult result;
  LossGradient grad;
  FrameLoss current = loss.Evaluate(reference, mods, &pam, &grad);
  result.trace.push_back({0, current.audible_bins, current.max_nmr, current.total});

  std::vector<ModuleFrame> trial = mods;
  for (std::size_t step = 1; step <= options.steps; ++step) {
    const std::vector<double>& g = grad.g.front();
    double g2 = 0.0;
    for (double v : g) g2 += v * v;
    if (g2 > 0.0) {
      // Every loss term vanishes at recon == reference, so the minimum is 0.
      double eta = options.step_rule == StepRule::kPolyak
                       ? std::min(options.learning_rate, current.total / g2)
                       : options.learning_rate;
      const std::size_t tries =
          options.step_rule == StepRule::kArmijo ? options.max_backtracks : 0;
      for (std::size_t k = 0; k <= tries; ++k) {
        std::vector<double>& x = trial.front().recon;
        for (std::size_t t = 0; t < x.size(); ++t) {
          x[t] = mods.front().recon[t] - eta * g[t];
        }
        LossGradient trial_grad;
        const FrameLoss next = loss.Evaluate(reference, trial, &pam, &trial_grad);
        if (options.step_rule == StepRule::kPolyak ||
            next.total <= current.total - options.armijo * eta * g2) {
          mods.swap(trial);
          trial = mods;
          current = next;
          grad = std::move(trial_grad);
          break;
        }
        eta *= 0.5;
      }
    }
    if (!std::isfinite(current.total)) {
      throw NumericError("reconstruction loss diverged at step " +
                         std::to_string(step));
    }
    result.trace.push_back(
        {step, current.audible_bins, current.max_nmr, current.total});
  }
  result.recon = mods.front().recon;
  return result;
}

void WriteAudibilityCsv(std::ostream& out,
                        std::span<const AudibilityPoint> trace) {
  out << "step,audible_bins,max_nmr,total\n";
  for (const AudibilityPoint& p : trace) {
    out << p.step << ',' << p.audible_bins << ',' << p.max_nmr << ','
        << p.total << '\n';
  }
}

std::vector<double> ToyFrame(std::mt19937_64& rng, std::size_t length,
                             const ToySourceOptions& options) {
  std::uniform_int_distribution<std::size_t> partials(options.min_partials,
                                                      options.max_partials);
  std::uniform_real_distribution<double> log_hz(std::log(options.min_hz),
                                                std::log(options.max_hz));
  std::uniform_real_distribution<double> log_amp(std::log(options.min_amplitude),
                                                 std::log(options.max_amplitude));
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> noise(0.0, options.noise_rms);

  std::vector<double> out(length, 0.0);
  const std::size_t count = partials(rng);
  for (std::size_t p = 0; p < count; ++p) {
    const double hz = std::exp(log_hz(rng));
    const double amp = std::exp(log_amp(rng));
    const double ph = phase(rng);
    const double w = 2.0 * std::numbers::pi * hz / options.sample_rate;
    for (std::size_t t = 0; t < length; ++t) out[t] += amp * std::sin(w * t + ph);
  }
  for (double& x : out) x += noise(rng);
  return out;
}

AudioClip ToyClip(std::mt19937_64& rng, std::size_t samples,
                  const ToySourceOptions& options) {
  return {ToyFrame(rng, samples, options), options.sample_rate};
}

}  // namespace psycal

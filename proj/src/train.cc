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
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "psycal/codec.h"
#include "psycal/errors.h"
#include "psycal/pam.h"

namespace psycal {

namespace {

struct ModuleGrad {
  Eigen::MatrixXd analysis;
  Eigen::MatrixXd synthesis;
  Eigen::VectorXd kernels;

  explicit ModuleGrad(const LinearCodecModule& m)
      : analysis(Eigen::MatrixXd::Zero(m.analysis.rows(), m.analysis.cols())),
        synthesis(Eigen::MatrixXd::Zero(m.synthesis.rows(), m.synthesis.cols())),
        kernels(Eigen::VectorXd::Zero(m.codebook.size())) {}

  void SetZero() {
    analysis.setZero();
    synthesis.setZero();
    kernels.setZero();
  }

  double SquaredNorm() const {
    return analysis.squaredNorm() + synthesis.squaredNorm() +
           kernels.squaredNorm();
  }

  void Scale(double s) {
    analysis *= s;
    synthesis *= s;
    kernels *= s;
  }
};

template <typename T>
const T& PerModule(const std::vector<T>& values, std::size_t i) {
  if (values.empty()) throw std::invalid_argument("empty training schedule");
  return values[std::min(i, values.size() - 1)];
}

}  // namespace

TrainResult TrainStack(std::span<const std::vector<double>> frames,
                       ResidualStack stack, const LossConfig& config,
                       RateController controller,
                       const TrainOptions& options) {
  stack.Validate();
  if (frames.empty()) throw std::invalid_argument("no training frames");
  if (options.batch_size == 0) throw std::invalid_argument("batch size is 0");
  const std::size_t len = stack.frame_length();
  const std::size_t code_len = stack.code_length();

  const SpectralAnalyzer analyzer(len, options.sample_rate);
  const PerceptualLoss loss(analyzer, config);
  std::vector<PamOutputs> pam;
  if (config.NeedsPam()) {
    const PsychoacousticModel model(analyzer);
    for (const auto& f : frames) {
      pam.push_back(PamOutputs::FromAnalysis(model.Analyze(f)));
    }
  }
  const double module_feature_rate =
      FeatureRate(options.sample_rate, options.hop, code_len, 1);

  TrainResult result;
  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order(frames.size());
  std::iota(order.begin(), order.end(), 0);

  // Hard-quantized outputs of frozen modules, per frame.
  std::vector<std::vector<ModuleFrame>> frozen(frames.size());
  std::vector<std::vector<double>> residual(frames.begin(), frames.end());
  double frozen_bitrate = 0.0;

  for (std::size_t i = 0; i < stack.size(); ++i) {
    LinearCodecModule& module = stack.modules[i];
    const std::size_t epochs = PerModule(options.epochs, i);
    const double lr = PerModule(options.learning_rates, i);
    ModuleGrad grad(module);
    ModuleGrad velocity(module);
    ModuleGrad second(module);
    std::size_t step = 0;

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      EpochLog log;
      log.module = i;
      log.epoch = epoch;
      std::size_t batches = 0;

      for (std::size_t start = 0; start < order.size();
           start += options.batch_size) {
        const std::size_t end = std::min(order.size(), start + options.batch_size);
        const double batch = static_cast<double>(end - start);
        grad.SetZero();
        std::vector<double> batch_codes;
        std::vector<Assignment> batch_assign;
        std::vector<std::size_t> batch_frames;

        for (std::size_t b = start; b < end; ++b) {
          const std::size_t n = order[b];
          const std::vector<double>& target = residual[n];
          const Eigen::Map<const Eigen::VectorXd> x(target.data(), len);
          const Eigen::VectorXd z = module.analysis * x;
          const QuantizedCode q = QuantizeVector(
              std::span<const double>(z.data(), code_len), module.codebook,
              QuantMode::kSoft);
          const Eigen::Map<const Eigen::VectorXd> h(q.values.data(), code_len);
          const Eigen::VectorXd recon = module.synthesis * h;

          std::vector<ModuleFrame> mods = frozen[n];
          mods.push_back({target, {recon.data(), recon.data() + len}});
          LossGradient lg;
          const FrameLoss fl = loss.Evaluate(frames[n], mods,
                                             pam.empty() ? nullptr : &pam[n], &lg);
          if (!std::isfinite(fl.total)) {
            throw NumericError("training diverged: module " + std::to_string(i) +
                               ", epoch " + std::to_string(epoch) +
                               ", loss is not finite");
          }
          log.l1 += fl.l1;
          log.l2 += fl.l2;
          log.l3 += fl.l3;
          log.l4 += fl.l4;
          log.total += fl.total;
          log.max_nmr += fl.max_nmr;

          const Eigen::Map<const Eigen::VectorXd> g(lg.g.back().data(), len);
          grad.synthesis.noalias() += (g / batch) * h.transpose();
          const Eigen::VectorXd dh = module.synthesis.transpose() * g / batch;
          std::vector<double> dz(code_len, 0.0);
          SoftQuantizeBackward(std::span<const double>(z.data(), code_len),
                               module.codebook, q.assignments,
                               std::span<const double>(dh.data(), code_len), dz,
                               std::span<double>(grad.kernels.data(),
                                                 grad.kernels.size()));
          const Eigen::Map<const Eigen::VectorXd> dzv(dz.data(), code_len);
          grad.analysis.noalias() += dzv * x.transpose();

          batch_codes.insert(batch_codes.end(), z.data(), z.data() + code_len);
          batch_assign.insert(batch_assign.end(), q.assignments.begin(),
                              q.assignments.end());
          batch_frames.push_back(n);
        }

        const AssignmentStats stats =
            ComputeEntropy(batch_assign, EntropyEstimator::kSoft,
                           module_feature_rate);
        const double measured = frozen_bitrate + BitrateLowerBound(stats);
        log.bitrate_bps += measured;
        if (controller.blend_weight > 0.0) {
          std::vector<double> dz(batch_codes.size(), 0.0);
          SoftEntropyBackward(batch_codes, module.codebook, batch_assign,
                              controller.blend_weight, dz,
                              std::span<double>(grad.kernels.data(),
                                                grad.kernels.size()));
          for (std::size_t b = 0; b < batch_frames.size(); ++b) {
            const Eigen::Map<const Eigen::VectorXd> dzv(&dz[b * code_len], code_len);
            const Eigen::Map<const Eigen::VectorXd> x(
                residual[batch_frames[b]].data(), len);
            grad.analysis.noalias() += dzv * x.transpose();
          }
        }
        if (options.rate_control && controller.target_bps > 0.0) {
          controller = RateControllerStep(controller, measured);
        }

        const double norm = std::sqrt(grad.SquaredNorm());
        if (!std::isfinite(norm)) {
          throw NumericError("training diverged: module " + std::to_string(i) +
                             ", epoch " + std::to_string(epoch) +
                             ", gradient is not finite");
        }
        if (options.clip_norm > 0.0 && norm > options.clip_norm) {
          grad.Scale(options.clip_norm / norm);
        }
        if (options.optimizer == TrainOptimizer::kAdam) {
          ++step;
          const double b1 = options.adam_beta1;
          const double b2 = options.adam_beta2;
          const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
          const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
          auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g.cwiseAbs2();
            param.array() -= lr * (m.array() / c1) /
                             ((v.array() / c2).sqrt() + options.adam_epsilon);
          };
          update(module.analysis, velocity.analysis, second.analysis,
                 grad.analysis);
          update(module.synthesis, velocity.synthesis, second.synthesis,
                 grad.synthesis);
          Eigen::Map<Eigen::VectorXd> kernels(module.codebook.kernels.data(),
                                              module.codebook.size());
          update(kernels, velocity.kernels, second.kernels, grad.kernels);
        } else {
          velocity.analysis =
              options.momentum * velocity.analysis - lr * grad.analysis;
          velocity.synthesis =
              options.momentum * velocity.synthesis - lr * grad.synthesis;
          velocity.kernels = options.momentum * velocity.kernels - lr * grad.kernels;
          module.analysis += velocity.analysis;
          module.synthesis += velocity.synthesis;
          for (std::size_t k = 0; k < module.codebook.size(); ++k) {
            module.codebook.kernels[k] += velocity.kernels[k];
          }
        }
        ++batches;
      }

      const double n = static_cast<double>(frames.size());
      log.l1 /= n;
      log.l2 /= n;
      log.l3 /= n;
      log.l4 /= n;
      log.total /= n;
      log.max_nmr /= n;
      log.bitrate_bps /= static_cast<double>(batches);
      log.blend_weight = controller.blend_weight;
      result.log.push_back(log);
    }

    // Freeze: hard outputs feed the next module.
    std::vector<Assignment> all_assign;
    for (std::size_t n = 0; n < frames.size(); ++n) {
      const std::vector<double> z = module.Encode(residual[n]);
      QuantizedCode q = QuantizeVector(z, module.codebook, QuantMode::kHard);
      const std::vector<double> recon = module.Decode(q.values);
      frozen[n].push_back({residual[n], recon});
      for (std::size_t t = 0; t < len; ++t) residual[n][t] -= recon[t];
      all_assign.insert(all_assign.end(), q.assignments.begin(),
                        q.assignments.end());
    }
    frozen_bitrate += BitrateLowerBound(ComputeEntropy(
        all_assign, EntropyEstimator::kHard, module_feature_rate));
  }
  result.stack = std::move(stack);
  result.controller = controller;
  return result;
}

void WriteTrainingLogCsv(std::ostream& out, std::span<const EpochLog> log) {
  out << "module,epoch,l1,l2,l3,l4,total,max_nmr,bitrate_bps,blend_weight\n";
  for (const EpochLog& e : log) {
    out << e.module << ',' << e.epoch << ',' << e.l1 << ',' << e.l2 << ','
        << e.l3 << ',' << e.l4 << ',' << e.total << ',' << e.max_nmr << ','
        << e.bitrate_bps << ',' << e.blend_weight << '\n';
  }
}

LossReport EvaluateStack(std::span<const std::vector<double>> frames,
                         const ResidualStack& stack, const LossConfig& config,
                         double sample_rate) {
  const SpectralAnalyzer analyzer(stack.frame_length(), sample_rate);
  const PerceptualLoss loss(analyzer, config);
  const PsychoacousticModel model(analyzer);
  std::vector<FrameLoss> out;
  for (const auto& f : frames) {
    const CmrlEncoding enc = CmrlEncode(f, stack, CodecQuant::kHard);
    const PamOutputs pam = PamOutputs::FromAnalysis(model.Analyze(f));
    out.push_back(loss.Evaluate(f, enc.AsModuleFrames(), &pam));
  }
  return Aggregate(std::move(out));
}

}  // namespace psycal

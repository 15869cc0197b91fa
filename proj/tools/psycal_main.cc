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

// Command-line front end: analysis, loss evaluation, quantization, codec
// training and coding, the reconstruction harness and bit allocation.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "psycal/audio.h"
#include "psycal/bitstream.h"
#include "psycal/codec.h"
#include "psycal/errors.h"
#include "psycal/loss.h"
#include "psycal/pam.h"
#include "psycal/quantizer.h"
#include "psycal/spectral.h"
#include "svg.h"

namespace psycal::tools {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Common {
  std::string out_dir;
  std::uint64_t seed = 1;
  std::size_t frame_length = kDefaultFrameLength;
  std::size_t overlap = kDefaultOverlap;
  bool svg = false;

  FramingParams framing() const { return {frame_length, overlap}; }

  fs::path Out(const std::string& name) const {
    fs::path dir = out_dir;
    if (dir.empty()) {
      const char* env = std::getenv("PSYCAL_OUT_DIR");
      dir = env && *env ? env : ".";
    }
    fs::create_directories(dir);
    return dir / name;
  }
};

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw DataError("cannot write " + path.string());
}

std::vector<std::uint8_t> ReadBytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

void Emit(const json& j, const std::string& path) {
  if (path.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    WriteText(path, j.dump(2) + "\n");
  }
}

std::vector<std::vector<double>> FrameSamples(const AudioClip& clip,
                                              const FramingParams& framing) {
  std::vector<std::vector<double>> out;
  for (Frame& f : FrameSignal(clip, framing)) out.push_back(std::move(f.samples));
  return out;
}

const std::vector<double>& PickFrame(const std::vector<std::vector<double>>& frames,
                                     std::size_t index) {
  if (index >= frames.size()) {
    throw std::invalid_argument("frame " + std::to_string(index) + " out of range (clip has " +
                                std::to_string(frames.size()) + " frames)");
  }
  return frames[index];
}

// ---------------------------------------------------------------- toy

struct ToyArgs {
  std::string out;
  double seconds = 1.0;
  std::string format = "float32";
};

int RunToy(const ToyArgs& a, const Common& c) {
  if (!(a.seconds > 0.0)) throw std::invalid_argument("--seconds must be positive");
  std::mt19937_64 rng(c.seed);
  const AudioClip clip = ToyClip(rng, static_cast<std::size_t>(std::lround(a.seconds * 44100.0)));
  WriteWav(clip, a.out, a.format == "pcm16" ? WavFormat::kPcm16 : WavFormat::kFloat32);
  return 0;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::string wav;
  std::size_t plot_frame = 0;
};

int RunAnalyze(const AnalyzeArgs& a, const Common& c) {
  const AudioClip clip = ReadWav(a.wav);
  const std::vector<std::vector<double>> frames = FrameSamples(clip, c.framing());
  const SpectralAnalyzer analyzer(c.frame_length, clip.sample_rate);
  const PsychoacousticModel model(analyzer);
  const auto& ath = model.absolute_threshold().q;
  const auto bark = model.bark();

  std::ostringstream bins;
  std::ostringstream maskers;
  bins << "frame,bin,hz,bark,psd_db,ath_db,mask_db,weight\n";
  maskers << "frame,bin,hz,bark,kind,level_db\n";
  json summary = json::array();
  std::vector<PamAnalysis> analyses;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    PamAnalysis pam = model.Analyze(frames[k]);
    for (std::size_t f = 0; f < analyzer.bins(); ++f) {
      bins << k << ',' << f << ',' << f * analyzer.bin_hz() << ',' << bark[f] << ','
           << pam.psd.values[f] << ',' << ath[f] << ',' << pam.mask.m[f] << ','
           << pam.weights.w[f] << '\n';
    }
    for (const Masker& m : pam.maskers.maskers) {
      maskers << k << ',' << m.bin << ',' << m.bin * analyzer.bin_hz() << ',' << m.bark << ','
              << (m.kind == MaskerKind::kTonal ? "tonal" : "noise") << ',' << m.level_db
              << '\n';
    }
    summary.push_back({{"frame", k},
                       {"tonal_maskers", pam.maskers.tonal_count()},
                       {"noise_maskers", pam.maskers.noise_count()}});
    if (k == a.plot_frame) analyses.push_back(std::move(pam));
  }

  const std::string stem = fs::path(a.wav).stem().string();
  WriteText(c.Out(stem + "_pam.csv"), bins.str());
  WriteText(c.Out(stem + "_maskers.csv"), maskers.str());
  if (c.svg && !analyses.empty()) {
    const PamAnalysis& pam = analyses.front();
    Chart chart{"Masking analysis, frame " + std::to_string(a.plot_frame), "Bark", "dB SPL", {},
                -20.0};
    std::vector<double> z(bark.begin(), bark.end());
    chart.series.push_back({"PSD", "#555555", z, pam.psd.values});
    chart.series.push_back({"threshold in quiet", "#2a9d8f", z, ath});
    chart.series.push_back({"global mask", "#e63946", z, pam.mask.m});
    for (std::size_t r = 0; r < static_cast<std::size_t>(pam.thresholds.u.cols()); ++r) {
      std::vector<double> u(pam.thresholds.u.rows());
      for (std::size_t f = 0; f < u.size(); ++f) u[f] = pam.thresholds.u(f, r);
      chart.series.push_back({r == 0 ? "tonal thresholds" : "", "#f4a261", z, u});
    }
    for (std::size_t b = 0; b < static_cast<std::size_t>(pam.thresholds.v.cols()); ++b) {
      std::vector<double> v(pam.thresholds.v.rows());
      for (std::size_t f = 0; f < v.size(); ++f) v[f] = pam.thresholds.v(f, b);
      chart.series.push_back({b == 0 ? "noise thresholds" : "", "#8ecae6", z, v});
    }
    for (MaskerKind kind : {MaskerKind::kTonal, MaskerKind::kNoise}) {
      Series s{kind == MaskerKind::kTonal ? "tonal maskers" : "noise maskers",
               kind == MaskerKind::kTonal ? "#d00000" : "#023e8a", {}, {}, true};
      for (const Masker& m : pam.maskers.OfKind(kind)) {
        s.x.push_back(m.bark);
        s.y.push_back(m.level_db);
      }
      chart.series.push_back(std::move(s));
    }
    WriteSvg(chart, c.Out(stem + "_frame" + std::to_string(a.plot_frame) + ".svg"));
  }
  Emit({{"input", a.wav}, {"frames", frames.size()}, {"per_frame", summary}}, "");
  return 0;
}

// ---------------------------------------------------------------- loss

struct LossArgs {
  std::string ref;
  std::string test;
  std::string preset = "model-d";
  double lambda = kDefaultLambda;
  std::size_t mel_bands = kDefaultMelBands;
  std::string json_out;
};

LossConfig MakeConfig(const std::string& preset, double lambda, std::size_t mel_bands) {
  LossConfig cfg = LossConfig::FromPreset(ParsePreset(preset));
  cfg.lambda = lambda;
  cfg.mel_bands = mel_bands;
  return cfg;
}

int RunLoss(const LossArgs& a, const Common& c) {
  const AudioClip ref = ReadWav(a.ref);
  const AudioClip test = ReadWav(a.test);
  if (ref.sample_rate != test.sample_rate) {
    throw DataError("sample rates differ: " + a.ref + " is " + std::to_string(ref.sample_rate) +
                    " Hz, " + a.test + " is " + std::to_string(test.sample_rate) + " Hz");
  }
  if (ref.size() != test.size()) {
    throw DataError("lengths differ: " + std::to_string(ref.size()) + " vs " +
                    std::to_string(test.size()) + " samples");
  }
  const LossConfig cfg = MakeConfig(a.preset, a.lambda, a.mel_bands);
  const SpectralAnalyzer analyzer(c.frame_length, ref.sample_rate);
  const PerceptualLoss loss(analyzer, cfg);
  const auto rf = FrameSamples(ref, c.framing());
  const auto tf = FrameSamples(test, c.framing());
  std::vector<FrameLoss> out;
  if (cfg.NeedsPam()) {
    const PsychoacousticModel model(analyzer);
    for (std::size_t k = 0; k < rf.size(); ++k) {
      const PamOutputs pam = PamOutputs::FromAnalysis(model.Analyze(rf[k]));
      out.push_back(loss.Evaluate(rf[k], std::vector<ModuleFrame>{{rf[k], tf[k]}}, &pam));
    }
  } else {
    for (std::size_t k = 0; k < rf.size(); ++k) {
      out.push_back(loss.Evaluate(rf[k], std::vector<ModuleFrame>{{rf[k], tf[k]}}, nullptr));
    }
  }
  json j = ToJson(Aggregate(std::move(out)), cfg);
  j["preset"] = PresetName(ParsePreset(a.preset));
  j["pam_computed"] = cfg.NeedsPam();
  Emit(j, a.json_out);
  return 0;
}

// ---------------------------------------------------------------- quantize

struct QuantizeArgs {
  std::string wav;
  std::size_t kernels = 64;
  double alpha = kDefaultAlpha;
  std::string json_out;
};

int RunQuantize(const QuantizeArgs& a, const Common& c) {
  const AudioClip clip = ReadWav(a.wav);
  const auto frames = FrameSamples(clip, c.framing());
  const ResidualStack stack =
      InitStack(frames, {c.frame_length, 1, a.kernels, a.alpha});
  const LinearCodecModule& m = stack.modules[0];
  std::vector<Assignment> soft;
  std::vector<Assignment> hard;
  std::vector<std::uint32_t> indices;
  double sse = 0.0;
  double energy = 0.0;
  for (const auto& f : frames) {
    const std::vector<double> z = m.Encode(f);
    QuantizedCode s = QuantizeVector(z, m.codebook, QuantMode::kSoft);
    QuantizedCode h = QuantizeVector(z, m.codebook, QuantMode::kHard);
    for (std::size_t i = 0; i < z.size(); ++i) {
      sse += (z[i] - h.values[i]) * (z[i] - h.values[i]);
      energy += z[i] * z[i];
    }
    soft.insert(soft.end(), s.assignments.begin(), s.assignments.end());
    hard.insert(hard.end(), h.assignments.begin(), h.assignments.end());
    indices.insert(indices.end(), h.indices.begin(), h.indices.end());
  }
  const double rate = FeatureRate(clip.sample_rate, c.framing().hop(), m.code_length(), 1);
  const AssignmentStats soft_stats = ComputeEntropy(soft, EntropyEstimator::kSoft, rate);
  const AssignmentStats hard_stats = ComputeEntropy(hard, EntropyEstimator::kHard, rate);
  const HuffmanEncoded huff = HuffmanEncode(indices, m.codebook.size());
  Emit({{"input", a.wav},
        {"kernels", m.codebook.kernels},
        {"alpha", a.alpha},
        {"features", indices.size()},
        {"feature_rate", rate},
        {"soft_entropy_bits", soft_stats.entropy_bits},
        {"hard_entropy_bits", hard_stats.entropy_bits},
        {"huffman_mean_code_length", huff.MeanCodeLength()},
        {"bitrate_lower_bound_bps", BitrateLowerBound(hard_stats)},
        {"huffman_bps", huff.MeanCodeLength() * rate},
        {"code_snr_db", 10.0 * std::log10(energy / std::max(sse, 1e-300))}},
       a.json_out);
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::vector<std::string> wavs;
  std::string checkpoint = "model.ckpt";
  std::string preset = "model-d";
  double lambda = kDefaultLambda;
  std::size_t modules = 1;
  std::size_t kernels = 32;
  double alpha = kDefaultAlpha;
  std::vector<std::size_t> epochs = {50, 30};
  std::vector<double> learning_rates = {2e-4, 2e-5};
  std::size_t batch = 128;
  double target_bps = 0.0;
  std::string optimizer = "adam";
};

int RunTrain(const TrainArgs& a, const Common& c) {
  std::vector<std::vector<double>> frames;
  double rate = 0.0;
  for (const std::string& w : a.wavs) {
    const AudioClip clip = ReadWav(w);
    if (rate != 0.0 && clip.sample_rate != rate) {
      throw DataError(w + ": sample rate differs from the other inputs");
    }
    rate = clip.sample_rate;
    for (auto& f : FrameSamples(clip, c.framing())) frames.push_back(std::move(f));
  }
  const LossConfig cfg = MakeConfig(a.preset, a.lambda, kDefaultMelBands);
  ResidualStack stack = InitStack(frames, {c.frame_length, a.modules, a.kernels, a.alpha});
  TrainOptions options;
  options.epochs = a.epochs;
  options.learning_rates = a.learning_rates;
  options.batch_size = a.batch;
  options.sample_rate = rate;
  options.hop = c.framing().hop();
  options.seed = c.seed;
  options.rate_control = a.target_bps > 0.0;
  options.optimizer = a.optimizer == "momentum" ? TrainOptimizer::kMomentum : TrainOptimizer::kAdam;
  RateController controller;
  controller.target_bps = a.target_bps;
  const TrainResult result = TrainStack(frames, std::move(stack), cfg, controller, options);
  SaveCheckpoint(result.stack, {rate, c.overlap}, a.checkpoint);

  std::ostringstream log;
  WriteTrainingLogCsv(log, result.log);
  const std::string stem = fs::path(a.checkpoint).stem().string();
  WriteText(c.Out(stem + "_train.csv"), log.str());
  if (c.svg) {
    Chart chart{"Training", "epoch (all modules)", "value", {}};
    Series total{"total loss", "#e63946", {}, {}};
    Series kbps{"bitrate / 1000", "#2a9d8f", {}, {}};
    for (std::size_t i = 0; i < result.log.size(); ++i) {
      total.x.push_back(i);
      total.y.push_back(result.log[i].total);
      kbps.x.push_back(i);
      kbps.y.push_back(result.log[i].bitrate_bps / 1000.0);
    }
    chart.series = {total, kbps};
    WriteSvg(chart, c.Out(stem + "_train.svg"));
  }
  const LossReport eval = EvaluateStack(frames, result.stack, cfg, rate);
  json j = {{"checkpoint", a.checkpoint},
            {"frames", frames.size()},
            {"epochs_logged", result.log.size()},
            {"final_blend_weight", result.controller.blend_weight},
            {"hard_eval", {{"l1", eval.l1}, {"l2", eval.l2}, {"l3", eval.l3},
                           {"l4", eval.l4}, {"total", eval.total}}}};
  if (!result.log.empty()) j["final_bitrate_bps"] = result.log.back().bitrate_bps;
  Emit(j, "");
  return 0;
}

// ---------------------------------------------------------------- codec

struct CodecArgs {
  std::string input;
  std::string checkpoint;
  std::string out;
  std::string preset = "model-d";
};

ResidualStack LoadStack(const CodecArgs& a, CheckpointMeta* meta) {
  if (a.checkpoint.empty()) throw std::invalid_argument("--checkpoint is required");
  return LoadCheckpoint(a.checkpoint, meta);
}

int RunEncode(const CodecArgs& a, const Common& c) {
  CheckpointMeta meta;
  const ResidualStack stack = LoadStack(a, &meta);
  const AudioClip clip = ReadWav(a.input);
  const SerializedBitstream s = SerializeBitstream(EncodeClip(clip, stack, meta.overlap));
  const std::string out =
      a.out.empty() ? c.Out(fs::path(a.input).stem().string() + ".psyb").string() : a.out;
  WriteText(out, std::string(s.bytes.begin(), s.bytes.end()));
  Emit({{"bitstream", out}, {"bytes", s.bytes.size()}, {"payload_bits", s.payload_bits},
        {"kbps", s.payload_bits / clip.seconds() / 1000.0}},
       "");
  return 0;
}

int RunDecode(const CodecArgs& a, const Common& c) {
  const ResidualStack stack = LoadStack(a, nullptr);
  const AudioClip clip = DecodeClip(ParseBitstream(ReadBytes(a.input)), stack);
  const std::string out =
      a.out.empty() ? c.Out(fs::path(a.input).stem().string() + "_decoded.wav").string() : a.out;
  WriteWav(clip, out);
  Emit({{"wav", out}, {"samples", clip.size()}, {"sample_rate", clip.sample_rate}}, "");
  return 0;
}

int RunRoundtrip(const CodecArgs& a, const Common& c) {
  CheckpointMeta meta;
  const ResidualStack stack = LoadStack(a, &meta);
  const AudioClip clip = ReadWav(a.input);
  const Bitstream stream = EncodeClip(clip, stack, meta.overlap);
  const SerializedBitstream bytes = SerializeBitstream(stream);
  const Bitstream parsed = ParseBitstream(bytes.bytes);
  const AudioClip decoded = DecodeClip(parsed, stack);
  const bool identical =
      SerializeBitstream(EncodeClip(clip, stack, meta.overlap)).bytes == bytes.bytes;

  // Hard entropy of the coded indices, per feature.
  std::vector<double> counts(stream.alphabet_size(), 0.0);
  for (std::uint32_t i : stream.indices) counts[i] += 1.0;
  double h = 0.0;
  for (double n : counts) {
    if (n > 0.0) h -= n / stream.indices.size() * std::log2(n / stream.indices.size());
  }
  const double features_per_s = stream.indices.size() / clip.seconds();

  const LossConfig cfg = LossConfig::FromPreset(ParsePreset(a.preset));
  const FramingParams framing{stack.frame_length(), meta.overlap};
  const auto rf = FrameSamples(clip, framing);
  const auto df = FrameSamples(decoded, framing);
  const SpectralAnalyzer analyzer(stack.frame_length(), clip.sample_rate);
  const PsychoacousticModel model(analyzer);
  const PerceptualLoss loss(analyzer, cfg);
  std::vector<FrameLoss> frames;
  double max_nmr = 0.0;
  for (std::size_t k = 0; k < rf.size(); ++k) {
    const PamOutputs pam = PamOutputs::FromAnalysis(model.Analyze(rf[k]));
    frames.push_back(loss.Evaluate(rf[k], std::vector<ModuleFrame>{{rf[k], df[k]}}, &pam));
    max_nmr = std::max(max_nmr, frames.back().max_nmr);
  }
  const LossReport report = Aggregate(std::move(frames));
  if (!a.out.empty()) WriteWav(decoded, a.out);
  if (c.svg) {
    Chart chart{"Decoded vs input", "sample", "amplitude", {}};
    Series in{"input", "#555555", {}, clip.samples};
    Series out{"decoded", "#e63946", {}, decoded.samples};
    for (std::size_t t = 0; t < clip.size(); ++t) {
      in.x.push_back(t);
      out.x.push_back(t);
    }
    chart.series = {in, out};
    WriteSvg(chart, c.Out(fs::path(a.input).stem().string() + "_roundtrip.svg"));
  }
  Emit({{"input", a.input},
        {"seconds", clip.seconds()},
        {"payload_bits", bytes.payload_bits},
        {"measured_kbps", bytes.payload_bits / clip.seconds() / 1000.0},
        {"entropy_bits_per_feature", h},
        {"lower_bound_kbps", h * features_per_s / 1000.0},
        {"mean_code_length", static_cast<double>(bytes.payload_bits) / stream.indices.size()},
        {"reencode_identical", identical},
        {"preset", PresetName(ParsePreset(a.preset))},
        {"l1", report.l1}, {"l2", report.l2}, {"l3", report.l3}, {"l4", report.l4},
        {"total", report.total},
        {"max_nmr", max_nmr}},
       "");
  return 0;
}

// ---------------------------------------------------------------- optimize

struct OptimizeArgs {
  std::string wav;
  std::size_t frame = 0;
  std::string preset = "model-d";
  double snr_db = 20.0;
  int bits = 0;
  std::size_t steps = 2000;
  double lr = 2e-4;
  std::string step_rule = "polyak";
};

int RunOptimize(const OptimizeArgs& a, const Common& c) {
  const AudioClip clip = ReadWav(a.wav);
  const auto frames = FrameSamples(clip, c.framing());
  const std::vector<double>& s = PickFrame(frames, a.frame);
  Degradation deg;
  deg.seed = c.seed;
  if (a.bits > 0) {
    deg.kind = DegradationKind::kQuantize;
    deg.bits = a.bits;
  } else {
    deg.snr_db = a.snr_db;
  }
  const std::vector<double> start = Degrade(s, deg);
  const SpectralAnalyzer analyzer(c.frame_length, clip.sample_rate);
  const PsychoacousticModel model(analyzer);
  const PamOutputs pam = PamOutputs::FromAnalysis(model.Analyze(s));
  const PerceptualLoss loss(analyzer, LossConfig::FromPreset(ParsePreset(a.preset)));
  OptimizeOptions options;
  options.steps = a.steps;
  options.learning_rate = a.lr;
  options.step_rule = a.step_rule == "armijo" ? StepRule::kArmijo
                      : a.step_rule == "fixed" ? StepRule::kFixed
                                               : StepRule::kPolyak;
  const OptimizeResult r = OptimizeReconstruction(s, start, loss, pam, options);

  const std::string stem = fs::path(a.wav).stem().string() + "_frame" + std::to_string(a.frame);
  std::ostringstream trace;
  WriteAudibilityCsv(trace, r.trace);
  WriteText(c.Out(stem + "_trace.csv"), trace.str());
  WriteWav({r.recon, clip.sample_rate}, c.Out(stem + "_optimized.wav"));
  WriteWav({start, clip.sample_rate}, c.Out(stem + "_degraded.wav"));
  if (c.svg) {
    Chart chart{"Audible bins during optimization", "step", "bins with noise above mask", {}};
    Series bins{PresetName(ParsePreset(a.preset)), "#e63946", {}, {}};
    for (const AudibilityPoint& p : r.trace) {
      bins.x.push_back(p.step);
      bins.y.push_back(p.audible_bins);
    }
    chart.series = {bins};
    WriteSvg(chart, c.Out(stem + "_trace.svg"));
  }
  const AudibilityPoint& first = r.trace.front();
  const AudibilityPoint& last = r.trace.back();
  Emit({{"input", a.wav},
        {"frame", a.frame},
        {"preset", PresetName(ParsePreset(a.preset))},
        {"steps", a.steps},
        {"before", {{"audible_bins", first.audible_bins}, {"max_nmr", first.max_nmr},
                    {"total", first.total}}},
        {"after", {{"audible_bins", last.audible_bins}, {"max_nmr", last.max_nmr},
                   {"total", last.total}}}},
       "");
  return 0;
}

// ---------------------------------------------------------------- allocate

struct AllocateArgs {
  std::string wav;
  std::size_t frame = 0;
  int budget = 64;
};

int RunAllocate(const AllocateArgs& a, const Common& c) {
  const AudioClip clip = ReadWav(a.wav);
  const auto frames = FrameSamples(clip, c.framing());
  const SpectralAnalyzer analyzer(c.frame_length, clip.sample_rate);
  const PsychoacousticModel model(analyzer);
  const PamAnalysis pam = model.Analyze(PickFrame(frames, a.frame));
  const BitAllocation alloc = GreedyNmrAllocate(pam.psd, pam.mask, a.budget);
  std::ostringstream csv;
  csv << "band,first_bin,last_bin,initial_nmr_db,bits,final_nmr_db\n";
  const auto bands = CriticalBands(analyzer.bin_hz(), analyzer.bins());
  for (std::size_t b = 0; b < bands.size(); ++b) {
    csv << b << ',' << bands[b].first << ',' << bands[b].last << ','
        << alloc.initial_nmr_db[b] << ',' << alloc.bits_per_band[b] << ','
        << alloc.initial_nmr_db[b] - kDbPerBit * alloc.bits_per_band[b] << '\n';
  }
  WriteText(c.Out(fs::path(a.wav).stem().string() + "_frame" + std::to_string(a.frame) +
                  "_allocation.csv"),
            csv.str());
  Emit({{"input", a.wav},
        {"frame", a.frame},
        {"budget", alloc.budget},
        {"bits_used", alloc.bits_used()},
        {"bits_per_band", alloc.bits_per_band},
        {"nmr_trace_db", alloc.nmr_trace}},
       "");
  return 0;
}

int Main(int argc, char** argv) {
  CLI::App app{"psycal: psychoacoustic losses and a toy perceptual codec"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out-dir", common.out_dir,
                    "Output directory (default: $PSYCAL_OUT_DIR, else .)");
    sub->add_option("--seed", common.seed, "Random seed")->capture_default_str();
    sub->add_option("--frame-length", common.frame_length, "Frame length T")
        ->capture_default_str();
    sub->add_option("--overlap", common.overlap, "Frame overlap")->capture_default_str();
    sub->add_flag("--svg", common.svg, "Also write SVG plots");
  };

  ToyArgs toy;
  auto* toy_cmd = app.add_subcommand("toy", "Write a synthetic tonal test clip");
  toy_cmd->add_option("out", toy.out, "Output WAV")->required();
  toy_cmd->add_option("--seconds", toy.seconds)->capture_default_str();
  toy_cmd->add_option("--format", toy.format)
      ->check(CLI::IsMember({"float32", "pcm16"}))
      ->capture_default_str();
  add_common(toy_cmd);

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Per-frame PSD, maskers and global mask");
  analyze_cmd->add_option("wav", analyze.wav)->required();
  analyze_cmd->add_option("--plot-frame", analyze.plot_frame, "Frame drawn with --svg")
      ->capture_default_str();
  add_common(analyze_cmd);

  LossArgs loss;
  auto* loss_cmd = app.add_subcommand("loss", "Loss terms between a reference and a test clip");
  loss_cmd->add_option("reference", loss.ref)->required();
  loss_cmd->add_option("test", loss.test)->required();
  loss_cmd->add_option("--preset", loss.preset, "model-a .. model-d")->capture_default_str();
  loss_cmd->add_option("--lambda", loss.lambda)->capture_default_str();
  loss_cmd->add_option("--mel-bands", loss.mel_bands)->capture_default_str();
  loss_cmd->add_option("--json", loss.json_out, "Write JSON here instead of stdout");
  add_common(loss_cmd);

  QuantizeArgs quant;
  auto* quant_cmd =
      app.add_subcommand("quantize", "Scalar-quantize DCT codes and report entropy and rate");
  quant_cmd->add_option("wav", quant.wav)->required();
  quant_cmd->add_option("--kernels", quant.kernels)->capture_default_str();
  quant_cmd->add_option("--alpha", quant.alpha)->capture_default_str();
  quant_cmd->add_option("--json", quant.json_out);
  add_common(quant_cmd);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a residual codec stack");
  train_cmd->add_option("wavs", train.wavs)->required();
  train_cmd->add_option("--checkpoint", train.checkpoint)->capture_default_str();
  train_cmd->add_option("--preset", train.preset)->capture_default_str();
  train_cmd->add_option("--lambda", train.lambda)->capture_default_str();
  train_cmd->add_option("--modules", train.modules)->capture_default_str();
  train_cmd->add_option("--kernels", train.kernels)->capture_default_str();
  train_cmd->add_option("--alpha", train.alpha)->capture_default_str();
  train_cmd->add_option("--epochs", train.epochs, "Per module; the last repeats")
      ->delimiter(',')
      ->capture_default_str();
  train_cmd->add_option("--lr", train.learning_rates, "Per module; the last repeats")
      ->delimiter(',')
      ->capture_default_str();
  train_cmd->add_option("--batch", train.batch)->capture_default_str();
  train_cmd->add_option("--target-bps", train.target_bps, "0 disables rate control")
      ->capture_default_str();
  train_cmd->add_option("--optimizer", train.optimizer)
      ->check(CLI::IsMember({"adam", "momentum"}))
      ->capture_default_str();
  add_common(train_cmd);

  CodecArgs codec;
  auto* codec_cmd = app.add_subcommand("codec", "Encode, decode or round-trip with a checkpoint");
  codec_cmd->require_subcommand(1);
  auto add_codec = [&](const char* name, const char* help, const char* input) {
    auto* sub = codec_cmd->add_subcommand(name, help);
    sub->add_option(input, codec.input)->required();
    sub->add_option("--checkpoint", codec.checkpoint)->required();
    sub->add_option("--out", codec.out, "Output path");
    add_common(sub);
    return sub;
  };
  auto* encode_cmd = add_codec("encode", "WAV to bitstream", "wav");
  auto* decode_cmd = add_codec("decode", "Bitstream to WAV", "bitstream");
  auto* roundtrip_cmd = add_codec("roundtrip", "Encode, decode and report metrics", "wav");
  roundtrip_cmd->add_option("--preset", codec.preset)->capture_default_str();

  OptimizeArgs opt;
  auto* opt_cmd =
      app.add_subcommand("optimize", "Descend the loss from a degraded copy of one frame");
  opt_cmd->add_option("wav", opt.wav)->required();
  opt_cmd->add_option("--frame", opt.frame)->capture_default_str();
  opt_cmd->add_option("--preset", opt.preset)->capture_default_str();
  opt_cmd->add_option("--snr", opt.snr_db, "White-noise degradation SNR in dB")
      ->capture_default_str();
  opt_cmd->add_option("--bits", opt.bits, "Quantize to this many bits instead of adding noise");
  opt_cmd->add_option("--steps", opt.steps)->capture_default_str();
  opt_cmd->add_option("--lr", opt.lr)->capture_default_str();
  opt_cmd->add_option("--step-rule", opt.step_rule)
      ->check(CLI::IsMember({"polyak", "armijo", "fixed"}))
      ->capture_default_str();
  add_common(opt_cmd);

  AllocateArgs alloc;
  auto* alloc_cmd = app.add_subcommand("allocate", "Greedy NMR bit allocation for one frame");
  alloc_cmd->add_option("wav", alloc.wav)->required();
  alloc_cmd->add_option("--frame", alloc.frame)->capture_default_str();
  alloc_cmd->add_option("--budget", alloc.budget)->capture_default_str();
  add_common(alloc_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*toy_cmd) return RunToy(toy, common);
    if (*analyze_cmd) return RunAnalyze(analyze, common);
    if (*loss_cmd) return RunLoss(loss, common);
    if (*quant_cmd) return RunQuantize(quant, common);
    if (*train_cmd) return RunTrain(train, common);
    if (*encode_cmd) return RunEncode(codec, common);
    if (*decode_cmd) return RunDecode(codec, common);
    if (*roundtrip_cmd) return RunRoundtrip(codec, common);
    if (*opt_cmd) return RunOptimize(opt, common);
    if (*alloc_cmd) return RunAllocate(alloc, common);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace
}  // namespace psycal::tools

int main(int argc, char** argv) { return psycal::tools::Main(argc, argv); }

// include/accentvae/trainer.hpp

// Copyright 2026 The accentvae Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Alternating generator / discriminator optimization. A G-step updates every
// tensor except the accent classifier; a D-step updates only the classifier.

#pragma once

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "accentvae/corpus.hpp"
#include "accentvae/losses.hpp"
#include "accentvae/model.hpp"
#include "json.hpp"

namespace accentvae {

enum class OptimizerKind { kAdam, kSgd };

struct TrainingConfig {
  int batch_size = 64;
  long total_steps = 200000;  // G-steps
  double alpha = 0.1;
  double gamma = 0.01;
  double learning_rate = 1e-3;
  BetaSchedule beta;
  std::uint64_t seed = 0;
  ReconMode recon_mode = ReconMode::kMse;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_epsilon = 1e-8;
  double grad_clip_norm = 1.0;  // <= 0 disables clipping
  int min_group_size = 2;
  int d_steps_per_g_step = 1;
  long checkpoint_interval = 500;
  /// Allows gamma outside the swept range [1e-4, 0.5].
  bool force = false;
  ModelConfig model;

  /// Desk preset: small model, 2000 steps.
  static TrainingConfig Desk(int n_mels, int num_accents);
  void Validate() const;
};

nlohmann::json ToJson(const ModelConfig &c);
ModelConfig ModelConfigFromJson(const nlohmann::json &j);
nlohmann::json ToJson(const TrainingConfig &c);
TrainingConfig TrainingConfigFromJson(const nlohmann::json &j);

struct TrainState {
  Model<float> model;
  std::vector<Eigen::MatrixXf> adam_m, adam_v;  // aligned with model.parameters()
  long global_step = 0;  // +1 per update call
  long g_steps = 0;
  long d_steps = 0;
  std::mt19937_64 rng;
  long clip_events = 0;

  static TrainState Initial(const TrainingConfig &config);
};

/// One generator update on `batch`. Throws NumericalError (with the loss
/// breakdown in the message) when any loss is non-finite.
LossBreakdown GStep(TrainState &state, const GroupedBatch &batch, const TrainingConfig &config);
/// One discriminator update on `batch`.
LossBreakdown DStep(TrainState &state, const GroupedBatch &batch, const TrainingConfig &config);

struct LogRow {
  long step = 0;
  LossBreakdown loss;
};

void WriteLogHeader(std::ostream &os);
void WriteLogRow(std::ostream &os, const LogRow &row);

struct TrainOptions {
  /// Run directory; empty disables all file output.
  std::filesystem::path run_dir;
  /// Called after every G-step/D-step pair.
  std::function<void(const LogRow &)> on_step;
  /// Extra top-level fields for run_manifest.json.
  nlohmann::json manifest_extra;
};

struct TrainResult {
  TrainState state;
  std::vector<LogRow> log;
};

/// Runs the alternating loop from `start` (or a fresh state) until
/// config.total_steps G-steps have been taken. Batches come from the training
/// split; resuming skips the batches already consumed.
TrainResult Train(const TrainingConfig &config, const Corpus &corpus,
                  const TrainState *start = nullptr, const TrainOptions &options = {});

// Checkpoints: "AVCK" magic, version, JSON config echo, step counters, rng
// state, then name-length-prefixed float32 tensors (parameters followed by
// optimizer moments), then an end marker.
inline constexpr std::uint32_t kCheckpointMagic = 0x4B435641;  // "AVCK"
inline constexpr std::uint32_t kCheckpointVersion = 1;

void SaveCheckpoint(const std::filesystem::path &path, const TrainState &state,
                    const TrainingConfig &config);

struct LoadedCheckpoint {
  TrainState state;
  TrainingConfig config;
};

/// Rebuilds the state from the echoed config.
LoadedCheckpoint LoadCheckpoint(const std::filesystem::path &path);
/// Loads into a state built from `expected`; a tensor name or shape that does
/// not match raises an error naming the first mismatched tensor.
LoadedCheckpoint LoadCheckpoint(const std::filesystem::path &path, const ModelConfig &expected);

/// Fingerprint of the parameter values (names, shapes and bits).
std::uint64_t ParameterHash(const Model<float> &model);

}  // namespace accentvae

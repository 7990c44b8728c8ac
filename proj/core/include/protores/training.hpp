// Copyright 2026 The protores Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "protores/checkpoint.hpp"
#include "protores/dataset.hpp"
#include "protores/effector.hpp"
#include "protores/model.hpp"

namespace protores {

/// Multipliers on the seven loss terms; all ones reproduces the standard objective.
struct LossTermScales {
  double gpd_l2_rnd = 1.0;
  double ikd_l2_rnd = 1.0;
  double gpd_l2_det = 1.0;
  double ikd_l2_det = 1.0;
  double loc_geo_det = 1.0;
  double glob_geo_rnd = 1.0;
  double lookat_det = 1.0;

  bool operator==(const LossTermScales&) const = default;
};

struct TrainConfig {
  std::size_t epochs = 40000;  // optimizer steps, one batch each
  std::size_t batch_size = 2048;
  double learning_rate = 2e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double w_pos = 1e2;
  double sigma_max_position = 0.1;
  double sigma_max_rotation = 0.1;
  double sigma_max_lookat = 0.1;
  double max_weight = 1e3;  // W_M
  double eta = 13.0;
  std::size_t min_effectors = 3;
  std::size_t max_effectors = 16;
  bool augment_mirror = true;
  bool augment_rotate_y = true;
  std::uint64_t seed = 0;
  std::size_t log_interval = 100;
  std::size_t checkpoint_interval = 1000;
  LossTermScales scales;

  /// Throws ConfigError on out-of-range values.
  void validate() const;

  /// Sets one field from its textual key (the field name) and value. Throws ConfigError.
  void set(const std::string& key, const std::string& value);

  static std::vector<std::string> keys();
  nlohmann::json to_json() const;

  double sigma_max(EffectorType type) const;
};

/// Environment lookup used for overrides; returns nullopt when unset.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_environment();

/// Parses `key = value` lines; '#' starts a comment. Throws NotFound or ConfigError
/// (with file and line) for a missing file or a line without '='.
std::map<std::string, std::string> read_key_value_file(const std::filesystem::path& path);

/// Resolves defaults, then `key = value` lines from `file`, then PROTORES_<KEY>
/// environment variables, then `overrides` (command-line flags). '#' starts a comment.
TrainConfig resolve_train_config(const std::optional<std::filesystem::path>& file,
                                 const std::map<std::string, std::string>& overrides, const EnvLookup& env);

/// Same precedence with the file already parsed; keys must all be TrainConfig keys.
TrainConfig resolve_train_config(const std::map<std::string, std::string>& file_values,
                                 const std::map<std::string, std::string>& overrides, const EnvLookup& env);

struct LossBreakdown {
  double gpd_l2_rnd = 0.0;
  double ikd_l2_rnd = 0.0;
  double gpd_l2_det = 0.0;
  double ikd_l2_det = 0.0;
  double loc_geo_det = 0.0;
  double glob_geo_rnd = 0.0;
  double lookat_det = 0.0;
  double total = 0.0;

  LossBreakdown& operator+=(const LossBreakdown& other);
  LossBreakdown& operator*=(double factor);
  nlohmann::json to_json() const;
};

/// total = (W_pos/J)·(four position terms) + (1/J)·(three angular terms), each scaled.
double combine_losses(const LossBreakdown& terms, double w_pos, std::size_t joint_count,
                      const LossTermScales& scales = {});

struct GroundTruth {
  std::vector<Vec3> positions;         // g_j
  std::vector<Mat3> global_rotations;  // G13_j
  std::vector<Mat3> local_rotations;   // R_j
};

GroundTruth ground_truth_from_pose(const SkeletonSpec& skeleton, const Pose& pose);

struct BatchItem {
  EffectorSet effectors;
  GroundTruth truth;
  std::vector<double> weights;  // W(Λ_i), aligned with effectors
};

/// Augments, runs FK for ground truth, samples `effector_count` effectors and
/// corrupts them according to their sampled tolerance.
BatchItem prepare_batch_item(const Pose& pose, const SkeletonSpec& skeleton, std::size_t effector_count, Rng& rng,
                             const TrainConfig& config);

/// Per-item loss terms from a world-frame forward output. Throws NumericalError naming a non-finite term.
LossBreakdown compute_losses(const ForwardOutput& output, const BatchItem& item, const TrainConfig& config);

/// Batch-mean loss recorded as a tape op over the forward graph, plus the mean breakdown.
struct LossGraph {
  ag::Var total;
  LossBreakdown mean;
};
LossGraph build_loss_graph(ag::Tape& tape, const ForwardGraph& graph, std::span<const BatchItem> items,
                           std::span<const CenteredEffectorSet> inputs, const TrainConfig& config);

/// Reverse-mode gradients of the batch-mean total loss w.r.t. every parameter.
/// Throws NumericalError when the loss is not finite.
struct GradientResult {
  Gradients gradients;
  LossBreakdown loss;
};
GradientResult compute_gradients(const Model& model, std::span<const BatchItem> items, const TrainConfig& config,
                                 Rng* dropout_rng);

OptimizerState make_optimizer_state(const ModelParameters& params);

/// One Adam update in place.
void adam_update(ModelParameters& params, const Gradients& grads, OptimizerState& state, const TrainConfig& config);

/// Forward, loss, gradients and one Adam update. The batch must share one effector
/// count. NumericalError leaves parameters and optimizer state untouched.
LossBreakdown training_step(Model& model, std::span<const BatchItem> items, OptimizerState& state,
                            const TrainConfig& config, Rng& rng);

struct TrainOptions {
  std::filesystem::path output_dir;
  bool resume = false;
  std::optional<std::size_t> max_steps;  // stop early (keeps the schedule of `epochs`)
  std::function<void(std::size_t step, const LossBreakdown&)> on_log;
};

struct TrainResult {
  std::size_t steps = 0;
  std::filesystem::path checkpoint;
  std::filesystem::path metrics_log;
  LossBreakdown last;
};

/// Runs the training loop over `dataset`. Writes `model.prck` (+ `.state`) every
/// checkpoint interval and at the end, and appends one JSON line per log interval
/// to `metrics.jsonl`.
TrainResult train(Model& model, const PoseDataset& dataset, const TrainConfig& config, const TrainOptions& options);

/// Samples a batch from `dataset`: uniform frames, one shared effector count.
std::vector<BatchItem> sample_batch(const PoseDataset& dataset, const SkeletonSpec& skeleton, Rng& rng,
                                    const TrainConfig& config);

/// Process-wide allocator tuning for executables: keeps freed tensor buffers in
/// the heap instead of unmapping them after every step. No-op outside glibc.
void retain_freed_memory();

}  // namespace protores

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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "protores/dataset.hpp"
#include "protores/effector.hpp"
#include "protores/model.hpp"
#include "protores/training.hpp"

namespace protores {

enum class BenchmarkKind { Random, FivePoint };

std::string_view to_string(BenchmarkKind kind);

struct BenchmarkItem {
  std::size_t frame = 0;  // index into the test split
  EffectorSet effectors;
};

/// One frozen evaluation file: every item has exactly `effector_count` effectors.
struct BenchmarkFile {
  BenchmarkKind kind = BenchmarkKind::Random;
  std::uint64_t seed = 0;
  std::size_t effector_count = 0;
  std::uint64_t dataset_hash = 0;
  std::vector<BenchmarkItem> items;

  /// Header plus items in the effector-set notation, joints by name.
  nlohmann::json to_json(const SkeletonSpec& skeleton) const;
  static BenchmarkFile from_json(const nlohmann::json& doc, const SkeletonSpec& skeleton);
  void save(const std::filesystem::path& path, const SkeletonSpec& skeleton) const;
  static BenchmarkFile load(const std::filesystem::path& path, const SkeletonSpec& skeleton);
  /// Conventional file name, e.g. "random_n07.json".
  std::string file_name() const;
};

inline constexpr std::size_t kBenchmarkMinEffectors = 6;
inline constexpr std::size_t kBenchmarkMaxEffectors = 12;

/// Seven files with N = 6..12 and one item per test frame. Each item starts with
/// one positional effector per limb zone; the remaining N-4 are distinct
/// (joint, type) slots over the whole skeleton. Tolerances Λ ~ U[0, 1] and the
/// matching noise (σ_M and η from `noise`) are drawn here and frozen.
/// Throws SkeletonError when a limb zone has no joints, EmptyInput for an empty split.
std::vector<BenchmarkFile> generate_random_benchmark(const PoseDataset& test, const SkeletonSpec& skeleton,
                                                     std::uint64_t seed, const TrainConfig& noise = {});

inline constexpr double kFivePointTolerance = 0.0;

/// Chest, both hands and both feet as exact positional effectors.
/// Throws SkeletonError when a landmark joint is missing.
BenchmarkFile generate_5point_benchmark(const PoseDataset& test, const SkeletonSpec& skeleton);

/// Writes every file into `dir` under its conventional name and returns the paths.
std::vector<std::filesystem::path> save_benchmark(const std::vector<BenchmarkFile>& files,
                                                  const std::filesystem::path& dir, const SkeletonSpec& skeleton);
std::vector<BenchmarkFile> load_benchmark(const std::filesystem::path& dir, const SkeletonSpec& skeleton);

/// What an evaluated solver returns for one effector set, world frame.
struct Prediction {
  Vec3 root_draft = Vec3::Zero();  // root entry of the position draft
  std::vector<Mat3> local_rotations;
  std::vector<Vec3> global_positions;  // FK of the predicted rotations
};

/// Batched solver under evaluation. `frames` holds the test frame of each set
/// and exists so that oracles can look up the ground truth.
using Predictor = std::function<std::vector<Prediction>(std::span<const EffectorSet> sets,
                                                        std::span<const std::size_t> frames)>;

/// Eval-mode forward of `model`; the model is only read.
Predictor model_predictor(const Model& model);
/// Returns the ground truth of the referenced test frame.
Predictor oracle_predictor(const PoseDataset& test, const SkeletonSpec& skeleton);
/// Returns `pose` regardless of the input.
Predictor constant_predictor(const Pose& pose, const SkeletonSpec& skeleton);

struct Metrics {
  double gpd_l2 = 0.0;   // squared root-draft error
  double ikd_l2 = 0.0;   // Σ_j squared position error after FK
  double loc_geo = 0.0;  // Σ_j rotation angle of the local rotations
};

/// Metrics of one item.
Metrics item_metrics(const Prediction& prediction, const GroundTruth& truth);

struct FileMetrics {
  std::string name;
  std::size_t effector_count = 0;
  std::size_t items = 0;
  Metrics mean;
};

struct MetricsReport {
  std::vector<FileMetrics> files;
  std::size_t items = 0;
  Metrics aggregate;  // item-weighted mean of the per-file values

  nlohmann::json to_json() const;
  /// Per-file rows and an "all" row with the L_gpd-L2^det, L_ikd-L2^det and L_loc-geo^det columns.
  void write_table(std::ostream& out) const;
};

/// Evaluates `predictor` on every file. Per-file means are summed in sorted
/// order, so the result does not depend on item order.
/// Throws ShapeError when the test split or predictions do not match the skeleton,
/// DataError when a file was generated from a different test split.
MetricsReport evaluate(const Predictor& predictor, std::span<const BenchmarkFile> files, const PoseDataset& test,
                       const SkeletonSpec& skeleton, std::size_t batch_size = 256);

MetricsReport evaluate_model(const Model& model, std::span<const BenchmarkFile> files, const PoseDataset& test,
                             std::size_t batch_size = 256);

enum class EffectorMix { PositionOnly, RotationOnly, Mixed };

std::string_view to_string(EffectorMix mix);
/// Throws ConfigError.
EffectorMix effector_mix_from_string(std::string_view name);

struct SweepRow {
  double fraction = 0.0;
  std::size_t joints = 0;  // joints carrying effectors
  Metrics metrics;
};

/// For each fraction, round(fraction·J) joints (at least one) per test frame
/// receive effectors of the requested mix; Mixed gives each chosen joint both a
/// position and a rotation effector. Tolerance and noise follow the random benchmark.
/// Throws ConfigError for a fraction outside (0, 1].
std::vector<SweepRow> effector_sweep(const Predictor& predictor, const PoseDataset& test, const SkeletonSpec& skeleton,
                                     EffectorMix mix, std::span<const double> fractions, std::uint64_t seed,
                                     const TrainConfig& noise = {});

void write_sweep_table(std::ostream& out, std::span<const SweepRow> rows);
nlohmann::json sweep_to_json(std::span<const SweepRow> rows);

}  // namespace protores

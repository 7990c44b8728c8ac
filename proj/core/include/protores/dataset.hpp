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
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "protores/kinematics.hpp"
#include "protores/skeleton.hpp"

namespace protores {

inline constexpr std::uint32_t kDatasetVersion = 1;

/// Half-open frame range [begin, end) belonging to one clip.
struct ClipRange {
  std::string id;
  std::size_t begin = 0;
  std::size_t end = 0;

  bool operator==(const ClipRange&) const = default;
};

struct PoseDataset {
  std::size_t joint_count = 0;
  std::vector<Pose> frames;
  std::vector<ClipRange> clips;  // empty: every frame is its own clip

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }

  /// Clip index, or one pseudo-clip per frame when none is stored.
  std::vector<ClipRange> effective_clips() const;

  /// Throws FormatError on a joint count mismatch, DataError on non-unit
  /// quaternions (beyond `tolerance`) or clips that do not partition the frames.
  void validate(const SkeletonSpec& skeleton, double tolerance = 1e-3) const;
};

/// "PRSD", u32 version, u32 J, u64 frame count, then per frame 3 f32 root
/// position and J×4 f32 quaternions (x, y, z, w), little-endian.
/// The clip index, when present, goes to `<path>.clips.json`.
void save_dataset(const PoseDataset& dataset, const std::filesystem::path& path);
PoseDataset load_dataset(const std::filesystem::path& path, const SkeletonSpec& skeleton);

/// Bytes of a dataset file with `frames` frames of `joints` joints (excluding the clip sidecar).
std::uint64_t dataset_file_size(std::size_t joints, std::size_t frames);

/// FNV-1a 64 over the canonical f32 frame encoding.
std::uint64_t dataset_hash(const PoseDataset& dataset);

enum class RotationColumns { Quaternion, EulerRadians, EulerDegrees };

/// CSV layout. Header row required. Columns:
///   root_x, root_y, root_z
///   per joint, quaternion: <joint>_qx, _qy, _qz, _qw
///   per joint, Euler:      <joint>_rz, _ry, _rx   (R = Z·Y·X)
///   optional per joint:    <joint>_gx, _gy, _gz   world positions, checked against FK
///   optional clip column
struct CsvColumnSpec {
  RotationColumns rotations = RotationColumns::Quaternion;
  std::string clip_column = "clip";
  char delimiter = ',';
  double fk_tolerance = 1e-3;  // meters
};

struct ImportReport {
  std::size_t rows = 0;
  std::optional<double> max_fk_deviation;
};

/// Parse errors name the row and column. FK validation failures throw DataError
/// listing the worst joints.
PoseDataset import_csv(const std::filesystem::path& path, const SkeletonSpec& skeleton,
                       const CsvColumnSpec& spec = {}, ImportReport* report = nullptr);

struct DatasetSplit {
  PoseDataset train;
  PoseDataset valid;
  PoseDataset test;
};

/// Shuffles clip ids with `seed` and assigns whole clips to splits in the given proportions.
DatasetSplit split_by_clip(const PoseDataset& dataset, std::array<double, 3> proportions = {0.8, 0.1, 0.1},
                           std::uint64_t seed = 0);

/// Uniform sample of round(fraction·frames) frames without replacement, original order kept.
/// Clip ranges are rebuilt over the kept frames.
PoseDataset subsample_frames(const PoseDataset& dataset, double fraction = 0.1, std::uint64_t seed = 0);

struct DatasetStats {
  std::vector<std::string> joint_names;
  std::vector<Vec3> position_std;              // hip-local positions
  std::vector<Eigen::Vector4d> quaternion_std;  // x, y, z, w
};

/// Population standard deviations per joint. Throws EmptyInput for an empty dataset.
DatasetStats dataset_stats(const PoseDataset& dataset, const SkeletonSpec& skeleton);

/// Plain-text table with the joint rows and X Y Z | X Y Z W columns.
void write_stats_table(std::ostream& out, const DatasetStats& stats);
nlohmann::json stats_to_json(const DatasetStats& stats);

}  // namespace protores

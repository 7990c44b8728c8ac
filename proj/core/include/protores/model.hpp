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

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "protores/effector.hpp"
#include "protores/kinematics.hpp"
#include "protores/network.hpp"
#include "protores/skeleton.hpp"

namespace protores {

enum class Mode { Train, Eval };

/// Parameter indices for every sub-network of a model.
struct ModelLayout {
  // ProtoRes
  std::optional<std::size_t> joint_embedding;  // J × d_e
  std::optional<std::size_t> type_embedding;   // 3 × d_e
  std::vector<ResidualBlock> encoder;
  // Masked-FCR
  std::optional<std::size_t> placeholders;  // 1 × J·3·7
  FcrStack slot_encoder;
  // Shared heads
  FcrStack gpd;
  FcrStack ikd;
};

class Model {
 public:
  /// Fresh parameters drawn from `seed`. Throws ConfigError on an invalid config
  /// or a joint count that differs from the skeleton.
  Model(ModelConfig config, SkeletonSpec skeleton, std::uint64_t seed);

  /// Adopts stored parameters; throws ShapeError when names or shapes disagree with the config.
  Model(ModelConfig config, SkeletonSpec skeleton, ModelParameters params);

  const ModelConfig& config() const { return config_; }
  const SkeletonSpec& skeleton() const { return skeleton_; }
  const ModelLayout& layout() const { return layout_; }
  const ModelParameters& parameters() const { return params_; }
  ModelParameters& parameters() { return params_; }

 private:
  ModelConfig config_;
  SkeletonSpec skeleton_;
  ModelLayout layout_;
  ModelParameters params_;
};

/// Tape handles for one batched forward pass. All spatial quantities are in
/// the centered frame of each item.
struct ForwardGraph {
  ag::Var embedding;         // B × E
  ag::Var draft;             // B × 3J
  ag::Var rotations6d;       // B × 6J
  ag::Var local_rotations;   // B × 9J, row-major 3×3 per joint
  ag::Var global_rotations;  // B × 9J
  ag::Var global_positions;  // B × 3J
  std::vector<Vec3> centroids;
};

/// Records center -> encode -> encoder -> GPD -> IKD -> 6D -> FK on the tape.
/// ProtoRes batches must share one effector count (ShapeError otherwise).
ForwardGraph build_forward_graph(const Model& model, BoundParameters& params,
                                 std::span<const CenteredEffectorSet> items, const DropoutContext& dropout);

struct ForwardOutput {
  Eigen::VectorXd pose_embedding;   // p_R
  Eigen::VectorXd draft_positions;  // 3J, centered frame
  Eigen::VectorXd rotations6d;      // 6J
  std::vector<Mat3> local_rotations;
  GlobalTransforms global;          // world frame
  Vec3 centroid = Vec3::Zero();

  Vec3 root_position() const { return global.positions.front(); }
  Eigen::VectorXd draft_world() const;
  Pose pose() const;
};

/// Single-set forward. Train mode needs `rng` for dropout.
ForwardOutput model_forward(const Model& model, const EffectorSet& set, Mode mode = Mode::Eval,
                            Rng* rng = nullptr);

/// Batched forward; sets are grouped by effector count internally, results keep input order.
std::vector<ForwardOutput> model_forward_batch(const Model& model, std::span<const EffectorSet> sets,
                                               Mode mode = Mode::Eval, Rng* rng = nullptr);

/// Row-major 3×3 packing used by the tape ops.
Mat3 unpack_mat3(const Eigen::MatrixXd& m, Eigen::Index row, Eigen::Index col);
void pack_mat3(Eigen::MatrixXd& m, Eigen::Index row, Eigen::Index col, const Mat3& r);

/// Per-joint regularized 6D -> rotation matrix: B × 6J -> B × 9J.
ag::Var rotation6d_op(ag::Tape& tape, ag::Var rotations6d);

/// Batched forward kinematics: (B × 9J locals, B × 3 roots) -> B × 12J
/// packed as [9J global rotations | 3J global positions].
ag::Var forward_kinematics_op(ag::Tape& tape, const SkeletonSpec& skeleton, ag::Var local_rotations,
                              ag::Var root_positions);

}  // namespace protores

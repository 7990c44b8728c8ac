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
#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "protores/rotation.hpp"

namespace protores {

using Rng = std::mt19937_64;

enum class EffectorType : std::uint8_t { Position = 0, Rotation = 1, LookAt = 2 };
inline constexpr std::size_t kEffectorTypeCount = 3;

std::string_view to_string(EffectorType type);
EffectorType effector_type_from_string(std::string_view name);

/// One sparse constraint on a joint.
///
/// data layout by type:
///   Position: target xyz, then three zeros
///   Rotation: first two columns of the world rotation (6D form)
///   LookAt:   target xyz, then unit facing direction in the joint's local frame
struct Effector {
  std::size_t joint = 0;
  EffectorType type = EffectorType::Position;
  Vec6 data = Vec6::Zero();
  double tolerance = 0.0;  // Λ in [0, 1]

  Vec3 position() const { return data.head<3>(); }
  Vec3 direction() const { return data.tail<3>(); }
};

struct EffectorSet {
  std::vector<Effector> effectors;

  std::size_t size() const { return effectors.size(); }
  bool empty() const { return effectors.empty(); }

  /// Enforces N >= 1, joint ids in range, no duplicate (joint, type) pair,
  /// tolerance in [0, 1], zeroed tail for positions and unit look-at directions.
  /// Throws BadRequest naming the offending field.
  void validate(std::size_t joint_count) const;
};

/// Effector set with positions and look-at targets expressed relative to the
/// centroid of the positional effectors.
struct CenteredEffectorSet {
  std::vector<Effector> effectors;
  Vec3 centroid = Vec3::Zero();

  /// Adds the centroid back.
  EffectorSet restore() const;
};

/// σ_M · Λ^η. Throws DomainError when Λ is outside [0, 1].
double tolerance_to_noise_std(double tolerance, double sigma_max, double exponent);

/// min(W_M, 1/σ); W_M whenever σ < 1/W_M, including σ = 0.
double tolerance_to_weight(double sigma, double max_weight);

using EffectorSlot = std::pair<std::size_t, EffectorType>;

/// Draws N uniformly from [n_min, n_max], then N distinct (joint, type) pairs
/// uniformly from the joint_count × 3 grid. Throws ConfigError for an infeasible range.
std::vector<EffectorSlot> sample_effector_set(Rng& rng, std::size_t joint_count, std::size_t n_min,
                                              std::size_t n_max);

/// Draws `count` distinct slots uniformly from `candidates`, in random order.
std::vector<EffectorSlot> sample_distinct_slots(Rng& rng, std::vector<EffectorSlot> candidates, std::size_t count);

/// Gaussian white noise on the ground-truth position.
Vec6 corrupt_position_effector(const Vec3& position, double sigma, Rng& rng);

/// Random Euler perturbation Ψ(ε), ε ~ N(0, σ²I), applied on the left of the global rotation.
Vec6 corrupt_rotation_effector(const Mat3& global_rotation, double sigma, Rng& rng);

/// Random local facing direction d, target along the world ray G·d at a
/// folded-normal distance (std 5) plus Gaussian noise of std σ.
Vec6 generate_lookat_effector(const Vec3& position, const Mat3& global_rotation, double sigma, Rng& rng);

/// Effector for `slot` built from the joint's world transform, corrupted with noise of std `sigma`.
Effector make_effector(EffectorSlot slot, double tolerance, const Vec3& position, const Mat3& global_rotation,
                       double sigma, Rng& rng);

/// Subtracts the positional-effector centroid (origin when there are none) from
/// positional data and look-at targets.
CenteredEffectorSet center_effectors(const EffectorSet& set);

/// Per-effector network input rows: [data(6), Λ, joint embedding, type embedding].
/// Throws ShapeError for out-of-range ids.
Eigen::MatrixXd encode_effector_inputs(const CenteredEffectorSet& set, const Eigen::MatrixXd& joint_embedding,
                                       const Eigen::MatrixXd& type_embedding);

inline constexpr std::size_t kEffectorDataWidth = 7;  // 6D data + tolerance

}  // namespace protores

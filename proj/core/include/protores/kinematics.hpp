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
#include <span>
#include <vector>

#include "protores/rotation.hpp"
#include "protores/skeleton.hpp"

namespace protores {

/// Root position plus per-joint local rotations stored as unit quaternions.
struct Pose {
  Vec3 root_position = Vec3::Zero();
  std::vector<Quat> local_rotations;

  static Pose rest(std::size_t joint_count);
  static Pose from_matrices(const Vec3& root_position, std::span<const Mat3> local_rotations);

  std::size_t size() const { return local_rotations.size(); }
  std::vector<Mat3> local_matrices() const;

  /// Throws ShapeError on a joint count mismatch and DataError on non-unit quaternions.
  void validate(const SkeletonSpec& skeleton, double tolerance = 1e-6) const;
};

/// World-frame rotation and position of every joint.
struct GlobalTransforms {
  std::vector<Mat3> rotations;
  std::vector<Vec3> positions;

  std::size_t size() const { return positions.size(); }
};

/// Tree recursion G_j = G_parent(j) · [R_j | o_j], with G_root = [R_root | root_position].
/// Throws ShapeError when the rotation count does not match the skeleton.
GlobalTransforms forward_kinematics(const SkeletonSpec& skeleton, const Vec3& root_position,
                                    std::span<const Mat3> local_rotations);
GlobalTransforms forward_kinematics(const SkeletonSpec& skeleton, const Pose& pose);

/// Reverse-mode pass through forward_kinematics. `globals` must be the forward
/// result for `local_rotations`; gradients w.r.t. the global outputs are consumed
/// and the gradients w.r.t. the root position and local rotations are written out.
void forward_kinematics_vjp(const SkeletonSpec& skeleton, std::span<const Mat3> local_rotations,
                            const GlobalTransforms& globals, std::span<const Mat3> grad_global_rotations,
                            std::span<const Vec3> grad_global_positions, Vec3& grad_root_position,
                            std::span<Mat3> grad_local_rotations);

/// Rotates the whole pose about the world Y axis through the origin.
Pose rotate_pose_about_y(const Pose& pose, double angle);

/// Reflects the pose through the YZ plane and swaps left/right joints.
/// Throws SkeletonError if any joint lacks a mirror entry.
Pose mirror_pose(const SkeletonSpec& skeleton, const Pose& pose);

}  // namespace protores

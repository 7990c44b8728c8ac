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

#include "protores/kinematics.hpp"

#include <cmath>
#include <string>

#include "protores/error.hpp"

namespace protores {

Pose Pose::rest(std::size_t joint_count) {
  Pose pose;
  pose.local_rotations.assign(joint_count, Quat::Identity());
  return pose;
}

Pose Pose::from_matrices(const Vec3& root_position, std::span<const Mat3> local_rotations) {
  Pose pose;
  pose.root_position = root_position;
  pose.local_rotations.reserve(local_rotations.size());
  for (const auto& r : local_rotations) {
    pose.local_rotations.push_back(matrix_to_quaternion(r));
  }
  return pose;
}

std::vector<Mat3> Pose::local_matrices() const {
  std::vector<Mat3> out;
  out.reserve(local_rotations.size());
  for (const auto& q : local_rotations) {
    out.push_back(quaternion_to_matrix(q));
  }
  return out;
}

void Pose::validate(const SkeletonSpec& skeleton, double tolerance) const {
  if (local_rotations.size() != skeleton.size()) {
    throw ShapeError("pose has " + std::to_string(local_rotations.size()) + " rotations, skeleton has " +
                     std::to_string(skeleton.size()) + " joints");
  }
  if (!root_position.allFinite()) {
    throw DataError("pose root position is not finite");
  }
  for (std::size_t j = 0; j < local_rotations.size(); ++j) {
    const double n = local_rotations[j].coeffs().norm();
    if (!std::isfinite(n) || std::abs(n - 1.0) > tolerance) {
      throw DataError("joint " + std::to_string(j) + " quaternion norm " + std::to_string(n) + " is not unit");
    }
  }
}

GlobalTransforms forward_kinematics(const SkeletonSpec& skeleton, const Vec3& root_position,
                                    std::span<const Mat3> local_rotations) {
  const std::size_t joints = skeleton.size();
  if (local_rotations.size() != joints) {
    throw ShapeError("forward_kinematics: expected " + std::to_string(joints) + " rotations, got " +
                     std::to_string(local_rotations.size()));
  }
  GlobalTransforms out;
  out.rotations.resize(joints);
  out.positions.resize(joints);
  out.rotations[0] = local_rotations[0];
  out.positions[0] = root_position;
  for (std::size_t j = 1; j < joints; ++j) {
    const std::size_t p = skeleton.parent(j);
    out.rotations[j] = out.rotations[p] * local_rotations[j];
    out.positions[j] = out.positions[p] + out.rotations[p] * skeleton.offset(j);
  }
  return out;
}

GlobalTransforms forward_kinematics(const SkeletonSpec& skeleton, const Pose& pose) {
  const auto locals = pose.local_matrices();
  return forward_kinematics(skeleton, pose.root_position, locals);
}

void forward_kinematics_vjp(const SkeletonSpec& skeleton, std::span<const Mat3> local_rotations,
                            const GlobalTransforms& globals, std::span<const Mat3> grad_global_rotations,
                            std::span<const Vec3> grad_global_positions, Vec3& grad_root_position,
                            std::span<Mat3> grad_local_rotations) {
  const std::size_t joints = skeleton.size();
  std::vector<Mat3> g_rot(grad_global_rotations.begin(), grad_global_rotations.end());
  std::vector<Vec3> g_pos(grad_global_positions.begin(), grad_global_positions.end());
  // Children always follow their parent, so a reverse sweep sees every child first.
  for (std::size_t j = joints; j-- > 1;) {
    const std::size_t p = skeleton.parent(j);
    grad_local_rotations[j] = globals.rotations[p].transpose() * g_rot[j];
    g_rot[p] += g_rot[j] * local_rotations[j].transpose();
    g_rot[p] += g_pos[j] * skeleton.offset(j).transpose();
    g_pos[p] += g_pos[j];
  }
  grad_local_rotations[0] = g_rot[0];
  grad_root_position = g_pos[0];
}

Pose rotate_pose_about_y(const Pose& pose, double angle) {
  const Quat qy(Eigen::AngleAxisd(angle, Vec3::UnitY()));
  Pose out = pose;
  out.root_position = rotation_y(angle) * pose.root_position;
  if (!out.local_rotations.empty()) {
    out.local_rotations[0] = qy * pose.local_rotations[0];
  }
  return out;
}

Pose mirror_pose(const SkeletonSpec& skeleton, const Pose& pose) {
  if (pose.size() != skeleton.size()) {
    throw ShapeError("mirror_pose: pose and skeleton joint counts differ");
  }
  // Conjugating R by diag(-1, 1, 1) maps quaternion (x, y, z, w) to (x, -y, -z, w).
  Pose out;
  out.root_position = Vec3(-pose.root_position.x(), pose.root_position.y(), pose.root_position.z());
  out.local_rotations.resize(pose.size());
  for (std::size_t j = 0; j < pose.size(); ++j) {
    const Quat& q = pose.local_rotations[j];
    out.local_rotations[skeleton.mirror_index(j)] = Quat(q.w(), q.x(), -q.y(), -q.z());
  }
  return out;
}

}  // namespace protores

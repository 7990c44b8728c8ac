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

#include <span>

#include "protores/rotation.hpp"

namespace protores {

/// arccos arguments are clamped to [-1 + kArccosClamp, 1 - kArccosClamp].
inline constexpr double kArccosClamp = 1e-7;

/// Squared Euclidean distance. Throws ShapeError on a length mismatch.
double l2_error(std::span<const double> target, std::span<const double> prediction);
double l2_error(const Vec3& target, const Vec3& prediction);

/// Smallest rotation angle between two rotations, in [0, π].
double geodesic_distance(const Mat3& target, const Mat3& prediction);

/// Same value; additionally writes d(angle)/d(prediction) when `grad_prediction` is non-null.
/// The gradient is zero where the clamp is active.
double geodesic_distance(const Mat3& target, const Mat3& prediction, Mat3* grad_prediction);

/// Same angle with the arccos argument clamped only to [-1, 1], so identical
/// rotations give 0. Used for reported metrics, never differentiated.
double rotation_angle(const Mat3& target, const Mat3& prediction);

/// Angle between the joint's global facing direction (rotation · unit(direction))
/// and the ray from the joint to `target`.
/// Throws DegenerateLookAt when the target coincides with the joint or the direction is zero.
double lookat_error(const Vec3& target, const Vec3& direction, const Mat3& joint_rotation,
                    const Vec3& joint_position);

struct LookAtGradient {
  Mat3 rotation = Mat3::Zero();
  Vec3 position = Vec3::Zero();
};

/// Look-at angle with norms regularized by kDegenerateNorm so it never throws.
/// Writes gradients w.r.t. the joint rotation and position when `grad` is non-null.
double lookat_error_regularized(const Vec3& target, const Vec3& direction, const Mat3& joint_rotation,
                                const Vec3& joint_position, LookAtGradient* grad);

}  // namespace protores

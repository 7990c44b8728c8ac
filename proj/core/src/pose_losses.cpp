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

#include "protores/pose_losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "protores/error.hpp"

namespace protores {

namespace {

// arccos of the clamped argument; *slope receives d/dc (0 where clamped).
double clamped_acos(double c, double* slope) {
  constexpr double lo = -1.0 + kArccosClamp;
  constexpr double hi = 1.0 - kArccosClamp;
  const double clamped = std::clamp(c, lo, hi);
  if (slope != nullptr) {
    *slope = (c > lo && c < hi) ? -1.0 / std::sqrt(1.0 - c * c) : 0.0;
  }
  return std::acos(clamped);
}

}  // namespace

double l2_error(std::span<const double> target, std::span<const double> prediction) {
  if (target.size() != prediction.size()) {
    throw ShapeError("l2_error: lengths " + std::to_string(target.size()) + " and " +
                     std::to_string(prediction.size()) + " differ");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = target[i] - prediction[i];
    sum += d * d;
  }
  return sum;
}

double l2_error(const Vec3& target, const Vec3& prediction) { return (target - prediction).squaredNorm(); }

double geodesic_distance(const Mat3& target, const Mat3& prediction) {
  return geodesic_distance(target, prediction, nullptr);
}

double geodesic_distance(const Mat3& target, const Mat3& prediction, Mat3* grad_prediction) {
  // tr(R̂ᵀR) is the elementwise inner product of the two matrices.
  const double c = (prediction.cwiseProduct(target).sum() - 1.0) / 2.0;
  double slope = 0.0;
  const double angle = clamped_acos(c, grad_prediction ? &slope : nullptr);
  if (grad_prediction != nullptr) {
    *grad_prediction = (0.5 * slope) * target;
  }
  return angle;
}

double rotation_angle(const Mat3& target, const Mat3& prediction) {
  const double c = (prediction.cwiseProduct(target).sum() - 1.0) / 2.0;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

double lookat_error(const Vec3& target, const Vec3& direction, const Mat3& joint_rotation,
                    const Vec3& joint_position) {
  const Vec3 ray = target - joint_position;
  if (!(ray.norm() > kDegenerateNorm)) {
    throw DegenerateLookAt("look-at target coincides with the joint");
  }
  if (!(direction.norm() > kDegenerateNorm)) {
    throw DegenerateLookAt("look-at direction has zero length");
  }
  const double c = ray.normalized().dot(joint_rotation * direction.normalized());
  return clamped_acos(c, nullptr);
}

double lookat_error_regularized(const Vec3& target, const Vec3& direction, const Mat3& joint_rotation,
                                const Vec3& joint_position, LookAtGradient* grad) {
  const Vec3 ray = target - joint_position;
  const double ray_norm = ray.norm();
  const Vec3 unit_ray = ray / (ray_norm + kDegenerateNorm);
  const Vec3 unit_dir = direction / (direction.norm() + kDegenerateNorm);
  const Vec3 facing = joint_rotation * unit_dir;
  const double c = unit_ray.dot(facing);
  double slope = 0.0;
  const double angle = clamped_acos(c, grad ? &slope : nullptr);
  if (grad != nullptr) {
    grad->rotation = slope * unit_ray * unit_dir.transpose();
    // d(unit_ray)/d(ray) is symmetric: I/(n+e) - ray rayᵀ / (n (n+e)^2).
    const double d = ray_norm + kDegenerateNorm;
    Vec3 dc_dray = facing / d;
    if (ray_norm > 0.0) {
      dc_dray -= ray * (ray.dot(facing) / (ray_norm * d * d));
    }
    grad->position = -slope * dc_dray;
  }
  return angle;
}

}  // namespace protores

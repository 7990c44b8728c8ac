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

#include "protores/synthetic.hpp"

#include <cmath>
#include <random>

#include "protores/effector.hpp"
#include "protores/error.hpp"

namespace protores {

PoseDataset generate_synthetic_dataset(const SkeletonSpec& skeleton, const SyntheticConfig& config) {
  if (config.clips == 0 || config.frames_per_clip == 0 || config.latent_dim == 0) {
    throw ConfigError("synthetic dataset needs at least one clip, frame and latent dimension");
  }
  const std::size_t J = skeleton.size();
  const auto k = static_cast<Eigen::Index>(config.latent_dim);
  Rng rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Fixed "style" mapping from latent state to Euler angles, shared by all clips.
  std::vector<Eigen::Matrix<double, 3, Eigen::Dynamic>> mixing(J);
  std::vector<Vec3> bias(J);
  for (std::size_t j = 0; j < J; ++j) {
    mixing[j].resize(3, k);
    for (Eigen::Index c = 0; c < k; ++c) {
      for (int r = 0; r < 3; ++r) mixing[j](r, c) = normal(rng) / std::sqrt(static_cast<double>(k));
    }
    for (int r = 0; r < 3; ++r) bias[j][r] = 0.3 * normal(rng);
  }

  PoseDataset ds;
  ds.joint_count = J;
  ds.frames.reserve(config.clips * config.frames_per_clip);
  Eigen::VectorXd amplitude(k), frequency(k), phase(k), z(k);
  for (std::size_t c = 0; c < config.clips; ++c) {
    for (Eigen::Index i = 0; i < k; ++i) {
      amplitude[i] = 1.5 * unit(rng);
      frequency[i] = 0.05 + 0.25 * unit(rng);
      phase[i] = 2.0 * M_PI * unit(rng);
    }
    const double yaw = 2.0 * M_PI * unit(rng);
    const double yaw_rate = 0.05 * normal(rng);
    const Vec3 start(config.root_extent * (2.0 * unit(rng) - 1.0), 1.0 + 0.05 * normal(rng),
                     config.root_extent * (2.0 * unit(rng) - 1.0));
    const Vec3 velocity(0.02 * normal(rng), 0.0, 0.02 * normal(rng));
    const std::size_t first = ds.frames.size();
    for (std::size_t f = 0; f < config.frames_per_clip; ++f) {
      const double t = static_cast<double>(f);
      for (Eigen::Index i = 0; i < k; ++i) z[i] = amplitude[i] * std::sin(frequency[i] * t + phase[i]);
      Pose pose;
      pose.root_position = start + t * velocity;
      pose.root_position.y() += 0.05 * z[0];
      pose.local_rotations.reserve(J);
      for (std::size_t j = 0; j < J; ++j) {
        const Vec3 raw = mixing[j] * z + bias[j];
        const Vec3 angles = config.angle_scale * raw.array().tanh().matrix();
        Mat3 r = euler_to_matrix(angles);
        if (j == 0) r = rotation_y(yaw + yaw_rate * t) * r;
        pose.local_rotations.push_back(matrix_to_quaternion(r));
      }
      ds.frames.push_back(std::move(pose));
    }
    ds.clips.push_back({"clip" + std::to_string(c), first, ds.frames.size()});
  }
  return ds;
}

}  // namespace protores

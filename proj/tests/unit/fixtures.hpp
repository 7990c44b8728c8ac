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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <functional>
#include <random>
#include <vector>

#include "protores/effector.hpp"
#include "protores/kinematics.hpp"
#include "protores/skeleton.hpp"

namespace protores::testing {

/// Five joints: hips plus one joint per limb zone.
inline SkeletonSpec star_skeleton() {
  std::vector<JointSpec> joints = {
      {"Hips", std::nullopt, Vec3(0, 0, 0), "Hips", Zone::Hips},
      {"ArmLeft", 0, Vec3(0.3, 0.4, 0.05), "ArmRight", Zone::LeftArm},
      {"ArmRight", 0, Vec3(-0.3, 0.4, 0.05), "ArmLeft", Zone::RightArm},
      {"LegLeft", 0, Vec3(0.1, -0.5, 0.0), "LegRight", Zone::LeftLeg},
      {"LegRight", 0, Vec3(-0.1, -0.5, 0.0), "LegLeft", Zone::RightLeg},
  };
  return SkeletonSpec(std::move(joints));
}

/// Nine joints with two-level chains, mirror-complete.
inline SkeletonSpec chain_skeleton() {
  std::vector<JointSpec> joints = {
      {"Hips", std::nullopt, Vec3(0, 0, 0), "Hips", Zone::Hips},
      {"Chest", 0, Vec3(0, 0.3, 0), "Chest", Zone::Hips},
      {"Head", 1, Vec3(0, 0.3, 0.02), "Head", Zone::Head},
      {"HandLeft", 1, Vec3(0.35, 0.1, 0), "HandRight", Zone::LeftArm},
      {"HandRight", 1, Vec3(-0.35, 0.1, 0), "HandLeft", Zone::RightArm},
      {"KneeLeft", 0, Vec3(0.1, -0.45, 0), "KneeRight", Zone::LeftLeg},
      {"KneeRight", 0, Vec3(-0.1, -0.45, 0), "KneeLeft", Zone::RightLeg},
      {"FootLeft", 5, Vec3(0, -0.45, 0.05), "FootRight", Zone::LeftLeg},
      {"FootRight", 6, Vec3(0, -0.45, 0.05), "FootLeft", Zone::RightLeg},
  };
  return SkeletonSpec(std::move(joints));
}

inline Quat random_quaternion(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Quat q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q;
}

inline Mat3 random_rotation(Rng& rng) { return quaternion_to_matrix(random_quaternion(rng)); }

inline Pose random_pose(std::size_t joints, Rng& rng, double root_extent = 1.0) {
  std::uniform_real_distribution<double> u(-root_extent, root_extent);
  Pose p;
  p.root_position = Vec3(u(rng), u(rng), u(rng));
  for (std::size_t j = 0; j < joints; ++j) p.local_rotations.push_back(random_quaternion(rng));
  return p;
}

/// Central finite difference of a scalar function of one double.
inline double central_difference(const std::function<double()>& f, double& x, double step) {
  const double saved = x;
  x = saved + step;
  const double up = f();
  x = saved - step;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * step);
}

/// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("protores_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream(path, std::ios::binary) << bytes;
}

inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

}  // namespace protores::testing

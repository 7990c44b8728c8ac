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
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "protores/rotation.hpp"

namespace protores {

enum class Zone { LeftArm, RightArm, LeftLeg, RightLeg, Hips, Head };

inline constexpr Zone kLimbZones[] = {Zone::LeftArm, Zone::RightArm, Zone::LeftLeg, Zone::RightLeg};

std::string_view to_string(Zone zone);
Zone zone_from_string(std::string_view name);

struct JointSpec {
  std::string name;
  std::optional<std::size_t> parent;  // empty only for the root
  Vec3 offset = Vec3::Zero();         // displacement from the parent at zero rotation, meters
  std::string mirror;                 // empty when the joint has no mirror entry
  Zone zone = Zone::Hips;
};

/// Joint tree with fixed bone offsets. Joints are topologically ordered and
/// joint 0 is the root.
class SkeletonSpec {
 public:
  SkeletonSpec() = default;

  /// Validates the tree and throws SkeletonError on any violated invariant.
  explicit SkeletonSpec(std::vector<JointSpec> joints, std::map<std::string, std::string> landmarks = {});

  std::size_t size() const { return joints_.size(); }
  const JointSpec& joint(std::size_t index) const { return joints_.at(index); }
  const std::vector<JointSpec>& joints() const { return joints_; }

  /// Parent index of a non-root joint.
  std::size_t parent(std::size_t index) const { return *joints_[index].parent; }
  const Vec3& offset(std::size_t index) const { return joints_[index].offset; }

  std::optional<std::size_t> find(std::string_view name) const;
  /// Throws SkeletonError when the name is unknown.
  std::size_t index_of(std::string_view name) const;

  /// Index of the mirror joint; throws SkeletonError when no mirror entry exists.
  std::size_t mirror_index(std::size_t index) const;
  bool has_complete_mirror() const;

  std::vector<std::size_t> joints_in_zone(Zone zone) const;

  /// Semantic landmark lookup ("chest", "left_hand", ...). Falls back to the
  /// conventional joint name when the skeleton file does not override it.
  std::string landmark(std::string_view key) const;
  const std::map<std::string, std::string>& landmarks() const { return landmarks_; }

  nlohmann::json to_json() const;
  static SkeletonSpec from_json(const nlohmann::json& doc);
  static SkeletonSpec load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// The 64-joint humanoid used throughout the tests and tools (Y up, meters).
  static SkeletonSpec humanoid64();

 private:
  std::vector<JointSpec> joints_;
  std::vector<std::optional<std::size_t>> mirror_;
  std::map<std::string, std::string> landmarks_;
};

/// Default names for the five landmarks of the 5-point benchmark.
inline const std::map<std::string, std::string>& default_landmarks() {
  static const std::map<std::string, std::string> kDefaults = {
      {"chest", "Chest"},         {"left_hand", "HandLeft"}, {"right_hand", "HandRight"},
      {"left_foot", "FootLeft"},  {"right_foot", "FootRight"}};
  return kDefaults;
}

}  // namespace protores

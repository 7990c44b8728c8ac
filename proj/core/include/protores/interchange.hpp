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

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "protores/effector.hpp"
#include "protores/kinematics.hpp"
#include "protores/skeleton.hpp"

namespace protores {

// Text documents shared by the CLI, the service and benchmark files.
//
// Effector set:
//   {"effectors": [{"joint": "HandLeft" | 17, "type": "position" | "rotation" | "lookat",
//                   "data": [6 numbers], "tolerance": 0.0}]}
// A bare list of effector objects is accepted on input.
//
// Pose:
//   {"rotation_format": "quaternion" | "sixd", "root_position": [x, y, z],
//    "joints": [{"name": "Hips", "rotation": [...], "position": [x, y, z]}]}
// "position" is the optional world position of the joint.

enum class RotationFormat { Quaternion, SixD };

std::string_view to_string(RotationFormat format);
/// Throws BadRequest naming `field`.
RotationFormat rotation_format_from_string(std::string_view name, const std::string& field = "/rotation_format");

nlohmann::json effector_to_json(const Effector& effector, const SkeletonSpec& skeleton);
nlohmann::json effector_set_to_json(const EffectorSet& set, const SkeletonSpec& skeleton);

/// Parses and validates an effector set. Joints may be given by name or index.
/// Throws BadRequest whose field is a path below `pointer`.
EffectorSet effector_set_from_json(const nlohmann::json& doc, const SkeletonSpec& skeleton,
                                   const std::string& pointer = "/effectors");

/// Throws NotFound for a missing file and BadRequest for malformed content.
EffectorSet load_effector_set(const std::filesystem::path& path, const SkeletonSpec& skeleton);
void save_effector_set(const EffectorSet& set, const SkeletonSpec& skeleton, const std::filesystem::path& path);

struct PoseDocumentOptions {
  RotationFormat rotation_format = RotationFormat::Quaternion;
  bool include_global_positions = false;
};

nlohmann::json pose_to_json(const SkeletonSpec& skeleton, const Vec3& root_position,
                            std::span<const Mat3> local_rotations, const PoseDocumentOptions& options = {});
nlohmann::json pose_to_json(const SkeletonSpec& skeleton, const Pose& pose, const PoseDocumentOptions& options = {});

/// Reads either rotation format. Joints must appear in skeleton order.
/// Throws FormatError on malformed documents.
Pose pose_from_json(const nlohmann::json& doc, const SkeletonSpec& skeleton);

/// Parses a whole file; throws NotFound or FormatError.
nlohmann::json read_json_file(const std::filesystem::path& path);
/// Writes `doc` indented by two spaces with a trailing newline.
void write_json_file(const nlohmann::json& doc, const std::filesystem::path& path);

}  // namespace protores

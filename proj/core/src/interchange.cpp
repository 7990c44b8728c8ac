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

#include "protores/interchange.hpp"

#include <fstream>
#include <string>

#include "protores/error.hpp"

namespace protores {

namespace {

using nlohmann::json;

std::string at(const std::string& base, std::size_t i) { return base + "/" + std::to_string(i); }

template <int N>
Eigen::Matrix<double, N, 1> read_vector(const json& doc, const std::string& field) {
  if (!doc.is_array() || doc.size() != static_cast<std::size_t>(N)) {
    throw BadRequest("expected a list of " + std::to_string(N) + " numbers", field);
  }
  Eigen::Matrix<double, N, 1> out;
  for (int i = 0; i < N; ++i) {
    if (!doc[static_cast<std::size_t>(i)].is_number()) {
      throw BadRequest("expected a number", at(field, static_cast<std::size_t>(i)));
    }
    out[i] = doc[static_cast<std::size_t>(i)].get<double>();
  }
  return out;
}

template <typename Derived>
json to_list(const Eigen::MatrixBase<Derived>& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Effector effector_from_json(const json& doc, const SkeletonSpec& skeleton, const std::string& base) {
  if (!doc.is_object()) throw BadRequest("effector must be an object", base);
  Effector e;
  const auto joint = doc.find("joint");
  if (joint == doc.end()) throw BadRequest("missing joint", base + "/joint");
  if (joint->is_string()) {
    const auto index = skeleton.find(joint->get<std::string>());
    if (!index) throw BadRequest("unknown joint '" + joint->get<std::string>() + "'", base + "/joint");
    e.joint = *index;
  } else if (joint->is_number_unsigned()) {
    e.joint = joint->get<std::size_t>();
  } else {
    throw BadRequest("joint must be a name or a non-negative index", base + "/joint");
  }
  const auto type = doc.find("type");
  if (type == doc.end() || !type->is_string()) throw BadRequest("missing effector type", base + "/type");
  try {
    e.type = effector_type_from_string(type->get<std::string>());
  } catch (const BadRequest& err) {
    throw BadRequest(err.what(), base + "/type");
  }
  const auto data = doc.find("data");
  if (data == doc.end()) throw BadRequest("missing data", base + "/data");
  e.data = read_vector<6>(*data, base + "/data");
  const auto tolerance = doc.find("tolerance");
  if (tolerance != doc.end()) {
    if (!tolerance->is_number()) throw BadRequest("tolerance must be a number", base + "/tolerance");
    e.tolerance = tolerance->get<double>();
  }
  return e;
}

}  // namespace

std::string_view to_string(RotationFormat format) {
  return format == RotationFormat::Quaternion ? "quaternion" : "sixd";
}

RotationFormat rotation_format_from_string(std::string_view name, const std::string& field) {
  if (name == "quaternion") return RotationFormat::Quaternion;
  if (name == "sixd") return RotationFormat::SixD;
  throw BadRequest("unknown rotation format '" + std::string(name) + "'", field);
}

nlohmann::json effector_to_json(const Effector& e, const SkeletonSpec& skeleton) {
  return json{{"joint", skeleton.joint(e.joint).name},
              {"type", std::string(to_string(e.type))},
              {"data", to_list(e.data)},
              {"tolerance", e.tolerance}};
}

nlohmann::json effector_set_to_json(const EffectorSet& set, const SkeletonSpec& skeleton) {
  json list = json::array();
  for (const auto& e : set.effectors) list.push_back(effector_to_json(e, skeleton));
  return json{{"effectors", std::move(list)}};
}

EffectorSet effector_set_from_json(const nlohmann::json& doc, const SkeletonSpec& skeleton,
                                   const std::string& pointer) {
  const json* list = &doc;
  std::string base = pointer;
  if (doc.is_object()) {
    const auto it = doc.find("effectors");
    if (it == doc.end()) throw BadRequest("missing effectors", pointer);
    list = &*it;
  }
  if (!list->is_array()) throw BadRequest("effectors must be a list", base);
  EffectorSet set;
  for (std::size_t i = 0; i < list->size(); ++i) {
    set.effectors.push_back(effector_from_json((*list)[i], skeleton, at(base, i)));
  }
  try {
    set.validate(skeleton.size());
  } catch (const BadRequest& err) {
    // validate() reports paths below "/effectors".
    std::string field = err.field();
    if (field.rfind("/effectors", 0) == 0) field = base + field.substr(10);
    throw BadRequest(err.what(), field);
  }
  return set;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& err) {
    throw FormatError(path.string() + ": " + err.what());
  }
}

void write_json_file(const nlohmann::json& doc, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw NotFound("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw FormatError("failed writing " + path.string());
}

EffectorSet load_effector_set(const std::filesystem::path& path, const SkeletonSpec& skeleton) {
  json doc;
  try {
    doc = read_json_file(path);
  } catch (const FormatError& err) {
    throw BadRequest(err.what(), "");
  }
  return effector_set_from_json(doc, skeleton);
}

void save_effector_set(const EffectorSet& set, const SkeletonSpec& skeleton, const std::filesystem::path& path) {
  write_json_file(effector_set_to_json(set, skeleton), path);
}

nlohmann::json pose_to_json(const SkeletonSpec& skeleton, const Vec3& root_position,
                            std::span<const Mat3> local_rotations, const PoseDocumentOptions& options) {
  if (local_rotations.size() != skeleton.size()) {
    throw ShapeError("pose has " + std::to_string(local_rotations.size()) + " rotations, skeleton has " +
                     std::to_string(skeleton.size()) + " joints");
  }
  GlobalTransforms globals;
  if (options.include_global_positions) globals = forward_kinematics(skeleton, root_position, local_rotations);
  json joints = json::array();
  for (std::size_t j = 0; j < skeleton.size(); ++j) {
    json entry{{"name", skeleton.joint(j).name}};
    if (options.rotation_format == RotationFormat::Quaternion) {
      entry["rotation"] = to_list(matrix_to_quaternion(local_rotations[j]).coeffs());
    } else {
      entry["rotation"] = to_list(matrix_to_rotation6d(local_rotations[j]));
    }
    if (options.include_global_positions) entry["position"] = to_list(globals.positions[j]);
    joints.push_back(std::move(entry));
  }
  return json{{"rotation_format", std::string(to_string(options.rotation_format))},
              {"root_position", to_list(root_position)},
              {"joints", std::move(joints)}};
}

nlohmann::json pose_to_json(const SkeletonSpec& skeleton, const Pose& pose, const PoseDocumentOptions& options) {
  const auto locals = pose.local_matrices();
  return pose_to_json(skeleton, pose.root_position, locals, options);
}

Pose pose_from_json(const nlohmann::json& doc, const SkeletonSpec& skeleton) {
  try {
    if (!doc.is_object()) throw BadRequest("pose must be an object", "");
    const auto format = rotation_format_from_string(doc.value("rotation_format", std::string("quaternion")));
    if (!doc.contains("root_position")) throw BadRequest("missing root_position", "/root_position");
    Pose pose;
    pose.root_position = read_vector<3>(doc.at("root_position"), "/root_position");
    if (!doc.contains("joints") || !doc.at("joints").is_array()) throw BadRequest("missing joints", "/joints");
    const json& joints = doc.at("joints");
    if (joints.size() != skeleton.size()) {
      throw BadRequest("pose has " + std::to_string(joints.size()) + " joints, skeleton has " +
                           std::to_string(skeleton.size()),
                       "/joints");
    }
    for (std::size_t j = 0; j < joints.size(); ++j) {
      const std::string base = at("/joints", j);
      const json& entry = joints[j];
      if (!entry.is_object() || !entry.contains("rotation")) throw BadRequest("missing rotation", base + "/rotation");
      if (entry.contains("name") && entry.at("name") != skeleton.joint(j).name) {
        throw BadRequest("expected joint '" + skeleton.joint(j).name + "'", base + "/name");
      }
      try {
        if (format == RotationFormat::Quaternion) {
          const Eigen::Vector4d q = read_vector<4>(entry.at("rotation"), base + "/rotation");
          pose.local_rotations.push_back(matrix_to_quaternion(quaternion_to_matrix(Quat(q[3], q[0], q[1], q[2]))));
        } else {
          const Vec6 r = read_vector<6>(entry.at("rotation"), base + "/rotation");
          pose.local_rotations.push_back(matrix_to_quaternion(rotation6d_to_matrix(r)));
        }
      } catch (const DegenerateRotation&) {
        throw BadRequest("degenerate rotation", base + "/rotation");
      }
    }
    return pose;
  } catch (const BadRequest& err) {
    throw FormatError(std::string(err.what()) + " at '" + err.field() + "'");
  }
}

}  // namespace protores

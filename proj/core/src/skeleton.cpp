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

#include "protores/skeleton.hpp"

#include <fstream>
#include <sstream>

#include "protores/error.hpp"

namespace protores {

namespace {

constexpr std::pair<Zone, std::string_view> kZoneNames[] = {
    {Zone::LeftArm, "left-arm"}, {Zone::RightArm, "right-arm"}, {Zone::LeftLeg, "left-leg"},
    {Zone::RightLeg, "right-leg"}, {Zone::Hips, "hips"},        {Zone::Head, "head"},
};

std::string swap_side(const std::string& name) {
  std::string out = name;
  if (auto pos = out.find("Left"); pos != std::string::npos) {
    out.replace(pos, 4, "Right");
  } else if (pos = out.find("Right"); pos != std::string::npos) {
    out.replace(pos, 5, "Left");
  }
  return out;
}

Vec3 reflect_x(const Vec3& v) { return {-v.x(), v.y(), v.z()}; }

}  // namespace

std::string_view to_string(Zone zone) {
  for (const auto& [z, name] : kZoneNames) {
    if (z == zone) return name;
  }
  return "unknown";
}

Zone zone_from_string(std::string_view name) {
  for (const auto& [z, n] : kZoneNames) {
    if (n == name) return z;
  }
  throw SkeletonError("unknown zone '" + std::string(name) + "'");
}

SkeletonSpec::SkeletonSpec(std::vector<JointSpec> joints, std::map<std::string, std::string> landmarks)
    : joints_(std::move(joints)), landmarks_(std::move(landmarks)) {
  if (joints_.empty()) {
    throw SkeletonError("skeleton has no joints");
  }
  if (joints_[0].parent.has_value()) {
    throw SkeletonError("joint 0 must be the root");
  }
  for (std::size_t j = 1; j < joints_.size(); ++j) {
    if (!joints_[j].parent.has_value()) {
      throw SkeletonError("joint '" + joints_[j].name + "' has no parent; only joint 0 may be the root");
    }
    if (*joints_[j].parent >= j) {
      throw SkeletonError("joint '" + joints_[j].name + "' precedes its parent");
    }
  }
  for (std::size_t j = 0; j < joints_.size(); ++j) {
    if (!joints_[j].offset.allFinite()) {
      throw SkeletonError("joint '" + joints_[j].name + "' has a non-finite offset");
    }
    for (std::size_t k = 0; k < j; ++k) {
      if (joints_[k].name == joints_[j].name) {
        throw SkeletonError("duplicate joint name '" + joints_[j].name + "'");
      }
    }
  }

  mirror_.assign(joints_.size(), std::nullopt);
  for (std::size_t j = 0; j < joints_.size(); ++j) {
    if (joints_[j].mirror.empty()) continue;
    auto m = find(joints_[j].mirror);
    if (!m) {
      throw SkeletonError("joint '" + joints_[j].name + "' mirrors unknown joint '" + joints_[j].mirror + "'");
    }
    mirror_[j] = m;
  }
  for (std::size_t j = 0; j < joints_.size(); ++j) {
    if (mirror_[j] && mirror_[*mirror_[j]] != j) {
      throw SkeletonError("mirror map is not an involution at joint '" + joints_[j].name + "'");
    }
  }
  for (Zone zone : kLimbZones) {
    if (joints_in_zone(zone).empty()) {
      throw SkeletonError("zone '" + std::string(to_string(zone)) + "' has no joints");
    }
  }
  for (const auto& [key, name] : landmarks_) {
    if (!find(name)) {
      throw SkeletonError("landmark '" + key + "' names unknown joint '" + name + "'");
    }
  }
}

std::optional<std::size_t> SkeletonSpec::find(std::string_view name) const {
  for (std::size_t j = 0; j < joints_.size(); ++j) {
    if (joints_[j].name == name) return j;
  }
  return std::nullopt;
}

std::size_t SkeletonSpec::index_of(std::string_view name) const {
  if (auto j = find(name)) return *j;
  throw SkeletonError("unknown joint '" + std::string(name) + "'");
}

std::size_t SkeletonSpec::mirror_index(std::size_t index) const {
  if (!mirror_.at(index)) {
    throw SkeletonError("joint '" + joints_[index].name + "' has no mirror entry");
  }
  return *mirror_[index];
}

bool SkeletonSpec::has_complete_mirror() const {
  for (const auto& m : mirror_) {
    if (!m) return false;
  }
  return true;
}

std::vector<std::size_t> SkeletonSpec::joints_in_zone(Zone zone) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < joints_.size(); ++j) {
    if (joints_[j].zone == zone) out.push_back(j);
  }
  return out;
}

std::string SkeletonSpec::landmark(std::string_view key) const {
  if (auto it = landmarks_.find(std::string(key)); it != landmarks_.end()) {
    return it->second;
  }
  if (auto it = default_landmarks().find(std::string(key)); it != default_landmarks().end()) {
    return it->second;
  }
  throw SkeletonError("unknown landmark '" + std::string(key) + "'");
}

nlohmann::json SkeletonSpec::to_json() const {
  nlohmann::json joints = nlohmann::json::array();
  for (const auto& j : joints_) {
    nlohmann::json entry;
    entry["name"] = j.name;
    entry["parent"] = j.parent ? nlohmann::json(*j.parent) : nlohmann::json(nullptr);
    entry["offset"] = {j.offset.x(), j.offset.y(), j.offset.z()};
    entry["mirror"] = j.mirror;
    entry["zone"] = std::string(to_string(j.zone));
    joints.push_back(std::move(entry));
  }
  nlohmann::json doc;
  doc["joints"] = std::move(joints);
  if (!landmarks_.empty()) {
    doc["landmarks"] = landmarks_;
  }
  return doc;
}

SkeletonSpec SkeletonSpec::from_json(const nlohmann::json& doc) {
  try {
    std::vector<JointSpec> joints;
    for (const auto& entry : doc.at("joints")) {
      JointSpec j;
      j.name = entry.at("name").get<std::string>();
      if (!entry.at("parent").is_null()) {
        j.parent = entry.at("parent").get<std::size_t>();
      }
      const auto& off = entry.at("offset");
      if (!off.is_array() || off.size() != 3) {
        throw SkeletonError("joint '" + j.name + "': offset must have 3 components");
      }
      j.offset = Vec3(off[0].get<double>(), off[1].get<double>(), off[2].get<double>());
      j.mirror = entry.value("mirror", std::string());
      j.zone = zone_from_string(entry.at("zone").get<std::string>());
      joints.push_back(std::move(j));
    }
    std::map<std::string, std::string> landmarks;
    if (doc.contains("landmarks")) {
      landmarks = doc.at("landmarks").get<std::map<std::string, std::string>>();
    }
    return SkeletonSpec(std::move(joints), std::move(landmarks));
  } catch (const nlohmann::json::exception& e) {
    throw SkeletonError(std::string("malformed skeleton document: ") + e.what());
  }
}

SkeletonSpec SkeletonSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw SkeletonError("cannot open skeleton file " + path.string());
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw SkeletonError("cannot parse " + path.string() + ": " + e.what());
  }
  return from_json(doc);
}

void SkeletonSpec::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write skeleton file " + path.string());
  }
  out << to_json().dump(2) << '\n';
}

SkeletonSpec SkeletonSpec::humanoid64() {
  std::vector<JointSpec> joints;
  auto add = [&](const std::string& name, const std::string& parent, Vec3 offset, Zone zone) {
    JointSpec j;
    j.name = name;
    if (!parent.empty()) {
      for (std::size_t k = 0; k < joints.size(); ++k) {
        if (joints[k].name == parent) j.parent = k;
      }
    }
    j.offset = offset;
    j.zone = zone;
    joints.push_back(std::move(j));
  };

  // Left side is +x; the right side is the x-reflection of the left.
  struct Segment {
    const char* name;
    const char* parent;
    Vec3 offset;
  };
  const std::vector<Segment> left_arm = {
      {"BicepLeft", "ClavicleLeft", {0.12, 0.0, 0.0}},
      {"ForarmLeft", "BicepLeft", {0.28, 0.0, 0.0}},
      {"HandLeft", "ForarmLeft", {0.25, 0.0, 0.0}},
  };
  const struct {
    const char* finger;
    Vec3 base;
    double length;
  } fingers[] = {
      {"Index", {0.090, 0.0, 0.030}, 0.040},
      {"Middle", {0.095, 0.0, 0.010}, 0.045},
      {"Ring", {0.090, 0.0, -0.010}, 0.040},
      {"Pinky", {0.080, 0.0, -0.030}, 0.030},
      {"Thumb", {0.025, -0.010, 0.035}, 0.030},
  };
  const std::vector<Segment> left_leg = {
      {"ThighLeft", "Hips", {0.09, -0.05, 0.0}},
      {"CalfLeft", "ThighLeft", {0.0, -0.42, 0.0}},
      {"FootLeft", "CalfLeft", {0.0, -0.42, 0.0}},
      {"ToeLeft", "FootLeft", {0.0, -0.06, 0.12}},
      {"ToeLeftEnd", "ToeLeft", {0.0, 0.0, 0.06}},
  };

  auto add_arm = [&](bool right) {
    const Zone zone = right ? Zone::RightArm : Zone::LeftArm;
    auto side = [&](const std::string& n) { return right ? swap_side(n) : n; };
    auto off = [&](const Vec3& v) { return right ? reflect_x(v) : v; };
    for (const auto& s : left_arm) {
      add(side(s.name), side(s.parent), off(s.offset), zone);
    }
    for (const auto& f : fingers) {
      const std::string base = std::string(f.finger);
      const Vec3 along = f.finger == std::string("Thumb") ? Vec3(0.7, -0.2, 0.68).normalized() : Vec3::UnitX();
      add(side(base + "0Left"), side("HandLeft"), off(f.base), zone);
      add(side(base + "1Left"), side(base + "0Left"), off(along * f.length), zone);
      add(side(base + "2Left"), side(base + "1Left"), off(along * f.length * 0.7), zone);
      add(side(base + "2LeftEnd"), side(base + "2Left"), off(along * f.length * 0.55), zone);
    }
  };

  add("Hips", "", Vec3::Zero(), Zone::Hips);
  add("Spine0", "Hips", {0.0, 0.10, 0.0}, Zone::Hips);
  add("Spine1", "Spine0", {0.0, 0.12, 0.0}, Zone::Hips);
  add("Chest", "Spine1", {0.0, 0.12, 0.0}, Zone::Hips);
  add("Neck", "Chest", {0.0, 0.16, 0.0}, Zone::Head);
  add("Head", "Neck", {0.0, 0.10, 0.02}, Zone::Head);
  add("ClavicleLeft", "Chest", {0.06, 0.12, 0.0}, Zone::LeftArm);
  add("ClavicleRight", "Chest", {-0.06, 0.12, 0.0}, Zone::RightArm);
  add_arm(false);
  add_arm(true);
  for (bool right : {false, true}) {
    for (const auto& s : left_leg) {
      add(right ? swap_side(s.name) : s.name, right ? swap_side(s.parent) : s.parent,
          right ? reflect_x(s.offset) : s.offset, right ? Zone::RightLeg : Zone::LeftLeg);
    }
  }
  for (auto& j : joints) {
    j.mirror = swap_side(j.name);
  }
  return SkeletonSpec(std::move(joints));
}

}  // namespace protores

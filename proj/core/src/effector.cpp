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

#include "protores/effector.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "protores/error.hpp"

namespace protores {

namespace {

constexpr double kLookAtDistanceStd = 5.0;

Vec3 standard_normal3(Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double x = normal(rng);
  const double y = normal(rng);
  const double z = normal(rng);
  return {x, y, z};
}

std::string field(std::size_t i, const char* name) {
  return "/effectors/" + std::to_string(i) + "/" + name;
}

}  // namespace

std::string_view to_string(EffectorType type) {
  switch (type) {
    case EffectorType::Position:
      return "position";
    case EffectorType::Rotation:
      return "rotation";
    case EffectorType::LookAt:
      return "lookat";
  }
  return "unknown";
}

EffectorType effector_type_from_string(std::string_view name) {
  if (name == "position") return EffectorType::Position;
  if (name == "rotation") return EffectorType::Rotation;
  if (name == "lookat") return EffectorType::LookAt;
  throw BadRequest("unknown effector type '" + std::string(name) + "'", "type");
}

void EffectorSet::validate(std::size_t joint_count) const {
  if (effectors.empty()) {
    throw BadRequest("effector set is empty", "/effectors");
  }
  std::set<std::pair<std::size_t, int>> seen;
  for (std::size_t i = 0; i < effectors.size(); ++i) {
    const auto& e = effectors[i];
    if (e.joint >= joint_count) {
      throw BadRequest("joint id " + std::to_string(e.joint) + " out of range", field(i, "joint"));
    }
    if (!seen.emplace(e.joint, static_cast<int>(e.type)).second) {
      throw BadRequest("duplicate effector (joint " + std::to_string(e.joint) + ", type " +
                           std::string(to_string(e.type)) + ")",
                       field(i, "type"));
    }
    if (!e.data.allFinite()) {
      throw BadRequest("effector data is not finite", field(i, "data"));
    }
    if (!(e.tolerance >= 0.0 && e.tolerance <= 1.0)) {
      throw BadRequest("tolerance must lie in [0, 1]", field(i, "tolerance"));
    }
    if (e.type == EffectorType::Position && !e.data.tail<3>().isZero(0.0)) {
      throw BadRequest("position effector data[3:6] must be zero", field(i, "data"));
    }
    if (e.type == EffectorType::LookAt && std::abs(e.direction().norm() - 1.0) > 1e-4) {
      throw BadRequest("look-at direction must have unit length", field(i, "data"));
    }
    if (e.type == EffectorType::Rotation) {
      try {
        (void)rotation6d_to_matrix(e.data);
      } catch (const DegenerateRotation&) {
        throw BadRequest("rotation effector is degenerate", field(i, "data"));
      }
    }
  }
}

EffectorSet CenteredEffectorSet::restore() const {
  EffectorSet out;
  out.effectors = effectors;
  for (auto& e : out.effectors) {
    if (e.type != EffectorType::Rotation) {
      e.data.head<3>() += centroid;
    }
  }
  return out;
}

double tolerance_to_noise_std(double tolerance, double sigma_max, double exponent) {
  if (!(tolerance >= 0.0 && tolerance <= 1.0)) {
    throw DomainError("tolerance " + std::to_string(tolerance) + " outside [0, 1]");
  }
  return sigma_max * std::pow(tolerance, exponent);
}

double tolerance_to_weight(double sigma, double max_weight) {
  if (sigma < 1.0 / max_weight) {
    return max_weight;
  }
  return std::min(max_weight, 1.0 / sigma);
}

std::vector<EffectorSlot> sample_distinct_slots(Rng& rng, std::vector<EffectorSlot> candidates, std::size_t count) {
  if (count > candidates.size()) {
    throw ConfigError("cannot draw " + std::to_string(count) + " distinct effectors from " +
                      std::to_string(candidates.size()) + " slots");
  }
  // Partial Fisher-Yates: the first `count` entries become a uniform ordered sample.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
    std::swap(candidates[i], candidates[pick(rng)]);
  }
  candidates.resize(count);
  return candidates;
}

std::vector<EffectorSlot> sample_effector_set(Rng& rng, std::size_t joint_count, std::size_t n_min,
                                              std::size_t n_max) {
  if (n_min < 1 || n_min > n_max || n_max > kEffectorTypeCount * joint_count) {
    throw ConfigError("effector count range [" + std::to_string(n_min) + ", " + std::to_string(n_max) +
                      "] is infeasible for " + std::to_string(joint_count) + " joints");
  }
  std::uniform_int_distribution<std::size_t> count_dist(n_min, n_max);
  const std::size_t n = count_dist(rng);
  std::vector<EffectorSlot> grid;
  grid.reserve(kEffectorTypeCount * joint_count);
  for (std::size_t j = 0; j < joint_count; ++j) {
    for (std::size_t t = 0; t < kEffectorTypeCount; ++t) {
      grid.emplace_back(j, static_cast<EffectorType>(t));
    }
  }
  return sample_distinct_slots(rng, std::move(grid), n);
}

Vec6 corrupt_position_effector(const Vec3& position, double sigma, Rng& rng) {
  Vec6 out = Vec6::Zero();
  out.head<3>() = position + sigma * standard_normal3(rng);
  return out;
}

Vec6 corrupt_rotation_effector(const Mat3& global_rotation, double sigma, Rng& rng) {
  const Vec3 angles = sigma * standard_normal3(rng);
  const Mat3 perturbed = euler_to_matrix(angles) * global_rotation;
  return matrix_to_rotation6d(perturbed);
}

Vec6 generate_lookat_effector(const Vec3& position, const Mat3& global_rotation, double sigma, Rng& rng) {
  Vec3 direction = standard_normal3(rng);
  while (!(direction.norm() > kDegenerateNorm)) {
    direction = standard_normal3(rng);
  }
  direction.normalize();
  std::normal_distribution<double> distance_dist(0.0, kLookAtDistanceStd);
  const double distance = std::abs(distance_dist(rng));
  const Vec3 noise = standard_normal3(rng);
  Vec6 out;
  out.head<3>() = position + distance * (global_rotation * direction) + sigma * noise;
  out.tail<3>() = direction;
  return out;
}

Effector make_effector(EffectorSlot slot, double tolerance, const Vec3& position, const Mat3& global_rotation,
                       double sigma, Rng& rng) {
  Effector e;
  e.joint = slot.first;
  e.type = slot.second;
  e.tolerance = tolerance;
  switch (slot.second) {
    case EffectorType::Position:
      e.data = corrupt_position_effector(position, sigma, rng);
      break;
    case EffectorType::Rotation:
      e.data = corrupt_rotation_effector(global_rotation, sigma, rng);
      break;
    case EffectorType::LookAt:
      e.data = generate_lookat_effector(position, global_rotation, sigma, rng);
      break;
  }
  return e;
}

CenteredEffectorSet center_effectors(const EffectorSet& set) {
  CenteredEffectorSet out;
  out.effectors = set.effectors;
  Vec3 sum = Vec3::Zero();
  std::size_t count = 0;
  for (const auto& e : set.effectors) {
    if (e.type == EffectorType::Position) {
      sum += e.position();
      ++count;
    }
  }
  if (count > 0) {
    out.centroid = sum / static_cast<double>(count);
  }
  for (auto& e : out.effectors) {
    if (e.type != EffectorType::Rotation) {
      e.data.head<3>() -= out.centroid;
    }
  }
  return out;
}

Eigen::MatrixXd encode_effector_inputs(const CenteredEffectorSet& set, const Eigen::MatrixXd& joint_embedding,
                                       const Eigen::MatrixXd& type_embedding) {
  const Eigen::Index dim = joint_embedding.cols();
  if (type_embedding.cols() != dim || type_embedding.rows() != static_cast<Eigen::Index>(kEffectorTypeCount)) {
    throw ShapeError("embedding tables disagree on width or type count");
  }
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(set.effectors.size()),
                       static_cast<Eigen::Index>(kEffectorDataWidth) + 2 * dim);
  for (std::size_t i = 0; i < set.effectors.size(); ++i) {
    const auto& e = set.effectors[i];
    if (e.joint >= static_cast<std::size_t>(joint_embedding.rows())) {
      throw ShapeError("effector joint id " + std::to_string(e.joint) + " outside the embedding table");
    }
    const auto row = static_cast<Eigen::Index>(i);
    rows.block<1, 6>(row, 0) = e.data.transpose();
    rows(row, 6) = e.tolerance;
    rows.block(row, 7, 1, dim) = joint_embedding.row(static_cast<Eigen::Index>(e.joint));
    rows.block(row, 7 + dim, 1, dim) = type_embedding.row(static_cast<Eigen::Index>(e.type));
  }
  return rows;
}

}  // namespace protores

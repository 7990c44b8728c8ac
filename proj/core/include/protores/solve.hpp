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
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "protores/interchange.hpp"
#include "protores/model.hpp"

namespace protores {

/// Loaded models keyed by id. Models are immutable once registered and may be
/// shared across threads.
class ModelRegistry {
 public:
  /// Throws ConfigError on a duplicate id.
  void add(std::string id, std::shared_ptr<const Model> model);
  /// Loads a checkpoint under the id of its file stem.
  const std::string& load(const std::filesystem::path& checkpoint);
  /// Throws NotFound.
  const Model& get(const std::string& id) const;
  bool empty() const { return models_.empty(); }
  std::vector<std::string> ids() const;
  /// The first registered id; requests without a model use it.
  const std::string& default_id() const;

 private:
  std::map<std::string, std::shared_ptr<const Model>> models_;
  std::vector<std::string> order_;
};

struct SolveRequest {
  std::optional<nlohmann::json> id;  // echoed back verbatim
  std::string model;
  EffectorSet effectors;
  PoseDocumentOptions options;
};

struct SolveResponse {
  std::optional<nlohmann::json> id;
  std::string model;
  Vec3 root_position = Vec3::Zero();
  std::vector<Mat3> local_rotations;
  std::optional<std::vector<Vec3>> global_positions;
  RotationFormat rotation_format = RotationFormat::Quaternion;
  double latency_ms = 0.0;
};

/// {"id": any, "model": "name", "effectors": [...],
///  "options": {"include_global_positions": bool, "rotation_format": "quaternion" | "sixd"}}
/// "model" defaults to the registry default. Throws NotFound for an unknown model
/// and BadRequest with a field path for anything malformed.
SolveRequest parse_solve_request(const nlohmann::json& doc, const ModelRegistry& models);
/// Parses text first; malformed text is a BadRequest on the empty path.
SolveRequest parse_solve_request(const std::string& body, const ModelRegistry& models);

/// Deterministic eval-mode solve. Throws NotFound or BadRequest.
SolveResponse solve(const ModelRegistry& models, const SolveRequest& request);

/// {"id", "model", "pose": <pose document>} plus "latency_ms" when requested.
/// Without latency the text depends only on the request and the model.
nlohmann::json solve_response_to_json(const SolveResponse& response, const SkeletonSpec& skeleton,
                                      bool include_latency);

/// {"error": message, "field": path} (plus the request id when known).
nlohmann::json error_to_json(const std::string& message, const std::string& field,
                             const std::optional<nlohmann::json>& id = std::nullopt);

}  // namespace protores

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

#include "protores/solve.hpp"

#include <chrono>

#include "protores/checkpoint.hpp"
#include "protores/error.hpp"

namespace protores {

using nlohmann::json;

void ModelRegistry::add(std::string id, std::shared_ptr<const Model> model) {
  if (models_.count(id) != 0) throw ConfigError("model id '" + id + "' registered twice");
  order_.push_back(id);
  models_.emplace(std::move(id), std::move(model));
}

const std::string& ModelRegistry::load(const std::filesystem::path& checkpoint) {
  add(checkpoint.stem().string(), std::make_shared<const Model>(load_checkpoint(checkpoint)));
  return order_.back();
}

const Model& ModelRegistry::get(const std::string& id) const {
  const auto it = models_.find(id);
  if (it == models_.end()) throw NotFound("unknown model '" + id + "'");
  return *it->second;
}

std::vector<std::string> ModelRegistry::ids() const { return order_; }

const std::string& ModelRegistry::default_id() const {
  if (order_.empty()) throw NotFound("no models loaded");
  return order_.front();
}

SolveRequest parse_solve_request(const nlohmann::json& doc, const ModelRegistry& models) {
  if (!doc.is_object()) throw BadRequest("request must be an object", "");
  SolveRequest req;
  if (doc.contains("id")) req.id = doc.at("id");
  req.model = models.default_id();
  if (doc.contains("model")) {
    if (!doc.at("model").is_string()) throw BadRequest("model must be a string", "/model");
    req.model = doc.at("model").get<std::string>();
  }
  const Model& model = models.get(req.model);
  if (!doc.contains("effectors")) throw BadRequest("missing effectors", "/effectors");
  req.effectors = effector_set_from_json(doc.at("effectors"), model.skeleton(), "/effectors");
  if (doc.contains("options")) {
    const json& opt = doc.at("options");
    if (!opt.is_object()) throw BadRequest("options must be an object", "/options");
    if (opt.contains("include_global_positions")) {
      if (!opt.at("include_global_positions").is_boolean()) {
        throw BadRequest("expected true or false", "/options/include_global_positions");
      }
      req.options.include_global_positions = opt.at("include_global_positions").get<bool>();
    }
    if (opt.contains("rotation_format")) {
      if (!opt.at("rotation_format").is_string()) {
        throw BadRequest("expected a string", "/options/rotation_format");
      }
      req.options.rotation_format =
          rotation_format_from_string(opt.at("rotation_format").get<std::string>(), "/options/rotation_format");
    }
  }
  return req;
}

SolveRequest parse_solve_request(const std::string& body, const ModelRegistry& models) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw BadRequest(std::string("malformed request: ") + e.what(), "");
  }
  return parse_solve_request(doc, models);
}

SolveResponse solve(const ModelRegistry& models, const SolveRequest& request) {
  const auto start = std::chrono::steady_clock::now();
  const Model& model = models.get(request.model);
  request.effectors.validate(model.skeleton().size());
  const ForwardOutput out = model_forward(model, request.effectors, Mode::Eval);
  SolveResponse res;
  res.id = request.id;
  res.model = request.model;
  res.root_position = out.root_position();
  res.local_rotations = out.local_rotations;
  if (request.options.include_global_positions) res.global_positions = out.global.positions;
  res.rotation_format = request.options.rotation_format;
  res.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return res;
}

nlohmann::json solve_response_to_json(const SolveResponse& response, const SkeletonSpec& skeleton,
                                      bool include_latency) {
  const PoseDocumentOptions options{response.rotation_format, response.global_positions.has_value()};
  json pose = pose_to_json(skeleton, response.root_position, response.local_rotations, options);
  json doc;
  if (response.id) doc["id"] = *response.id;
  doc["model"] = response.model;
  doc["pose"] = std::move(pose);
  if (include_latency) doc["latency_ms"] = response.latency_ms;
  return doc;
}

nlohmann::json error_to_json(const std::string& message, const std::string& field,
                             const std::optional<nlohmann::json>& id) {
  json doc{{"error", message}, {"field", field}};
  if (id) doc["id"] = *id;
  return doc;
}

}  // namespace protores

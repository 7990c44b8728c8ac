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

#include "protores/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "protores/error.hpp"
#include "protores/pose_losses.hpp"

namespace protores {

namespace {

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a number, got '" + value + "'");
  }
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& value) {
  try {
    if (value.empty() || value[0] == '-') throw std::invalid_argument(value);
    std::size_t used = 0;
    const auto v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + value + "'");
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

struct Field {
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
  std::function<nlohmann::json(const TrainConfig&)> get;
};

template <typename T>
Field number_field(T TrainConfig::*member) {
  return {[member](TrainConfig& c, const std::string& k, const std::string& v) {
            if constexpr (std::is_same_v<T, double>) {
              c.*member = parse_double(k, v);
            } else {
              c.*member = static_cast<T>(parse_unsigned(k, v));
            }
          },
          [member](const TrainConfig& c) { return nlohmann::json(c.*member); }};
}

Field bool_field(bool TrainConfig::*member) {
  return {[member](TrainConfig& c, const std::string& k, const std::string& v) { c.*member = parse_bool(k, v); },
          [member](const TrainConfig& c) { return nlohmann::json(c.*member); }};
}

Field scale_field(double LossTermScales::*member) {
  return {[member](TrainConfig& c, const std::string& k, const std::string& v) {
            c.scales.*member = parse_double(k, v);
          },
          [member](const TrainConfig& c) { return nlohmann::json(c.scales.*member); }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> kFields = {
      {"epochs", number_field(&TrainConfig::epochs)},
      {"batch_size", number_field(&TrainConfig::batch_size)},
      {"learning_rate", number_field(&TrainConfig::learning_rate)},
      {"adam_beta1", number_field(&TrainConfig::adam_beta1)},
      {"adam_beta2", number_field(&TrainConfig::adam_beta2)},
      {"adam_epsilon", number_field(&TrainConfig::adam_epsilon)},
      {"w_pos", number_field(&TrainConfig::w_pos)},
      {"sigma_max_position", number_field(&TrainConfig::sigma_max_position)},
      {"sigma_max_rotation", number_field(&TrainConfig::sigma_max_rotation)},
      {"sigma_max_lookat", number_field(&TrainConfig::sigma_max_lookat)},
      {"max_weight", number_field(&TrainConfig::max_weight)},
      {"eta", number_field(&TrainConfig::eta)},
      {"min_effectors", number_field(&TrainConfig::min_effectors)},
      {"max_effectors", number_field(&TrainConfig::max_effectors)},
      {"augment_mirror", bool_field(&TrainConfig::augment_mirror)},
      {"augment_rotate_y", bool_field(&TrainConfig::augment_rotate_y)},
      {"seed", number_field(&TrainConfig::seed)},
      {"log_interval", number_field(&TrainConfig::log_interval)},
      {"checkpoint_interval", number_field(&TrainConfig::checkpoint_interval)},
      {"scale_gpd_l2_rnd", scale_field(&LossTermScales::gpd_l2_rnd)},
      {"scale_ikd_l2_rnd", scale_field(&LossTermScales::ikd_l2_rnd)},
      {"scale_gpd_l2_det", scale_field(&LossTermScales::gpd_l2_det)},
      {"scale_ikd_l2_det", scale_field(&LossTermScales::ikd_l2_det)},
      {"scale_loc_geo_det", scale_field(&LossTermScales::loc_geo_det)},
      {"scale_glob_geo_rnd", scale_field(&LossTermScales::glob_geo_rnd)},
      {"scale_lookat_det", scale_field(&LossTermScales::lookat_det)},
  };
  return kFields;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be non-negative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ConfigError("adam_epsilon must be positive");
  if (!(w_pos >= 0.0)) throw ConfigError("w_pos must be non-negative");
  for (double s : {sigma_max_position, sigma_max_rotation, sigma_max_lookat}) {
    if (!(s >= 0.0)) throw ConfigError("sigma_max values must be non-negative");
  }
  if (!(max_weight > 0.0)) throw ConfigError("max_weight must be positive");
  if (!(eta >= 0.0)) throw ConfigError("eta must be non-negative");
  if (min_effectors < 1 || min_effectors > max_effectors) throw ConfigError("effector count range is invalid");
  if (log_interval < 1 || checkpoint_interval < 1) throw ConfigError("intervals must be at least 1");
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(*this, key, trim(value));
      return;
    }
  }
  throw ConfigError("unknown training option '" + key + "'");
}

std::vector<std::string> TrainConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [name, field] : fields()) out.push_back(name);
  return out;
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [name, field] : fields()) doc[name] = field.get(*this);
  return doc;
}

double TrainConfig::sigma_max(EffectorType type) const {
  switch (type) {
    case EffectorType::Position:
      return sigma_max_position;
    case EffectorType::Rotation:
      return sigma_max_rotation;
    case EffectorType::LookAt:
      return sigma_max_lookat;
  }
  return sigma_max_position;
}

EnvLookup process_environment() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (v == nullptr) return std::nullopt;
    return std::string(v);
  };
}

std::map<std::string, std::string> read_key_value_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open config file '" + path.string() + "'");
  std::map<std::string, std::string> values;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(number) + ": expected key = value");
    }
    values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return values;
}

TrainConfig resolve_train_config(const std::map<std::string, std::string>& file_values,
                                 const std::map<std::string, std::string>& overrides, const EnvLookup& env) {
  TrainConfig config;
  for (const auto& [key, value] : file_values) config.set(key, value);
  if (env) {
    for (const auto& key : TrainConfig::keys()) {
      std::string name = "PROTORES_" + key;
      std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::toupper(c); });
      if (auto value = env(name)) config.set(key, *value);
    }
  }
  for (const auto& [key, value] : overrides) config.set(key, value);
  config.validate();
  return config;
}

TrainConfig resolve_train_config(const std::optional<std::filesystem::path>& file,
                                 const std::map<std::string, std::string>& overrides, const EnvLookup& env) {
  std::map<std::string, std::string> values;
  if (file) {
    values = read_key_value_file(*file);
    try {
      TrainConfig probe;
      for (const auto& [key, value] : values) probe.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(file->string() + ": " + e.what());
    }
  }
  return resolve_train_config(values, overrides, env);
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  gpd_l2_rnd += o.gpd_l2_rnd;
  ikd_l2_rnd += o.ikd_l2_rnd;
  gpd_l2_det += o.gpd_l2_det;
  ikd_l2_det += o.ikd_l2_det;
  loc_geo_det += o.loc_geo_det;
  glob_geo_rnd += o.glob_geo_rnd;
  lookat_det += o.lookat_det;
  total += o.total;
  return *this;
}

LossBreakdown& LossBreakdown::operator*=(double f) {
  gpd_l2_rnd *= f;
  ikd_l2_rnd *= f;
  gpd_l2_det *= f;
  ikd_l2_det *= f;
  loc_geo_det *= f;
  glob_geo_rnd *= f;
  lookat_det *= f;
  total *= f;
  return *this;
}

nlohmann::json LossBreakdown::to_json() const {
  return {{"gpd_l2_rnd", gpd_l2_rnd},   {"ikd_l2_rnd", ikd_l2_rnd},     {"gpd_l2_det", gpd_l2_det},
          {"ikd_l2_det", ikd_l2_det},   {"loc_geo_det", loc_geo_det},   {"glob_geo_rnd", glob_geo_rnd},
          {"lookat_det", lookat_det},   {"total", total}};
}

double combine_losses(const LossBreakdown& t, double w_pos, std::size_t joint_count, const LossTermScales& s) {
  const double J = static_cast<double>(joint_count);
  return w_pos / J *
             (s.gpd_l2_rnd * t.gpd_l2_rnd + s.ikd_l2_rnd * t.ikd_l2_rnd + s.gpd_l2_det * t.gpd_l2_det +
              s.ikd_l2_det * t.ikd_l2_det) +
         1.0 / J * (s.lookat_det * t.lookat_det + s.glob_geo_rnd * t.glob_geo_rnd + s.loc_geo_det * t.loc_geo_det);
}

GroundTruth ground_truth_from_pose(const SkeletonSpec& skeleton, const Pose& pose) {
  GlobalTransforms g = forward_kinematics(skeleton, pose);
  return {std::move(g.positions), std::move(g.rotations), pose.local_matrices()};
}

BatchItem prepare_batch_item(const Pose& source, const SkeletonSpec& skeleton, std::size_t effector_count, Rng& rng,
                             const TrainConfig& config) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Pose pose = source;
  if (config.augment_rotate_y) pose = rotate_pose_about_y(pose, 2.0 * M_PI * unit(rng));
  if (config.augment_mirror && unit(rng) < 0.5) pose = mirror_pose(skeleton, pose);

  BatchItem item;
  item.truth = ground_truth_from_pose(skeleton, pose);
  const auto slots = sample_effector_set(rng, skeleton.size(), effector_count, effector_count);
  item.effectors.effectors.reserve(slots.size());
  item.weights.reserve(slots.size());
  for (const auto& slot : slots) {
    const double tolerance = unit(rng);
    const double sigma = tolerance_to_noise_std(tolerance, config.sigma_max(slot.second), config.eta);
    item.weights.push_back(tolerance_to_weight(sigma, config.max_weight));
    item.effectors.effectors.push_back(make_effector(slot, tolerance, item.truth.positions[slot.first],
                                                     item.truth.global_rotations[slot.first], sigma, rng));
  }
  return item;
}

namespace {

/// Prediction and ground truth expressed in one common frame.
struct LossInputs {
  const double* draft = nullptr;  // 3J
  const std::vector<Mat3>* local = nullptr;
  const std::vector<Mat3>* global_rotations = nullptr;
  const std::vector<Vec3>* global_positions = nullptr;
  const GroundTruth* truth = nullptr;
  Vec3 truth_offset = Vec3::Zero();  // subtracted from ground-truth positions
  const std::vector<Effector>* effectors = nullptr;
  const std::vector<double>* weights = nullptr;
};

struct LossGradients {
  Eigen::VectorXd draft;
  std::vector<Mat3> local;
  std::vector<Mat3> global_rotations;
  std::vector<Vec3> global_positions;

  explicit LossGradients(std::size_t J)
      : draft(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(3 * J))),
        local(J, Mat3::Zero()),
        global_rotations(J, Mat3::Zero()),
        global_positions(J, Vec3::Zero()) {}
};

void check_finite(const LossBreakdown& l) {
  const std::pair<const char*, double> terms[] = {
      {"gpd_l2_rnd", l.gpd_l2_rnd}, {"ikd_l2_rnd", l.ikd_l2_rnd},     {"gpd_l2_det", l.gpd_l2_det},
      {"ikd_l2_det", l.ikd_l2_det}, {"loc_geo_det", l.loc_geo_det},   {"glob_geo_rnd", l.glob_geo_rnd},
      {"lookat_det", l.lookat_det}, {"total", l.total}};
  for (const auto& [name, value] : terms) {
    if (!std::isfinite(value)) throw NumericalError(std::string("loss term ") + name + " is not finite");
  }
}

// Loss terms for one item; when `grads` is set, adds d(total)/d(prediction).
LossBreakdown item_losses(const LossInputs& in, const TrainConfig& config, std::size_t J, LossGradients* grads) {
  const auto& truth = *in.truth;
  const auto& effs = *in.effectors;
  const auto& w = *in.weights;
  const auto& s = config.scales;
  const double c_pos = config.w_pos / static_cast<double>(J);
  const double c_ang = 1.0 / static_cast<double>(J);
  auto draft_at = [&](std::size_t j) { return Vec3(in.draft[3 * j], in.draft[3 * j + 1], in.draft[3 * j + 2]); };
  auto truth_at = [&](std::size_t j) -> Vec3 { return truth.positions[j] - in.truth_offset; };

  LossBreakdown l;
  double pos_weight = 0.0, rot_weight = 0.0;
  std::size_t lookat_count = 0;
  for (std::size_t i = 0; i < effs.size(); ++i) {
    if (effs[i].type == EffectorType::Position) pos_weight += w[i];
    if (effs[i].type == EffectorType::Rotation) rot_weight += w[i];
    if (effs[i].type == EffectorType::LookAt) ++lookat_count;
  }

  for (std::size_t i = 0; i < effs.size(); ++i) {
    const auto& e = effs[i];
    const std::size_t j = e.joint;
    if (e.type == EffectorType::Position) {
      const double a = w[i] / pos_weight;
      const Vec3 g = truth_at(j);
      const Vec3 d_gpd = draft_at(j) - g;
      const Vec3 d_ikd = (*in.global_positions)[j] - g;
      l.gpd_l2_rnd += a * d_gpd.squaredNorm();
      l.ikd_l2_rnd += a * d_ikd.squaredNorm();
      if (grads != nullptr) {
        grads->draft.segment<3>(static_cast<Eigen::Index>(3 * j)) += c_pos * s.gpd_l2_rnd * a * 2.0 * d_gpd;
        grads->global_positions[j] += c_pos * s.ikd_l2_rnd * a * 2.0 * d_ikd;
      }
    } else if (e.type == EffectorType::Rotation) {
      const double a = w[i] / rot_weight;
      Mat3 g;
      l.glob_geo_rnd += a * geodesic_distance(truth.global_rotations[j], (*in.global_rotations)[j],
                                              grads != nullptr ? &g : nullptr);
      if (grads != nullptr) grads->global_rotations[j] += c_ang * s.glob_geo_rnd * a * g;
    } else {
      const double a = 1.0 / static_cast<double>(lookat_count);
      LookAtGradient g;
      l.lookat_det += a * lookat_error_regularized(e.position(), e.direction(), (*in.global_rotations)[j],
                                                   (*in.global_positions)[j], grads != nullptr ? &g : nullptr);
      if (grads != nullptr) {
        grads->global_rotations[j] += c_ang * s.lookat_det * a * g.rotation;
        grads->global_positions[j] += c_ang * s.lookat_det * a * g.position;
      }
    }
  }

  for (std::size_t j = 0; j < J; ++j) {
    const Vec3 g = truth_at(j);
    const Vec3 d_gpd = draft_at(j) - g;
    const Vec3 d_ikd = (*in.global_positions)[j] - g;
    l.gpd_l2_det += d_gpd.squaredNorm();
    l.ikd_l2_det += d_ikd.squaredNorm();
    Mat3 geo_grad;
    l.loc_geo_det += geodesic_distance(truth.local_rotations[j], (*in.local)[j], grads != nullptr ? &geo_grad : nullptr);
    if (grads != nullptr) {
      grads->draft.segment<3>(static_cast<Eigen::Index>(3 * j)) += c_pos * s.gpd_l2_det * 2.0 * d_gpd;
      grads->global_positions[j] += c_pos * s.ikd_l2_det * 2.0 * d_ikd;
      grads->local[j] += c_ang * s.loc_geo_det * geo_grad;
    }
  }
  l.total = combine_losses(l, config.w_pos, J, config.scales);
  check_finite(l);
  return l;
}

void check_item(const BatchItem& item, std::size_t J) {
  if (item.truth.positions.size() != J || item.truth.global_rotations.size() != J ||
      item.truth.local_rotations.size() != J) {
    throw ShapeError("ground truth does not match the joint count");
  }
  if (item.weights.size() != item.effectors.size()) throw ShapeError("one weight per effector is required");
}

}  // namespace

LossBreakdown compute_losses(const ForwardOutput& output, const BatchItem& item, const TrainConfig& config) {
  const std::size_t J = output.global.size();
  check_item(item, J);
  if (static_cast<std::size_t>(output.draft_positions.size()) != 3 * J || output.local_rotations.size() != J) {
    throw ShapeError("forward output does not match the joint count");
  }
  const Eigen::VectorXd draft = output.draft_world();
  LossInputs in;
  in.draft = draft.data();
  in.local = &output.local_rotations;
  in.global_rotations = &output.global.rotations;
  in.global_positions = &output.global.positions;
  in.truth = &item.truth;
  in.effectors = &item.effectors.effectors;
  in.weights = &item.weights;
  return item_losses(in, config, J, nullptr);
}

LossGraph build_loss_graph(ag::Tape& tape, const ForwardGraph& graph, std::span<const BatchItem> items,
                           std::span<const CenteredEffectorSet> inputs, const TrainConfig& config) {
  const auto& draft = tape.value(graph.draft);
  const auto& loc = tape.value(graph.local_rotations);
  const auto& grot = tape.value(graph.global_rotations);
  const auto& gpos = tape.value(graph.global_positions);
  const std::size_t B = items.size();
  if (static_cast<std::size_t>(draft.rows()) != B || inputs.size() != B) {
    throw ShapeError("loss batch does not match the forward batch");
  }
  const std::size_t J = static_cast<std::size_t>(gpos.cols() / 3);
  auto grad_draft = std::make_shared<ag::Matrix>(ag::Matrix::Zero(draft.rows(), draft.cols()));
  auto grad_loc = std::make_shared<ag::Matrix>(ag::Matrix::Zero(loc.rows(), loc.cols()));
  auto grad_grot = std::make_shared<ag::Matrix>(ag::Matrix::Zero(grot.rows(), grot.cols()));
  auto grad_gpos = std::make_shared<ag::Matrix>(ag::Matrix::Zero(gpos.rows(), gpos.cols()));

  LossGraph out;
  const double inv_b = 1.0 / static_cast<double>(B);
  std::vector<Mat3> local(J), rots(J);
  std::vector<Vec3> pos(J);
  for (std::size_t b = 0; b < B; ++b) {
    const auto row = static_cast<Eigen::Index>(b);
    check_item(items[b], J);
    for (std::size_t j = 0; j < J; ++j) {
      const auto c = static_cast<Eigen::Index>(j);
      local[j] = unpack_mat3(loc, row, 9 * c);
      rots[j] = unpack_mat3(grot, row, 9 * c);
      pos[j] = gpos.block<1, 3>(row, 3 * c).transpose();
    }
    const Eigen::VectorXd draft_row = draft.row(row).transpose();
    LossInputs in;
    in.draft = draft_row.data();
    in.local = &local;
    in.global_rotations = &rots;
    in.global_positions = &pos;
    in.truth = &items[b].truth;
    in.truth_offset = inputs[b].centroid;
    in.effectors = &inputs[b].effectors;
    in.weights = &items[b].weights;
    LossGradients g(J);
    LossBreakdown l = item_losses(in, config, J, &g);
    l *= inv_b;
    out.mean += l;
    grad_draft->row(row) = inv_b * g.draft.transpose();
    for (std::size_t j = 0; j < J; ++j) {
      const auto c = static_cast<Eigen::Index>(j);
      pack_mat3(*grad_loc, row, 9 * c, inv_b * g.local[j]);
      pack_mat3(*grad_grot, row, 9 * c, inv_b * g.global_rotations[j]);
      grad_gpos->block<1, 3>(row, 3 * c) = inv_b * g.global_positions[j].transpose();
    }
  }
  check_finite(out.mean);
  ag::Matrix value(1, 1);
  value(0, 0) = out.mean.total;
  const ForwardGraph& fg = graph;
  out.total = tape.custom({fg.draft, fg.local_rotations, fg.global_rotations, fg.global_positions}, std::move(value),
                          [fg, grad_draft, grad_loc, grad_grot, grad_gpos](ag::Tape& t, const ag::Matrix& g) {
                            const double s = g(0, 0);
                            t.accumulate(fg.draft, s * *grad_draft);
                            t.accumulate(fg.local_rotations, s * *grad_loc);
                            t.accumulate(fg.global_rotations, s * *grad_grot);
                            t.accumulate(fg.global_positions, s * *grad_gpos);
                          });
  return out;
}

GradientResult compute_gradients(const Model& model, std::span<const BatchItem> items, const TrainConfig& config,
                                 Rng* dropout_rng) {
  if (items.empty()) throw EmptyInput("empty batch");
  std::vector<CenteredEffectorSet> inputs;
  inputs.reserve(items.size());
  for (const auto& item : items) inputs.push_back(center_effectors(item.effectors));
  GradientResult result;
  result.gradients = zero_gradients(model.parameters());
  ag::Tape tape;
  BoundParameters params(tape, model.parameters(), &result.gradients);
  DropoutContext dropout;
  if (dropout_rng != nullptr) dropout = {model.config().dropout, dropout_rng};
  const ForwardGraph graph = build_forward_graph(model, params, inputs, dropout);
  LossGraph loss = build_loss_graph(tape, graph, items, inputs, config);
  tape.backward(loss.total);
  for (const auto& g : result.gradients) {
    if (!g.allFinite()) throw NumericalError("non-finite parameter gradient");
  }
  result.loss = loss.mean;
  return result;
}

OptimizerState make_optimizer_state(const ModelParameters& params) {
  return {zero_gradients(params), zero_gradients(params), 0};
}

void adam_update(ModelParameters& params, const Gradients& grads, OptimizerState& state, const TrainConfig& config) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw ShapeError("optimizer state does not match the parameters");
  }
  state.step += 1;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    m = b1 * m + (1.0 - b1) * grads[i];
    v = b2 * v + (1.0 - b2) * grads[i].cwiseAbs2();
    params[i].value.array() -=
        config.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + config.adam_epsilon);
  }
}

LossBreakdown training_step(Model& model, std::span<const BatchItem> items, OptimizerState& state,
                            const TrainConfig& config, Rng& rng) {
  GradientResult r = compute_gradients(model, items, config, &rng);
  adam_update(model.parameters(), r.gradients, state, config);
  return r.loss;
}

std::vector<BatchItem> sample_batch(const PoseDataset& dataset, const SkeletonSpec& skeleton, Rng& rng,
                                    const TrainConfig& config) {
  if (dataset.empty()) throw EmptyInput("training split is empty");
  const std::size_t max_n = std::min(config.max_effectors, skeleton.size() * kEffectorTypeCount);
  if (config.min_effectors > max_n) throw ConfigError("skeleton too small for the effector count range");
  std::uniform_int_distribution<std::size_t> count(config.min_effectors, max_n);
  std::uniform_int_distribution<std::size_t> frame(0, dataset.size() - 1);
  const std::size_t n = count(rng);
  std::vector<BatchItem> batch;
  batch.reserve(config.batch_size);
  for (std::size_t b = 0; b < config.batch_size; ++b) {
    batch.push_back(prepare_batch_item(dataset.frames[frame(rng)], skeleton, n, rng, config));
  }
  return batch;
}

namespace {

std::string rng_to_string(const Rng& rng) {
  std::ostringstream ss;
  ss << rng;
  return ss.str();
}

Rng rng_from_string(const std::string& s) {
  Rng rng;
  std::istringstream ss(s);
  ss >> rng;
  if (!ss) throw FormatError("corrupt generator state");
  return rng;
}

void truncate_log(const std::filesystem::path& path, std::size_t max_step) {
  if (!std::filesystem::exists(path)) return;
  std::ifstream in(path);
  std::vector<std::string> kept;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto doc = nlohmann::json::parse(line, nullptr, false);
    if (!doc.is_discarded() && doc.value("step", std::size_t{0}) <= max_step) kept.push_back(line);
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : kept) out << l << "\n";
}

}  // namespace

TrainResult train(Model& model, const PoseDataset& dataset, const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  if (dataset.empty()) throw EmptyInput("training split is empty");
  if (dataset.joint_count != model.skeleton().size()) throw ShapeError("dataset and model joint counts differ");
  std::filesystem::create_directories(options.output_dir);
  TrainResult result;
  result.checkpoint = options.output_dir / "model.prck";
  result.metrics_log = options.output_dir / "metrics.jsonl";
  const auto state_path = training_state_path(result.checkpoint);

  Rng rng(config.seed);
  OptimizerState opt = make_optimizer_state(model.parameters());
  std::size_t step = 0;
  double elapsed_before = 0.0;
  if (options.resume && std::filesystem::exists(state_path)) {
    TrainingState s = load_training_state(state_path);
    Model restored(model.config(), model.skeleton(), std::move(s.parameters));
    model = std::move(restored);
    if (s.optimizer.first_moment.size() != model.parameters().size()) {
      throw FormatError("training state does not match the model");
    }
    opt = std::move(s.optimizer);
    rng = rng_from_string(s.rng_state);
    step = s.step;
    elapsed_before = s.elapsed_seconds;
    truncate_log(result.metrics_log, step);
  } else {
    std::ofstream(result.metrics_log, std::ios::trunc);
  }

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return elapsed_before + std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  auto save = [&] {
    save_checkpoint(model, result.checkpoint);
    TrainingState s;
    s.parameters = model.parameters();
    s.optimizer = opt;
    s.rng_state = rng_to_string(rng);
    s.step = step;
    s.elapsed_seconds = elapsed();
    save_training_state(s, state_path);
  };

  std::ofstream log(result.metrics_log, std::ios::app);
  LossBreakdown window;
  std::size_t window_steps = 0;
  const std::size_t stop = std::min(config.epochs, options.max_steps.value_or(config.epochs));
  while (step < stop) {
    const auto batch = sample_batch(dataset, model.skeleton(), rng, config);
    result.last = training_step(model, batch, opt, config, rng);
    ++step;
    window += result.last;
    ++window_steps;
    if (step % config.log_interval == 0) {
      window *= 1.0 / static_cast<double>(window_steps);
      nlohmann::json row = {{"step", step}, {"wall_time", elapsed()}, {"loss", window.to_json()}};
      log << row.dump() << "\n" << std::flush;
      if (options.on_log) options.on_log(step, window);
      window = {};
      window_steps = 0;
    }
    if (step % config.checkpoint_interval == 0) save();
  }
  if (step % config.checkpoint_interval != 0 || step == 0) save();
  result.steps = step;
  return result;
}

void retain_freed_memory() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace protores

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

#include "protores/network.hpp"

#include <cmath>

#include "protores/error.hpp"

namespace protores {

using ag::Var;

std::string_view to_string(EncoderVariant variant) {
  return variant == EncoderVariant::Psa ? "psa" : "mcdc";
}

std::string_view to_string(Architecture architecture) {
  return architecture == Architecture::ProtoRes ? "protores" : "masked-fcr";
}

void ModelConfig::validate() const {
  if (width == 0) throw ConfigError("width must be positive");
  if (layers_per_block < 1) throw ConfigError("layers_per_block must be at least 1");
  if (encoder_blocks < 1) throw ConfigError("encoder_blocks must be at least 1");
  if (joint_count < 1) throw ConfigError("joint_count must be positive");
  if (architecture == Architecture::ProtoRes && embedding_dim == 0) {
    throw ConfigError("embedding_dim must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (architecture == Architecture::ProtoRes && embedding_width() != width) {
    // x_r subtracts the prototype from b_{r-1}, and MCDC pools b directly.
    if (encoder_variant == EncoderVariant::Mcdc || encoder_blocks > 1) {
      throw ConfigError("pose embedding width must equal the block width");
    }
  }
}

nlohmann::json ModelConfig::to_json() const {
  return {
      {"architecture", std::string(to_string(architecture))},
      {"width", width},
      {"encoder_blocks", encoder_blocks},
      {"gpd_blocks", gpd_blocks},
      {"ikd_blocks", ikd_blocks},
      {"layers_per_block", layers_per_block},
      {"embedding_dim", embedding_dim},
      {"dropout", dropout},
      {"encoder_variant", std::string(to_string(encoder_variant))},
      {"joint_count", joint_count},
      {"pose_embedding_width", pose_embedding_width},
  };
}

ModelConfig ModelConfig::from_json(const nlohmann::json& doc) {
  ModelConfig c;
  try {
    const auto arch = doc.value("architecture", std::string("protores"));
    if (arch == "protores") {
      c.architecture = Architecture::ProtoRes;
    } else if (arch == "masked-fcr") {
      c.architecture = Architecture::MaskedFcr;
    } else {
      throw ConfigError("unknown architecture '" + arch + "'");
    }
    c.width = doc.value("width", c.width);
    c.encoder_blocks = doc.value("encoder_blocks", c.encoder_blocks);
    c.gpd_blocks = doc.value("gpd_blocks", c.gpd_blocks);
    c.ikd_blocks = doc.value("ikd_blocks", c.ikd_blocks);
    c.layers_per_block = doc.value("layers_per_block", c.layers_per_block);
    c.embedding_dim = doc.value("embedding_dim", c.embedding_dim);
    c.dropout = doc.value("dropout", c.dropout);
    const auto variant = doc.value("encoder_variant", std::string("psa"));
    if (variant == "psa") {
      c.encoder_variant = EncoderVariant::Psa;
    } else if (variant == "mcdc") {
      c.encoder_variant = EncoderVariant::Mcdc;
    } else {
      throw ConfigError("unknown encoder variant '" + variant + "'");
    }
    c.joint_count = doc.value("joint_count", c.joint_count);
    c.pose_embedding_width = doc.value("pose_embedding_width", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model config: ") + e.what());
  }
  return c;
}

std::size_t ModelParameters::add(std::string name, Eigen::MatrixXd value) {
  if (find(name)) throw ConfigError("duplicate parameter '" + name + "'");
  tensors_.push_back({std::move(name), std::move(value)});
  return tensors_.size() - 1;
}

std::optional<std::size_t> ModelParameters::find(std::string_view name) const {
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t ModelParameters::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<std::size_t>(t.value.size());
  return n;
}

bool ModelParameters::all_finite() const {
  for (const auto& t : tensors_) {
    if (!t.value.allFinite()) return false;
  }
  return true;
}

Gradients zero_gradients(const ModelParameters& params) {
  Gradients g;
  g.reserve(params.size());
  for (const auto& t : params) g.push_back(Eigen::MatrixXd::Zero(t.value.rows(), t.value.cols()));
  return g;
}

BoundParameters::BoundParameters(ag::Tape& tape, const ModelParameters& params, Gradients* grads)
    : tape_(tape), params_(params), grads_(grads), bound_(params.size()) {
  if (grads_ != nullptr && grads_->size() != params.size()) {
    throw ShapeError("gradient store does not match the parameter count");
  }
}

Var BoundParameters::operator()(std::size_t index) {
  auto& slot = bound_.at(index);
  if (!slot) {
    slot = grads_ != nullptr ? tape_.parameter_ref(params_[index].value, &(*grads_)[index])
                             : tape_.constant_ref(params_[index].value);
  }
  return *slot;
}

namespace {

Var apply_dropout(ag::Tape& tape, Var v, const DropoutContext& dropout) {
  return dropout.active() ? tape.dropout(v, dropout.rate, *dropout.rng) : v;
}

Var apply_linear(BoundParameters& params, const LinearLayer& layer, Var x) {
  if (layer.bias) return params.tape().linear(x, params(layer.weight), params(*layer.bias));
  return params.tape().linear(x, params(layer.weight));
}

Eigen::MatrixXd uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
  }
  return m;
}

LinearLayer make_linear(ModelParameters& params, Rng& rng, const std::string& name, std::size_t in,
                        std::size_t out, bool bias) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  LinearLayer layer;
  layer.weight = params.add(name + ".weight", uniform_matrix(rng, out, in, bound));
  if (bias) layer.bias = params.add(name + ".bias", uniform_matrix(rng, out, 1, bound));
  return layer;
}

}  // namespace

BlockOutput residual_block_forward(BoundParameters& params, const ResidualBlock& block, Var x,
                                   const DropoutContext& dropout) {
  ag::Tape& tape = params.tape();
  Var h = x;
  for (const auto& layer : block.layers) {
    h = apply_dropout(tape, tape.relu(apply_linear(params, layer, h)), dropout);
  }
  Var b = tape.relu(tape.add(tape.linear(x, params(block.residual)), h));
  b = apply_dropout(tape, b, dropout);
  BlockOutput out{b, std::nullopt};
  if (block.forward) out.forward = tape.linear(h, params(*block.forward));
  return out;
}

Var encoder_forward_psa(BoundParameters& params, const std::vector<ResidualBlock>& blocks, Var x_in,
                        ag::Index group, const DropoutContext& dropout) {
  ag::Tape& tape = params.tape();
  if (tape.value(x_in).rows() == 0 || group <= 0) throw EmptyInput("encoder needs at least one effector");
  Var x = x_in;
  std::optional<Var> prototype;
  std::optional<Var> residual;
  for (std::size_t r = 0; r < blocks.size(); ++r) {
    if (r > 0) {
      // x_r = relu(b_{r-1} - p_{r-1} / (r - 1)), with r counted from 1.
      Var scaled = tape.scale(tape.repeat_rows(*prototype, group), 1.0 / static_cast<double>(r));
      x = tape.relu(tape.sub(*residual, scaled));
    }
    BlockOutput out = residual_block_forward(params, blocks[r], x, dropout);
    Var proto = tape.group_mean(*out.forward, group);
    prototype = prototype ? tape.add(*prototype, proto) : proto;
    residual = out.residual;
  }
  return *prototype;
}

Var encoder_forward_mcdc(BoundParameters& params, const std::vector<ResidualBlock>& blocks, Var x_in,
                         ag::Index group, const DropoutContext& dropout) {
  ag::Tape& tape = params.tape();
  if (tape.value(x_in).rows() == 0 || group <= 0) throw EmptyInput("encoder needs at least one effector");
  Var x = x_in;
  Var b = x_in;
  for (std::size_t r = 0; r < blocks.size(); ++r) {
    if (r > 0) {
      x = tape.concat_cols(b, tape.repeat_rows(tape.group_max(b, group), group));
    }
    b = residual_block_forward(params, blocks[r], x, dropout).residual;
  }
  return tape.group_max(b, group);
}

Var fcr_forward(BoundParameters& params, const FcrStack& stack, Var input, const DropoutContext& dropout) {
  ag::Tape& tape = params.tape();
  if (stack.blocks.empty()) {
    if (!stack.projection) throw ShapeError("FCR stack without blocks needs a projection");
    return apply_linear(params, *stack.projection, input);
  }
  Var b = input;
  std::optional<Var> f;
  for (const auto& block : stack.blocks) {
    BlockOutput out = residual_block_forward(params, block, b, dropout);
    f = f ? tape.add(*f, *out.forward) : *out.forward;
    b = out.residual;
  }
  return *f;
}

ResidualBlock make_residual_block(ModelParameters& params, Rng& rng, const std::string& prefix,
                                  std::size_t input_width, std::size_t width, std::size_t layers,
                                  std::optional<std::size_t> forward_width) {
  ResidualBlock block;
  for (std::size_t l = 0; l < layers; ++l) {
    block.layers.push_back(
        make_linear(params, rng, prefix + ".fc" + std::to_string(l + 1), l == 0 ? input_width : width, width, true));
  }
  block.residual = make_linear(params, rng, prefix + ".residual", input_width, width, false).weight;
  if (forward_width) {
    block.forward = make_linear(params, rng, prefix + ".forward", width, *forward_width, false).weight;
  }
  return block;
}

FcrStack make_fcr_stack(ModelParameters& params, Rng& rng, const std::string& prefix, std::size_t input_width,
                        std::size_t width, std::size_t blocks, std::size_t layers, std::size_t output_width) {
  FcrStack stack;
  if (blocks == 0) {
    stack.projection = make_linear(params, rng, prefix + ".projection", input_width, output_width, true);
    return stack;
  }
  for (std::size_t r = 0; r < blocks; ++r) {
    stack.blocks.push_back(make_residual_block(params, rng, prefix + "." + std::to_string(r),
                                               r == 0 ? input_width : width, width, layers, output_width));
  }
  return stack;
}

}  // namespace protores

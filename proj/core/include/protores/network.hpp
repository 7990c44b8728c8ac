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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "protores/autograd.hpp"

namespace protores {

enum class EncoderVariant { Psa, Mcdc };
enum class Architecture { ProtoRes, MaskedFcr };

std::string_view to_string(EncoderVariant variant);
std::string_view to_string(Architecture architecture);

struct ModelConfig {
  Architecture architecture = Architecture::ProtoRes;
  std::size_t width = 1024;              // d_h
  std::size_t encoder_blocks = 3;
  std::size_t gpd_blocks = 3;
  std::size_t ikd_blocks = 3;
  std::size_t layers_per_block = 3;      // L
  std::size_t embedding_dim = 32;        // d_e, joint and type embeddings
  double dropout = 0.01;
  EncoderVariant encoder_variant = EncoderVariant::Psa;
  std::size_t joint_count = 64;
  std::size_t pose_embedding_width = 0;  // E; 0 means "same as width"

  std::size_t embedding_width() const { return pose_embedding_width == 0 ? width : pose_embedding_width; }
  /// Width of one effector input row: 6D data, tolerance and two embeddings.
  std::size_t effector_input_width() const { return 7 + 2 * embedding_dim; }
  /// Width of the Masked-FCR slot vector: joints × types × (6D data + tolerance).
  std::size_t masked_input_width() const { return joint_count * 3 * 7; }

  /// Throws ConfigError when counts or widths are inconsistent.
  void validate() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& doc);

  bool operator==(const ModelConfig&) const = default;
};

struct Tensor {
  std::string name;
  Eigen::MatrixXd value;
};

/// Named, ordered learnable tensors.
class ModelParameters {
 public:
  std::size_t add(std::string name, Eigen::MatrixXd value);

  std::size_t size() const { return tensors_.size(); }
  Tensor& operator[](std::size_t i) { return tensors_[i]; }
  const Tensor& operator[](std::size_t i) const { return tensors_[i]; }
  std::vector<Tensor>::const_iterator begin() const { return tensors_.begin(); }
  std::vector<Tensor>::const_iterator end() const { return tensors_.end(); }

  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t scalar_count() const;
  bool all_finite() const;

 private:
  std::vector<Tensor> tensors_;
};

/// One gradient matrix per parameter tensor, same order and shapes.
using Gradients = std::vector<Eigen::MatrixXd>;
Gradients zero_gradients(const ModelParameters& params);

/// Indices into ModelParameters describing one dense layer.
struct LinearLayer {
  std::size_t weight = 0;
  std::optional<std::size_t> bias;
};

/// L fully connected layers with a linear residual projection and an optional
/// linear forward projection.
struct ResidualBlock {
  std::vector<LinearLayer> layers;
  std::size_t residual = 0;
  std::optional<std::size_t> forward;
};

/// Fully connected residual stack; with no blocks it is a single linear projection.
struct FcrStack {
  std::vector<ResidualBlock> blocks;
  std::optional<LinearLayer> projection;
};

/// Binds ModelParameters onto a tape on first use. Without a gradient store
/// the parameters are recorded as constants.
class BoundParameters {
 public:
  BoundParameters(ag::Tape& tape, const ModelParameters& params, Gradients* grads);

  ag::Var operator()(std::size_t index);
  ag::Tape& tape() { return tape_; }

 private:
  ag::Tape& tape_;
  const ModelParameters& params_;
  Gradients* grads_;
  std::vector<std::optional<ag::Var>> bound_;
};

/// Dropout applied after in-block activations when `rng` is set and rate > 0.
struct DropoutContext {
  double rate = 0.0;
  Rng* rng = nullptr;

  bool active() const { return rng != nullptr && rate > 0.0; }
};

struct BlockOutput {
  ag::Var residual;                // b
  std::optional<ag::Var> forward;  // f, absent when the block has no forward projection
};

/// h_1 = relu(W_1 x + a_1) ... h_L; b = relu(L·x + h_L); f = F·h_L.
BlockOutput residual_block_forward(BoundParameters& params, const ResidualBlock& block, ag::Var x,
                                   const DropoutContext& dropout);

/// Prototype-subtract-accumulate encoder over `group` effector rows per item.
/// Returns the pose embedding, one row per item.
ag::Var encoder_forward_psa(BoundParameters& params, const std::vector<ResidualBlock>& blocks, ag::Var x_in,
                            ag::Index group, const DropoutContext& dropout);

/// Maxpool-concat daisy chain encoder; block r >= 2 consumes [b_{r-1}, maxpool(b_{r-1})].
ag::Var encoder_forward_mcdc(BoundParameters& params, const std::vector<ResidualBlock>& blocks, ag::Var x_in,
                             ag::Index group, const DropoutContext& dropout);

/// FCR recursion b_r = relu(L_r b_{r-1} + h_{r,L}), f_r = f_{r-1} + F_r h_{r,L}, f_0 = 0.
ag::Var fcr_forward(BoundParameters& params, const FcrStack& stack, ag::Var input, const DropoutContext& dropout);

/// Creates parameters for a residual block with uniform(±1/√fan_in) init.
ResidualBlock make_residual_block(ModelParameters& params, Rng& rng, const std::string& prefix,
                                  std::size_t input_width, std::size_t width, std::size_t layers,
                                  std::optional<std::size_t> forward_width);

FcrStack make_fcr_stack(ModelParameters& params, Rng& rng, const std::string& prefix, std::size_t input_width,
                        std::size_t width, std::size_t blocks, std::size_t layers, std::size_t output_width);

}  // namespace protores

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

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "protores/effector.hpp"

namespace protores::ag {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Handle to a value recorded on a Tape.
struct Var {
  std::uint32_t id = 0;
};

/// Reverse-mode recorder over dense matrices. Rows are samples, columns are
/// features. Every op records its value eagerly; backward() replays the
/// recorded vector-Jacobian products in reverse order.
class Tape {
 public:
  /// Backward rule: receives the gradient of the op output and accumulates into inputs.
  using BackwardFn = std::function<void(Tape& tape, const Matrix& grad_out)>;

  Var constant(Matrix value);

  /// Leaf whose gradient is added into `*grad_sink` by backward(); a null sink
  /// still records the gradient (readable through grad()).
  Var parameter(const Matrix& value, Matrix* grad_sink);

  /// Like constant()/parameter() but without copying; `value` must outlive the tape
  /// and stay unmodified while it is in use.
  Var constant_ref(const Matrix& value);
  Var parameter_ref(const Matrix& value, Matrix* grad_sink);

  const Matrix& value(Var v) const {
    const Node& n = nodes_[v.id];
    return n.external != nullptr ? *n.external : n.value;
  }

  /// Gradient after backward(); zero-sized when nothing flowed into `v`.
  const Matrix& grad(Var v) const { return nodes_[v.id].grad; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// x·Wᵀ (+ b), with W stored out × in and b stored out × 1.
  Var linear(Var x, Var weight, std::optional<Var> bias = std::nullopt);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double factor);
  Var relu(Var a);
  /// Inverted dropout; identity when rate == 0.
  Var dropout(Var a, double rate, Rng& rng);
  Var concat_cols(Var a, Var b);
  Var slice_cols(Var a, Index start, Index count);
  Var add_constant(Var a, const Matrix& offset);

  /// Mean over consecutive row groups of size `group`: (B·group) × D -> B × D.
  Var group_mean(Var x, Index group);
  /// Max over consecutive row groups, gradient routed to the first argmax.
  Var group_max(Var x, Index group);
  /// Repeats each row `group` times: B × D -> (B·group) × D.
  Var repeat_rows(Var x, Index group);
  /// Row lookup into an embedding table.
  Var gather_rows(Var table, std::vector<Index> rows);
  /// base ∘ (1 - mask) + values ∘ mask, with a row-broadcast 1 × D base.
  Var masked_fill(Var base_row, Index rows, Matrix values, Matrix mask);

  /// Records an op with a caller-supplied backward rule.
  Var custom(std::vector<Var> inputs, Matrix value, BackwardFn backward);

  /// Adds `grad` into the gradient of `v`.
  void accumulate(Var v, const Matrix& grad);

  /// Seeds d(out)/d(out) = 1 for a 1 × 1 output and runs the recorded rules.
  void backward(Var out);

  std::size_t size() const { return nodes_.size(); }

  /// Hash of every relu activation pattern and group_max winner recorded so far.
  /// Two tapes with equal signatures evaluated the same smooth piece of the graph.
  std::uint64_t activation_signature() const { return signature_; }

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    BackwardFn backward;
    Matrix* sink = nullptr;
    bool requires_grad = false;
  };

  Var push(Matrix value, bool requires_grad, BackwardFn backward);
  bool any_requires_grad(std::initializer_list<Var> vars) const;
  void mix_signature(std::uint64_t word);

  std::vector<Node> nodes_;
  std::uint64_t signature_ = 0xcbf29ce484222325ull;
};

}  // namespace protores::ag

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


#include <gtest/gtest.h>

#include <functional>

#include "fixtures.hpp"
#include "protores/autograd.hpp"

namespace protores::ag {
namespace {

using Builder = std::function<Var(Tape&, std::vector<Var>&)>;

Matrix random_matrix(Rng& rng, Index rows, Index cols, double margin = 0.0) {
  std::normal_distribution<double> n;
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) {
    double v = n(rng);
    // keep entries clear of relu kinks when asked
    if (margin > 0 && std::abs(v) < margin) v = v < 0 ? v - margin : v + margin;
    m.data()[i] = v;
  }
  return m;
}

/// Scalar <out, W> so that a single backward seeds an arbitrary output cotangent.
Var weighted_sum(Tape& t, Var out, const Matrix& w) {
  Matrix value(1, 1);
  value(0, 0) = (t.value(out).array() * w.array()).sum();
  return t.custom({out}, value, [out, w](Tape& tape, const Matrix& g) { tape.accumulate(out, g(0, 0) * w); });
}

/// Compares backward() against central differences for every input entry.
void check_op(std::vector<Matrix> inputs, const Builder& build, std::uint64_t seed) {
  Rng rng(seed);
  Matrix w;
  auto evaluate = [&](bool with_grad, std::vector<Matrix>* grads) {
    Tape t;
    std::vector<Var> vars;
    if (grads) grads->assign(inputs.size(), Matrix());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (grads) (*grads)[i] = Matrix::Zero(inputs[i].rows(), inputs[i].cols());
      vars.push_back(t.parameter(inputs[i], grads ? &(*grads)[i] : nullptr));
    }
    const Var out = build(t, vars);
    if (w.size() == 0) w = random_matrix(rng, t.value(out).rows(), t.value(out).cols());
    const Var loss = weighted_sum(t, out, w);
    if (with_grad) t.backward(loss);
    return t.value(loss)(0, 0);
  };
  std::vector<Matrix> analytic;
  evaluate(true, &analytic);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (Index k = 0; k < inputs[i].size(); ++k) {
      const double numeric =
          testing::central_difference([&] { return evaluate(false, nullptr); }, inputs[i].data()[k], 1e-6);
      EXPECT_LT(testing::relative_error(analytic[i].data()[k], numeric), 1e-6) << "input " << i << " entry " << k;
    }
  }
}

TEST(Autograd, Linear) {
  Rng rng(1);
  check_op({random_matrix(rng, 4, 3), random_matrix(rng, 5, 3), random_matrix(rng, 5, 1)},
           [](Tape& t, std::vector<Var>& v) { return t.linear(v[0], v[1], v[2]); }, 1);
  const Matrix x = random_matrix(rng, 4, 3), W = random_matrix(rng, 5, 3), b = random_matrix(rng, 5, 1);
  Tape t;
  const Var y = t.linear(t.constant(x), t.constant(W), t.constant(b));
  EXPECT_LT((t.value(y) - ((x * W.transpose()).rowwise() + Eigen::RowVectorXd(b.transpose()))).norm(), 1e-12);
}

TEST(Autograd, ElementwiseOps) {
  Rng rng(2);
  const Matrix a = random_matrix(rng, 3, 4, 0.05), b = random_matrix(rng, 3, 4);
  check_op({a, b}, [](Tape& t, std::vector<Var>& v) { return t.add(v[0], v[1]); }, 2);
  check_op({a, b}, [](Tape& t, std::vector<Var>& v) { return t.sub(v[0], v[1]); }, 3);
  check_op({a}, [](Tape& t, std::vector<Var>& v) { return t.scale(v[0], -2.5); }, 4);
  check_op({a}, [](Tape& t, std::vector<Var>& v) { return t.relu(v[0]); }, 5);
  check_op({a}, [&](Tape& t, std::vector<Var>& v) { return t.add_constant(v[0], b); }, 6);
}

TEST(Autograd, Reshaping) {
  Rng rng(3);
  const Matrix a = random_matrix(rng, 6, 4), b = random_matrix(rng, 6, 2), p = random_matrix(rng, 2, 4);
  check_op({a, b}, [](Tape& t, std::vector<Var>& v) { return t.concat_cols(v[0], v[1]); }, 7);
  check_op({a}, [](Tape& t, std::vector<Var>& v) { return t.slice_cols(v[0], 1, 2); }, 8);
  check_op({a}, [](Tape& t, std::vector<Var>& v) { return t.group_mean(v[0], 3); }, 9);
  check_op({a}, [](Tape& t, std::vector<Var>& v) { return t.group_max(v[0], 2); }, 10);
  check_op({p}, [](Tape& t, std::vector<Var>& v) { return t.repeat_rows(v[0], 3); }, 11);
  check_op({a}, [](Tape& t, std::vector<Var>& v) { return t.gather_rows(v[0], {5, 0, 5, 2}); }, 12);
}

TEST(Autograd, MaskedFill) {
  Rng rng(4);
  const Matrix base = random_matrix(rng, 1, 5);
  Matrix values = random_matrix(rng, 3, 5), mask = Matrix::Zero(3, 5);
  mask(0, 1) = mask(2, 4) = mask(1, 0) = 1.0;
  check_op({base}, [&](Tape& t, std::vector<Var>& v) { return t.masked_fill(v[0], 3, values, mask); }, 13);
  Tape t;
  const Matrix out = t.value(t.masked_fill(t.constant(base), 3, values, mask));
  EXPECT_EQ(out(0, 1), values(0, 1));
  EXPECT_EQ(out(0, 2), base(0, 2));
  EXPECT_EQ(out(2, 4), values(2, 4));
}

TEST(Autograd, GroupMaxRoutesToFirstArgmax) {
  Tape t;
  Matrix x(4, 1);
  x << 1.0, 3.0, 3.0, 2.0;
  Matrix g = Matrix::Zero(4, 1);
  const Var v = t.parameter(x, &g);
  const Var m = t.group_max(v, 4);
  EXPECT_EQ(t.value(m)(0, 0), 3.0);
  t.backward(weighted_sum(t, m, Matrix::Ones(1, 1)));
  EXPECT_EQ(g(1, 0), 1.0);
  EXPECT_EQ(g(2, 0), 0.0);
}

TEST(Autograd, DropoutIsInvertedAndIdentityAtZero) {
  Rng rng(5);
  const Matrix a = Matrix::Ones(200, 50);
  Tape t;
  Rng drop(6);
  EXPECT_EQ(t.value(t.dropout(t.constant(a), 0.0, drop)), a);
  const Matrix out = t.value(t.dropout(t.constant(a), 0.2, drop));
  EXPECT_NEAR(out.mean(), 1.0, 0.03);
  for (Index i = 0; i < out.size(); ++i) {
    EXPECT_TRUE(out.data()[i] == 0.0 || std::abs(out.data()[i] - 1.25) < 1e-12);
  }
}

TEST(Autograd, GradientsAccumulateAcrossUses) {
  Tape t;
  Matrix g = Matrix::Zero(1, 1);
  const Var x = t.parameter(Matrix::Constant(1, 1, 2.0), &g);
  const Var y = t.add(t.scale(x, 3.0), x);
  t.backward(weighted_sum(t, y, Matrix::Ones(1, 1)));
  EXPECT_EQ(g(0, 0), 4.0);
  EXPECT_EQ(t.grad(x)(0, 0), 4.0);
}

TEST(Autograd, ConstantsReceiveNoGradient) {
  Tape t;
  const Var c = t.constant(Matrix::Ones(2, 2));
  const Var y = t.scale(c, 2.0);
  EXPECT_FALSE(t.requires_grad(y));
  t.backward(weighted_sum(t, y, Matrix::Ones(2, 2)));
  EXPECT_EQ(t.grad(c).size(), 0);
}

TEST(Autograd, SignatureTracksActivationPattern) {
  auto signature = [](double v) {
    Tape t;
    t.relu(t.constant(Matrix::Constant(1, 3, v)));
    return t.activation_signature();
  };
  EXPECT_EQ(signature(0.5), signature(0.7));
  EXPECT_NE(signature(0.5), signature(-0.5));
}

}  // namespace
}  // namespace protores::ag

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

#include "protores/autograd.hpp"

#include <string>

#include "protores/error.hpp"

namespace protores::ag {

namespace {

void check(bool ok, const char* op, const std::string& detail) {
  if (!ok) throw ShapeError(std::string(op) + ": " + detail);
}

std::string dims(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

}  // namespace

Var Tape::push(Matrix value, bool requires_grad, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

bool Tape::any_requires_grad(std::initializer_list<Var> vars) const {
  for (Var v : vars) {
    if (nodes_[v.id].requires_grad) return true;
  }
  return false;
}

void Tape::accumulate(Var v, const Matrix& grad) {
  Node& node = nodes_[v.id];
  if (!node.requires_grad) return;
  if (node.grad.size() == 0) {
    node.grad = grad;
  } else {
    node.grad += grad;
  }
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::parameter(const Matrix& value, Matrix* grad_sink) {
  Var v = push(value, true, nullptr);
  nodes_[v.id].sink = grad_sink;
  return v;
}

Var Tape::constant_ref(const Matrix& value) {
  Var v = push(Matrix(), false, nullptr);
  nodes_[v.id].external = &value;
  return v;
}

Var Tape::parameter_ref(const Matrix& value, Matrix* grad_sink) {
  Var v = push(Matrix(), true, nullptr);
  nodes_[v.id].external = &value;
  nodes_[v.id].sink = grad_sink;
  return v;
}

Var Tape::linear(Var x, Var weight, std::optional<Var> bias) {
  const Matrix& xv = value(x);
  const Matrix& wv = value(weight);
  check(xv.cols() == wv.cols(), "linear", "input " + dims(xv) + " vs weight " + dims(wv));
  Matrix out = xv * wv.transpose();
  if (bias) {
    const Matrix& bv = value(*bias);
    check(bv.rows() == wv.rows() && bv.cols() == 1, "linear", "bias " + dims(bv));
    out.rowwise() += bv.col(0).transpose();
  }
  const bool rg = any_requires_grad({x, weight}) || (bias && requires_grad(*bias));
  return push(std::move(out), rg, [x, weight, bias](Tape& t, const Matrix& g) {
    if (t.requires_grad(x)) t.accumulate(x, g * t.value(weight));
    if (t.requires_grad(weight)) t.accumulate(weight, g.transpose() * t.value(x));
    if (bias && t.requires_grad(*bias)) t.accumulate(*bias, g.colwise().sum().transpose());
  });
}

Var Tape::add(Var a, Var b) {
  check(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "add",
        dims(value(a)) + " vs " + dims(value(b)));
  return push(value(a) + value(b), any_requires_grad({a, b}), [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var Tape::sub(Var a, Var b) {
  check(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "sub",
        dims(value(a)) + " vs " + dims(value(b)));
  return push(value(a) - value(b), any_requires_grad({a, b}), [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.requires_grad(b)) t.accumulate(b, -g);
  });
}

Var Tape::scale(Var a, double factor) {
  return push(value(a) * factor, requires_grad(a),
              [a, factor](Tape& t, const Matrix& g) { t.accumulate(a, g * factor); });
}

void Tape::mix_signature(std::uint64_t word) {
  for (int i = 0; i < 8; ++i) {
    signature_ ^= (word >> (8 * i)) & 0xffu;
    signature_ *= 0x100000001b3ull;
  }
}

Var Tape::relu(Var a) {
  Matrix out = value(a).cwiseMax(0.0);
  std::uint64_t active = 0;
  const Matrix& av = value(a);
  for (Index i = 0; i < av.size(); ++i) {
    active = (active << 1) | (av.data()[i] > 0.0 ? 1u : 0u);
    if ((i & 63) == 63) {
      mix_signature(active);
      active = 0;
    }
  }
  mix_signature(active);
  return push(std::move(out), requires_grad(a), [a](Tape& t, const Matrix& g) {
    t.accumulate(a, (t.value(a).array() > 0.0).select(g, 0.0));
  });
}

Var Tape::dropout(Var a, double rate, Rng& rng) {
  if (rate <= 0.0) return a;
  const Matrix& av = value(a);
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix mask(av.rows(), av.cols());
  const double scale = 1.0 / (1.0 - rate);
  for (Index j = 0; j < mask.cols(); ++j) {
    for (Index i = 0; i < mask.rows(); ++i) {
      mask(i, j) = keep(rng) ? scale : 0.0;
    }
  }
  Matrix out = av.cwiseProduct(mask);
  return push(std::move(out), requires_grad(a),
              [a, mask = std::move(mask)](Tape& t, const Matrix& g) { t.accumulate(a, g.cwiseProduct(mask)); });
}

Var Tape::concat_cols(Var a, Var b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  check(av.rows() == bv.rows(), "concat_cols", dims(av) + " vs " + dims(bv));
  Matrix out(av.rows(), av.cols() + bv.cols());
  out << av, bv;
  const Index split = av.cols();
  return push(std::move(out), any_requires_grad({a, b}), [a, b, split](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g.leftCols(split));
    if (t.requires_grad(b)) t.accumulate(b, g.rightCols(g.cols() - split));
  });
}

Var Tape::slice_cols(Var a, Index start, Index count) {
  const Matrix& av = value(a);
  check(start >= 0 && count >= 0 && start + count <= av.cols(), "slice_cols", "range outside " + dims(av));
  Matrix out = av.middleCols(start, count);
  const Index total = av.cols();
  return push(std::move(out), requires_grad(a), [a, start, count, total](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(g.rows(), total);
    full.middleCols(start, count) = g;
    t.accumulate(a, full);
  });
}

Var Tape::add_constant(Var a, const Matrix& offset) {
  check(value(a).rows() == offset.rows() && value(a).cols() == offset.cols(), "add_constant",
        dims(value(a)) + " vs " + dims(offset));
  return push(value(a) + offset, requires_grad(a), [a](Tape& t, const Matrix& g) { t.accumulate(a, g); });
}

Var Tape::group_mean(Var x, Index group) {
  const Matrix& xv = value(x);
  check(group > 0 && xv.rows() % group == 0, "group_mean", dims(xv) + " not divisible into groups");
  const Index batch = xv.rows() / group;
  Matrix out(batch, xv.cols());
  for (Index b = 0; b < batch; ++b) {
    out.row(b) = xv.middleRows(b * group, group).colwise().mean();
  }
  return push(std::move(out), requires_grad(x), [x, group, batch](Tape& t, const Matrix& g) {
    Matrix gx(batch * group, g.cols());
    for (Index b = 0; b < batch; ++b) {
      gx.middleRows(b * group, group) = g.row(b).replicate(group, 1) / static_cast<double>(group);
    }
    t.accumulate(x, gx);
  });
}

Var Tape::group_max(Var x, Index group) {
  const Matrix& xv = value(x);
  check(group > 0 && xv.rows() % group == 0, "group_max", dims(xv) + " not divisible into groups");
  const Index batch = xv.rows() / group;
  Matrix out(batch, xv.cols());
  std::vector<Index> argmax(static_cast<std::size_t>(batch * xv.cols()));
  for (Index b = 0; b < batch; ++b) {
    for (Index c = 0; c < xv.cols(); ++c) {
      Index best = b * group;
      for (Index r = b * group + 1; r < (b + 1) * group; ++r) {
        if (xv(r, c) > xv(best, c)) best = r;
      }
      out(b, c) = xv(best, c);
      argmax[static_cast<std::size_t>(b * xv.cols() + c)] = best;
      mix_signature(static_cast<std::uint64_t>(best));
    }
  }
  const Index rows = xv.rows();
  return push(std::move(out), requires_grad(x), [x, rows, argmax = std::move(argmax)](Tape& t, const Matrix& g) {
    Matrix gx = Matrix::Zero(rows, g.cols());
    for (Index b = 0; b < g.rows(); ++b) {
      for (Index c = 0; c < g.cols(); ++c) {
        gx(argmax[static_cast<std::size_t>(b * g.cols() + c)], c) += g(b, c);
      }
    }
    t.accumulate(x, gx);
  });
}

Var Tape::repeat_rows(Var x, Index group) {
  const Matrix& xv = value(x);
  Matrix out(xv.rows() * group, xv.cols());
  for (Index b = 0; b < xv.rows(); ++b) {
    out.middleRows(b * group, group) = xv.row(b).replicate(group, 1);
  }
  return push(std::move(out), requires_grad(x), [x, group](Tape& t, const Matrix& g) {
    const Index batch = g.rows() / group;
    Matrix gx(batch, g.cols());
    for (Index b = 0; b < batch; ++b) {
      gx.row(b) = g.middleRows(b * group, group).colwise().sum();
    }
    t.accumulate(x, gx);
  });
}

Var Tape::gather_rows(Var table, std::vector<Index> rows) {
  const Matrix& tv = value(table);
  Matrix out(static_cast<Index>(rows.size()), tv.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    check(rows[i] >= 0 && rows[i] < tv.rows(), "gather_rows", "row " + std::to_string(rows[i]) + " outside " + dims(tv));
    out.row(static_cast<Index>(i)) = tv.row(rows[i]);
  }
  const Index table_rows = tv.rows();
  return push(std::move(out), requires_grad(table),
              [table, table_rows, rows = std::move(rows)](Tape& t, const Matrix& g) {
                Matrix gt = Matrix::Zero(table_rows, g.cols());
                for (std::size_t i = 0; i < rows.size(); ++i) {
                  gt.row(rows[i]) += g.row(static_cast<Index>(i));
                }
                t.accumulate(table, gt);
              });
}

Var Tape::masked_fill(Var base_row, Index rows, Matrix values, Matrix mask) {
  const Matrix& bv = value(base_row);
  check(bv.rows() == 1 && values.cols() == bv.cols() && mask.cols() == bv.cols() && values.rows() == rows &&
            mask.rows() == rows,
        "masked_fill", "base " + dims(bv) + ", values " + dims(values) + ", mask " + dims(mask));
  Matrix out = bv.replicate(rows, 1).cwiseProduct((1.0 - mask.array()).matrix()) + values.cwiseProduct(mask);
  return push(std::move(out), requires_grad(base_row), [base_row, mask = std::move(mask)](Tape& t, const Matrix& g) {
    t.accumulate(base_row, g.cwiseProduct((1.0 - mask.array()).matrix()).colwise().sum());
  });
}

Var Tape::custom(std::vector<Var> inputs, Matrix value, BackwardFn backward) {
  bool rg = false;
  for (Var v : inputs) rg = rg || requires_grad(v);
  return push(std::move(value), rg, std::move(backward));
}

void Tape::backward(Var out) {
  Node& root = nodes_[out.id];
  const Matrix& root_value = value(out);
  if (root_value.rows() != 1 || root_value.cols() != 1) {
    throw ShapeError("backward: output must be 1x1, got " + dims(root_value));
  }
  if (!root.requires_grad) return;
  root.grad = Matrix::Ones(1, 1);
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || node.grad.size() == 0) continue;
    if (node.backward) {
      // Rules only write to earlier nodes, so node.grad stays stable here.
      node.backward(*this, node.grad);
    }
    if (node.sink != nullptr) {
      if (node.sink->size() == 0) {
        *node.sink = node.grad;
      } else {
        *node.sink += node.grad;
      }
    }
  }
}

}  // namespace protores::ag

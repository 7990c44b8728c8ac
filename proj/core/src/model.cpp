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

#include "protores/model.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <random>

#include "protores/error.hpp"

namespace protores {

using ag::Index;
using ag::Matrix;
using ag::Var;

namespace {

struct Built {
  ModelLayout layout;
  ModelParameters params;
};

Matrix normal_matrix(Rng& rng, std::size_t rows, std::size_t cols, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
  }
  return m;
}

Built build(const ModelConfig& c, Rng& rng) {
  c.validate();
  Built out;
  auto& p = out.params;
  auto& l = out.layout;
  const std::size_t J = c.joint_count;
  const std::size_t E = c.embedding_width();
  if (c.architecture == Architecture::ProtoRes) {
    const double stddev = 1.0 / std::sqrt(static_cast<double>(c.embedding_dim));
    l.joint_embedding = p.add("embedding.joint", normal_matrix(rng, J, c.embedding_dim, stddev));
    l.type_embedding = p.add("embedding.type", normal_matrix(rng, kEffectorTypeCount, c.embedding_dim, stddev));
    for (std::size_t r = 0; r < c.encoder_blocks; ++r) {
      std::size_t in = r == 0 ? c.effector_input_width() : c.width;
      if (c.encoder_variant == EncoderVariant::Mcdc && r > 0) in = 2 * c.width;
      std::optional<std::size_t> fwd;
      if (c.encoder_variant == EncoderVariant::Psa) fwd = E;
      l.encoder.push_back(make_residual_block(p, rng, "encoder." + std::to_string(r), in, c.width,
                                              c.layers_per_block, fwd));
    }
  } else {
    l.placeholders = p.add("masked.placeholders", Matrix::Zero(1, static_cast<Index>(c.masked_input_width())));
    l.slot_encoder = make_fcr_stack(p, rng, "masked.encoder", c.masked_input_width(), c.width, c.encoder_blocks,
                                    c.layers_per_block, E);
  }
  l.gpd = make_fcr_stack(p, rng, "gpd", E, c.width, c.gpd_blocks, c.layers_per_block, 3 * J);
  l.ikd = make_fcr_stack(p, rng, "ikd", E + 3 * J, c.width, c.ikd_blocks, c.layers_per_block, 6 * J);
  return out;
}

void check_skeleton(const ModelConfig& config, const SkeletonSpec& skeleton) {
  if (skeleton.size() != config.joint_count) {
    throw ConfigError("model expects " + std::to_string(config.joint_count) + " joints, skeleton has " +
                      std::to_string(skeleton.size()));
  }
}

}  // namespace

Model::Model(ModelConfig config, SkeletonSpec skeleton, std::uint64_t seed)
    : config_(std::move(config)), skeleton_(std::move(skeleton)) {
  check_skeleton(config_, skeleton_);
  Rng rng(seed);
  Built b = build(config_, rng);
  layout_ = std::move(b.layout);
  params_ = std::move(b.params);
}

Model::Model(ModelConfig config, SkeletonSpec skeleton, ModelParameters params)
    : config_(std::move(config)), skeleton_(std::move(skeleton)) {
  check_skeleton(config_, skeleton_);
  Rng rng(0);
  Built b = build(config_, rng);
  if (b.params.size() != params.size()) {
    throw ShapeError("expected " + std::to_string(b.params.size()) + " parameter tensors, got " +
                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& want = b.params[i];
    const auto& got = params[i];
    if (want.name != got.name || want.value.rows() != got.value.rows() || want.value.cols() != got.value.cols()) {
      throw ShapeError("parameter " + std::to_string(i) + " is '" + got.name + "' " +
                       std::to_string(got.value.rows()) + "x" + std::to_string(got.value.cols()) + ", expected '" +
                       want.name + "' " + std::to_string(want.value.rows()) + "x" +
                       std::to_string(want.value.cols()));
    }
  }
  layout_ = std::move(b.layout);
  params_ = std::move(params);
}

Mat3 unpack_mat3(const Matrix& m, Index row, Index col) {
  Mat3 r;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) r(a, b) = m(row, col + 3 * a + b);
  }
  return r;
}

void pack_mat3(Matrix& m, Index row, Index col, const Mat3& r) {
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) m(row, col + 3 * a + b) = r(a, b);
  }
}

Var rotation6d_op(ag::Tape& tape, Var rotations6d) {
  const Matrix& in = tape.value(rotations6d);
  if (in.cols() % 6 != 0) throw ShapeError("6D input width must be a multiple of 6");
  const Index joints = in.cols() / 6;
  Matrix out(in.rows(), 9 * joints);
  for (Index i = 0; i < in.rows(); ++i) {
    for (Index j = 0; j < joints; ++j) {
      const Vec6 r6 = in.block<1, 6>(i, 6 * j).transpose();
      pack_mat3(out, i, 9 * j, rotation6d_to_matrix_regularized(r6));
    }
  }
  return tape.custom({rotations6d}, std::move(out), [rotations6d, joints](ag::Tape& t, const Matrix& g) {
    const Matrix& in6 = t.value(rotations6d);
    Matrix grad(in6.rows(), in6.cols());
    for (Index i = 0; i < in6.rows(); ++i) {
      for (Index j = 0; j < joints; ++j) {
        const Vec6 r6 = in6.block<1, 6>(i, 6 * j).transpose();
        grad.block<1, 6>(i, 6 * j) = rotation6d_to_matrix_vjp(r6, unpack_mat3(g, i, 9 * j)).transpose();
      }
    }
    t.accumulate(rotations6d, grad);
  });
}

Var forward_kinematics_op(ag::Tape& tape, const SkeletonSpec& skeleton, Var local_rotations, Var root_positions) {
  const Matrix& locals = tape.value(local_rotations);
  const Matrix& roots = tape.value(root_positions);
  const Index J = static_cast<Index>(skeleton.size());
  if (locals.cols() != 9 * J || roots.cols() != 3 || roots.rows() != locals.rows()) {
    throw ShapeError("forward kinematics op: inconsistent input shapes");
  }
  const Index B = locals.rows();
  auto globals = std::make_shared<std::vector<GlobalTransforms>>(static_cast<std::size_t>(B));
  Matrix out(B, 12 * J);
  std::vector<Mat3> rots(static_cast<std::size_t>(J));
  for (Index i = 0; i < B; ++i) {
    for (Index j = 0; j < J; ++j) rots[static_cast<std::size_t>(j)] = unpack_mat3(locals, i, 9 * j);
    auto& gt = (*globals)[static_cast<std::size_t>(i)];
    gt = forward_kinematics(skeleton, roots.row(i).transpose(), rots);
    for (Index j = 0; j < J; ++j) {
      pack_mat3(out, i, 9 * j, gt.rotations[static_cast<std::size_t>(j)]);
      out.block<1, 3>(i, 9 * J + 3 * j) = gt.positions[static_cast<std::size_t>(j)].transpose();
    }
  }
  return tape.custom(
      {local_rotations, root_positions}, std::move(out),
      [&skeleton, local_rotations, root_positions, globals, J](ag::Tape& t, const Matrix& g) {
        const Matrix& loc = t.value(local_rotations);
        const Index rows = loc.rows();
        Matrix grad_local(rows, 9 * J);
        Matrix grad_root(rows, 3);
        const auto n = static_cast<std::size_t>(J);
        std::vector<Mat3> local(n), g_rot(n), g_local(n);
        std::vector<Vec3> g_pos(n);
        for (Index i = 0; i < rows; ++i) {
          for (Index j = 0; j < J; ++j) {
            const auto k = static_cast<std::size_t>(j);
            local[k] = unpack_mat3(loc, i, 9 * j);
            g_rot[k] = unpack_mat3(g, i, 9 * j);
            g_pos[k] = g.block<1, 3>(i, 9 * J + 3 * j).transpose();
          }
          Vec3 g_root;
          forward_kinematics_vjp(skeleton, local, (*globals)[static_cast<std::size_t>(i)], g_rot, g_pos, g_root,
                                 g_local);
          for (Index j = 0; j < J; ++j) pack_mat3(grad_local, i, 9 * j, g_local[static_cast<std::size_t>(j)]);
          grad_root.row(i) = g_root.transpose();
        }
        t.accumulate(local_rotations, grad_local);
        t.accumulate(root_positions, grad_root);
      });
}

namespace {

Var encode_protores(const Model& model, BoundParameters& params, std::span<const CenteredEffectorSet> items,
                    const DropoutContext& dropout) {
  ag::Tape& tape = params.tape();
  const auto& layout = model.layout();
  const std::size_t n = items.front().effectors.size();
  if (n == 0) throw EmptyInput("effector set is empty");
  const Index rows = static_cast<Index>(items.size() * n);
  Matrix data(rows, static_cast<Index>(kEffectorDataWidth));
  std::vector<Index> joint_ids;
  std::vector<Index> type_ids;
  joint_ids.reserve(static_cast<std::size_t>(rows));
  type_ids.reserve(static_cast<std::size_t>(rows));
  Index row = 0;
  for (const auto& item : items) {
    if (item.effectors.size() != n) throw ShapeError("batched items must share one effector count");
    for (const auto& e : item.effectors) {
      if (e.joint >= model.config().joint_count) throw ShapeError("effector joint id out of range");
      data.block<1, 6>(row, 0) = e.data.transpose();
      data(row, 6) = e.tolerance;
      joint_ids.push_back(static_cast<Index>(e.joint));
      type_ids.push_back(static_cast<Index>(e.type));
      ++row;
    }
  }
  Var x = tape.concat_cols(tape.constant(std::move(data)),
                           tape.concat_cols(tape.gather_rows(params(*layout.joint_embedding), std::move(joint_ids)),
                                            tape.gather_rows(params(*layout.type_embedding), std::move(type_ids))));
  const auto group = static_cast<Index>(n);
  return model.config().encoder_variant == EncoderVariant::Psa
             ? encoder_forward_psa(params, layout.encoder, x, group, dropout)
             : encoder_forward_mcdc(params, layout.encoder, x, group, dropout);
}

Var encode_masked(const Model& model, BoundParameters& params, std::span<const CenteredEffectorSet> items,
                  const DropoutContext& dropout) {
  ag::Tape& tape = params.tape();
  const auto& config = model.config();
  const Index B = static_cast<Index>(items.size());
  const Index width = static_cast<Index>(config.masked_input_width());
  Matrix values = Matrix::Zero(B, width);
  Matrix mask = Matrix::Zero(B, width);
  for (Index i = 0; i < B; ++i) {
    for (const auto& e : items[static_cast<std::size_t>(i)].effectors) {
      if (e.joint >= config.joint_count) throw ShapeError("effector joint id out of range");
      const Index col = static_cast<Index>((e.joint * kEffectorTypeCount + static_cast<std::size_t>(e.type)) * 7);
      values.block<1, 6>(i, col) = e.data.transpose();
      values(i, col + 6) = e.tolerance;
      mask.block<1, 7>(i, col).setOnes();
    }
  }
  Var x = tape.masked_fill(params(*model.layout().placeholders), B, std::move(values), std::move(mask));
  return fcr_forward(params, model.layout().slot_encoder, x, dropout);
}

}  // namespace

ForwardGraph build_forward_graph(const Model& model, BoundParameters& params,
                                 std::span<const CenteredEffectorSet> items, const DropoutContext& dropout) {
  if (items.empty()) throw EmptyInput("empty batch");
  ag::Tape& tape = params.tape();
  const auto& layout = model.layout();
  const Index J = static_cast<Index>(model.config().joint_count);
  ForwardGraph g;
  g.embedding = model.config().architecture == Architecture::ProtoRes ? encode_protores(model, params, items, dropout)
                                                                      : encode_masked(model, params, items, dropout);
  g.draft = fcr_forward(params, layout.gpd, g.embedding, dropout);
  g.rotations6d = fcr_forward(params, layout.ikd, tape.concat_cols(g.embedding, g.draft), dropout);
  g.local_rotations = rotation6d_op(tape, g.rotations6d);
  Var fk = forward_kinematics_op(tape, model.skeleton(), g.local_rotations, tape.slice_cols(g.draft, 0, 3));
  g.global_rotations = tape.slice_cols(fk, 0, 9 * J);
  g.global_positions = tape.slice_cols(fk, 9 * J, 3 * J);
  g.centroids.reserve(items.size());
  for (const auto& item : items) g.centroids.push_back(item.centroid);
  return g;
}

Eigen::VectorXd ForwardOutput::draft_world() const {
  Eigen::VectorXd out = draft_positions;
  for (Eigen::Index j = 0; j + 2 < out.size(); j += 3) out.segment<3>(j) += centroid;
  return out;
}

Pose ForwardOutput::pose() const {
  return Pose::from_matrices(root_position(), local_rotations);
}

namespace {

std::vector<ForwardOutput> run_group(const Model& model, std::span<const CenteredEffectorSet> items, Mode mode,
                                     Rng* rng) {
  ag::Tape tape;
  BoundParameters params(tape, model.parameters(), nullptr);
  DropoutContext dropout;
  if (mode == Mode::Train) {
    if (rng == nullptr) throw ConfigError("train-mode forward needs a random generator");
    dropout = {model.config().dropout, rng};
  }
  const ForwardGraph g = build_forward_graph(model, params, items, dropout);
  const std::size_t J = model.config().joint_count;
  const auto& emb = tape.value(g.embedding);
  const auto& draft = tape.value(g.draft);
  const auto& r6 = tape.value(g.rotations6d);
  std::vector<ForwardOutput> out(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto row = static_cast<Index>(i);
    auto& o = out[i];
    o.centroid = items[i].centroid;
    o.pose_embedding = emb.row(row).transpose();
    o.draft_positions = draft.row(row).transpose();
    o.rotations6d = r6.row(row).transpose();
    // Training runs on the epsilon-regularized map; returned poses use the exact
    // Gram-Schmidt frame so every rotation is orthonormal and bones keep length.
    o.local_rotations.resize(J);
    for (std::size_t j = 0; j < J; ++j) {
      const Vec6 v = o.rotations6d.segment<6>(static_cast<Index>(6 * j));
      try {
        o.local_rotations[j] = rotation6d_to_matrix(v);
      } catch (const DegenerateRotation&) {
        o.local_rotations[j] = rotation6d_to_matrix_regularized(v);
      }
    }
    o.global = forward_kinematics(model.skeleton(), o.draft_positions.head<3>() + o.centroid, o.local_rotations);
  }
  return out;
}

}  // namespace

ForwardOutput model_forward(const Model& model, const EffectorSet& set, Mode mode, Rng* rng) {
  const CenteredEffectorSet centered = center_effectors(set);
  return std::move(run_group(model, std::span(&centered, 1), mode, rng).front());
}

std::vector<ForwardOutput> model_forward_batch(const Model& model, std::span<const EffectorSet> sets, Mode mode,
                                               Rng* rng) {
  std::vector<ForwardOutput> out(sets.size());
  std::map<std::size_t, std::vector<std::size_t>> groups;
  const bool by_count = model.config().architecture == Architecture::ProtoRes;
  for (std::size_t i = 0; i < sets.size(); ++i) groups[by_count ? sets[i].size() : 0].push_back(i);
  for (const auto& [count, indices] : groups) {
    std::vector<CenteredEffectorSet> items;
    items.reserve(indices.size());
    for (std::size_t i : indices) items.push_back(center_effectors(sets[i]));
    auto results = run_group(model, items, mode, rng);
    for (std::size_t k = 0; k < indices.size(); ++k) out[indices[k]] = std::move(results[k]);
  }
  return out;
}

}  // namespace protores

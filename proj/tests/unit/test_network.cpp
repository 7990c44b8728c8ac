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

#include <algorithm>
#include <numeric>

#include "fixtures.hpp"
#include "protores/error.hpp"
#include "protores/model.hpp"
#include "protores/network.hpp"

namespace protores {
namespace {

using Eigen::MatrixXd;

MatrixXd random_rows(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n;
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

void zero_all(ModelParameters& params) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i].value.setZero();
}

void zero_prefix(ModelParameters& params, const std::string& prefix) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name.rfind(prefix, 0) == 0) params[i].value.setZero();
  }
}

struct BlockResult {
  MatrixXd b, f;
};

BlockResult run_block(const ModelParameters& params, const ResidualBlock& block, const MatrixXd& x) {
  ag::Tape t;
  BoundParameters bound(t, params, nullptr);
  const auto out = residual_block_forward(bound, block, t.constant(x), DropoutContext{});
  return {t.value(out.residual), out.forward ? t.value(*out.forward) : MatrixXd()};
}

MatrixXd run_encoder(const ModelParameters& params, const std::vector<ResidualBlock>& blocks, const MatrixXd& x,
                     Eigen::Index group, EncoderVariant variant) {
  ag::Tape t;
  BoundParameters bound(t, params, nullptr);
  const ag::Var in = t.constant(x);
  const ag::Var p = variant == EncoderVariant::Psa ? encoder_forward_psa(bound, blocks, in, group, DropoutContext{})
                                                   : encoder_forward_mcdc(bound, blocks, in, group, DropoutContext{});
  return t.value(p);
}

MatrixXd run_stack(const ModelParameters& params, const FcrStack& stack, const MatrixXd& x) {
  ag::Tape t;
  BoundParameters bound(t, params, nullptr);
  return t.value(fcr_forward(bound, stack, t.constant(x), DropoutContext{}));
}

std::vector<ResidualBlock> psa_blocks(ModelParameters& params, Rng& rng, std::size_t in, std::size_t width,
                                      std::size_t count) {
  std::vector<ResidualBlock> blocks;
  for (std::size_t r = 0; r < count; ++r) {
    blocks.push_back(make_residual_block(params, rng, "enc." + std::to_string(r), r == 0 ? in : width, width, 2, width));
  }
  return blocks;
}

std::vector<ResidualBlock> mcdc_blocks(ModelParameters& params, Rng& rng, std::size_t in, std::size_t width,
                                       std::size_t count) {
  std::vector<ResidualBlock> blocks;
  for (std::size_t r = 0; r < count; ++r) {
    blocks.push_back(
        make_residual_block(params, rng, "enc." + std::to_string(r), r == 0 ? in : 2 * width, width, 2, std::nullopt));
  }
  return blocks;
}

TEST(ResidualBlock, ZeroParametersGiveZeroOutputs) {
  Rng rng(1);
  ModelParameters params;
  const auto block = make_residual_block(params, rng, "b", 4, 6, 3, 5);
  zero_all(params);
  const auto out = run_block(params, block, random_rows(rng, 7, 4));
  EXPECT_EQ(out.b, MatrixXd::Zero(7, 6));
  EXPECT_EQ(out.f, MatrixXd::Zero(7, 5));
}

TEST(ResidualBlock, IdentityWeightsDoubleNonNegativeInput) {
  Rng rng(2);
  ModelParameters params;
  const auto block = make_residual_block(params, rng, "b", 4, 4, 1, 3);
  params[block.layers[0].weight].value = MatrixXd::Identity(4, 4);
  params[*block.layers[0].bias].value.setZero();
  params[block.residual].value = MatrixXd::Identity(4, 4);
  const MatrixXd x = random_rows(rng, 5, 4).cwiseAbs();
  const auto out = run_block(params, block, x);
  EXPECT_LT((out.b - 2.0 * x).norm(), 1e-12);
  EXPECT_EQ(out.f.rows(), 5);
  EXPECT_EQ(out.f.cols(), 3);
  EXPECT_LT((out.f - x * params[*block.forward].value.transpose()).norm(), 1e-12);
}

TEST(ResidualBlock, InputWidthMismatchIsShapeError) {
  Rng rng(3);
  ModelParameters params;
  const auto block = make_residual_block(params, rng, "b", 4, 4, 2, 3);
  EXPECT_THROW(run_block(params, block, random_rows(rng, 2, 5)), ShapeError);
}

TEST(PsaEncoder, SingleRowPrototypeIsThatRowsProjection) {
  Rng rng(4);
  ModelParameters params;
  const auto blocks = psa_blocks(params, rng, 5, 8, 1);
  const MatrixXd x = random_rows(rng, 1, 5);
  const auto single = run_block(params, blocks[0], x);
  EXPECT_LT((run_encoder(params, blocks, x, 1, EncoderVariant::Psa) - single.f).norm(), 1e-12);
}

TEST(PsaEncoder, MatchesHandWrittenRecursion) {
  Rng rng(5);
  ModelParameters params;
  const auto blocks = psa_blocks(params, rng, 5, 8, 3);
  const MatrixXd x = random_rows(rng, 4, 5);
  // x_1 = x_in; x_r = relu(b_{r-1} - p_{r-1}/(r-1)); p_r = p_{r-1} + mean(f_r)
  MatrixXd xr = x, p = MatrixXd::Zero(1, 8);
  for (std::size_t r = 0; r < blocks.size(); ++r) {
    if (r > 0) xr = (xr.rowwise() - p.row(0) / static_cast<double>(r)).cwiseMax(0.0);
    const auto out = run_block(params, blocks[r], xr);
    p += out.f.colwise().mean();
    xr = out.b;
  }
  EXPECT_LT((run_encoder(params, blocks, x, 4, EncoderVariant::Psa) - p).norm(), 1e-12);
}

TEST(PsaEncoder, PermutationInvariant) {
  Rng rng(6);
  ModelParameters params;
  const auto blocks = psa_blocks(params, rng, 5, 8, 3);
  const MatrixXd x = random_rows(rng, 6, 5);
  std::vector<int> order(6);
  std::iota(order.begin(), order.end(), 0);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(order.begin(), order.end(), rng);
    const MatrixXd shuffled = x(order, Eigen::all);
    EXPECT_LT((run_encoder(params, blocks, x, 6, EncoderVariant::Psa) -
               run_encoder(params, blocks, shuffled, 6, EncoderVariant::Psa))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-6);
  }
}

TEST(PsaEncoder, ZeroForwardProjectionGivesZeroEmbedding) {
  Rng rng(7);
  ModelParameters params;
  const auto blocks = psa_blocks(params, rng, 5, 8, 1);
  params[*blocks[0].forward].value.setZero();
  EXPECT_EQ(run_encoder(params, blocks, random_rows(rng, 3, 5), 3, EncoderVariant::Psa), MatrixXd::Zero(1, 8));
}

TEST(PsaEncoder, LaterBlocksWithZeroForwardTelescope) {
  Rng rng(8);
  ModelParameters deep, shallow;
  Rng a(80), b(80);
  const auto deep_blocks = psa_blocks(deep, a, 5, 8, 3);
  const auto shallow_blocks = psa_blocks(shallow, b, 5, 8, 1);
  for (std::size_t r = 1; r < 3; ++r) deep[*deep_blocks[r].forward].value.setZero();
  const MatrixXd x = random_rows(rng, 4, 5);
  EXPECT_LT((run_encoder(deep, deep_blocks, x, 4, EncoderVariant::Psa) -
             run_encoder(shallow, shallow_blocks, x, 4, EncoderVariant::Psa))
                .norm(),
            1e-12);
}

TEST(PsaEncoder, GroupsAreIndependentItems) {
  Rng rng(9);
  ModelParameters params;
  const auto blocks = psa_blocks(params, rng, 5, 8, 2);
  const MatrixXd a = random_rows(rng, 3, 5), b = random_rows(rng, 3, 5);
  MatrixXd both(6, 5);
  both << a, b;
  const MatrixXd batched = run_encoder(params, blocks, both, 3, EncoderVariant::Psa);
  EXPECT_LT((batched.row(0) - run_encoder(params, blocks, a, 3, EncoderVariant::Psa)).norm(), 1e-12);
  EXPECT_LT((batched.row(1) - run_encoder(params, blocks, b, 3, EncoderVariant::Psa)).norm(), 1e-12);
}

TEST(McdcEncoder, SingleRowAndPermutationInvariance) {
  Rng rng(10);
  ModelParameters params;
  const auto blocks = mcdc_blocks(params, rng, 5, 8, 3);
  EXPECT_EQ(params[blocks[1].residual].value.cols(), 16);
  EXPECT_EQ(params[blocks[1].layers[0].weight].value.cols(), 16);
  const MatrixXd one = random_rows(rng, 1, 5);
  // N = 1: the pooled row is the row itself, so block 2 sees [b, b].
  const auto b1 = run_block(params, blocks[0], one);
  MatrixXd cat(1, 16);
  cat << b1.b, b1.b;
  const auto b2 = run_block(params, blocks[1], cat);
  cat << b2.b, b2.b;
  const auto b3 = run_block(params, blocks[2], cat);
  EXPECT_LT((run_encoder(params, blocks, one, 1, EncoderVariant::Mcdc) - b3.b).norm(), 1e-12);

  const MatrixXd x = random_rows(rng, 6, 5);
  std::vector<int> order = {3, 1, 5, 0, 4, 2};
  EXPECT_LT((run_encoder(params, blocks, x, 6, EncoderVariant::Mcdc) -
             run_encoder(params, blocks, x(order, Eigen::all), 6, EncoderVariant::Mcdc))
                .cwiseAbs()
                .maxCoeff(),
            1e-6);
}

TEST(FcrStack, ZeroParametersGiveZeroOutput) {
  Rng rng(11);
  ModelParameters params;
  const auto stack = make_fcr_stack(params, rng, "gpd", 8, 16, 3, 2, 15);
  zero_all(params);
  EXPECT_EQ(run_stack(params, stack, random_rows(rng, 2, 8)), MatrixXd::Zero(2, 15));
}

TEST(FcrStack, NoBlocksIsAffineProjection) {
  Rng rng(12);
  ModelParameters params;
  const auto stack = make_fcr_stack(params, rng, "gpd", 8, 16, 0, 2, 15);
  ASSERT_TRUE(stack.projection.has_value());
  const MatrixXd x = random_rows(rng, 3, 8);
  const MatrixXd& W = params[stack.projection->weight].value;
  const MatrixXd& a = params[*stack.projection->bias].value;
  const MatrixXd expected = (x * W.transpose()).rowwise() + Eigen::RowVectorXd(a.col(0).transpose());
  EXPECT_LT((run_stack(params, stack, x) - expected).norm(), 1e-12);
}

TEST(FcrStack, ZeroLaterForwardsMatchOneBlock) {
  Rng rng(13);
  ModelParameters deep, shallow;
  Rng a(130), b(130);
  const auto deep_stack = make_fcr_stack(deep, a, "s", 8, 16, 3, 2, 6);
  const auto shallow_stack = make_fcr_stack(shallow, b, "s", 8, 16, 1, 2, 6);
  for (std::size_t r = 1; r < 3; ++r) deep[*deep_stack.blocks[r].forward].value.setZero();
  const MatrixXd x = random_rows(rng, 3, 8);
  EXPECT_LT((run_stack(deep, deep_stack, x) - run_stack(shallow, shallow_stack, x)).norm(), 1e-12);
}

TEST(Decoders, IkdIgnoresEmbeddingSliceWithZeroFirstLayerWeights) {
  const auto skeleton = SkeletonSpec::humanoid64();
  ModelConfig c;
  c.width = 32;
  c.encoder_blocks = 1;
  c.gpd_blocks = 1;
  c.ikd_blocks = 2;
  c.layers_per_block = 2;
  c.embedding_dim = 4;
  c.dropout = 0.0;
  Model model(c, skeleton, 3);
  const auto& ikd = model.layout().ikd;
  auto& params = model.parameters();
  const Eigen::Index E = static_cast<Eigen::Index>(c.embedding_width());
  params[ikd.blocks[0].layers[0].weight].value.leftCols(E).setZero();
  params[ikd.blocks[0].residual].value.leftCols(E).setZero();
  Rng rng(14);
  const MatrixXd draft = random_rows(rng, 1, 192);
  MatrixXd in1(1, E + 192), in2(1, E + 192);
  in1 << random_rows(rng, 1, E), draft;
  in2 << random_rows(rng, 1, E), draft;
  const MatrixXd out1 = run_stack(params, ikd, in1), out2 = run_stack(params, ikd, in2);
  EXPECT_EQ(out1.cols(), 384);
  EXPECT_EQ(out1, out2);
  zero_prefix(params, "ikd.");
  EXPECT_EQ(run_stack(params, ikd, in1), MatrixXd::Zero(1, 384));
}

TEST(ModelParametersTest, NamesAreUniqueAndInitIsBounded) {
  Rng rng(15);
  ModelParameters params;
  make_residual_block(params, rng, "b", 9, 16, 2, 4);
  EXPECT_THROW(params.add("b.residual.weight", MatrixXd::Zero(1, 1)), ConfigError);
  for (const auto& t : params) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(t.value.cols()));
    EXPECT_LE(t.value.cwiseAbs().maxCoeff(), bound) << t.name;
  }
  EXPECT_TRUE(params.all_finite());
  params[0].value(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(params.all_finite());
}

}  // namespace
}  // namespace protores

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

#include <cmath>
#include <numbers>
#include <set>

#include "fixtures.hpp"
#include "protores/effector.hpp"
#include "protores/error.hpp"
#include "protores/pose_losses.hpp"

namespace protores {
namespace {

using testing::random_rotation;

Effector make(std::size_t joint, EffectorType type, const Vec6& data, double tolerance = 0.0) {
  return Effector{joint, type, data, tolerance};
}

Vec6 position_data(double x, double y, double z) {
  Vec6 v = Vec6::Zero();
  v.head<3>() = Vec3(x, y, z);
  return v;
}

TEST(Tolerance, NoiseStdFollowsPowerLaw) {
  EXPECT_DOUBLE_EQ(tolerance_to_noise_std(1.0, 0.1, 13.0), 0.1);
  EXPECT_EQ(tolerance_to_noise_std(0.0, 0.1, 13.0), 0.0);
  EXPECT_NEAR(tolerance_to_noise_std(0.5, 0.1, 13.0), 0.1 / 8192.0, 1e-18);
  EXPECT_NEAR(tolerance_to_noise_std(0.5, 0.1, 13.0), 1.2207e-5, 1e-9);
  EXPECT_THROW(tolerance_to_noise_std(-0.01, 0.1, 13.0), DomainError);
  EXPECT_THROW(tolerance_to_noise_std(1.01, 0.1, 13.0), DomainError);
  double last = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double s = tolerance_to_noise_std(i / 100.0, 0.1, 13.0);
    EXPECT_GE(s, last);
    last = s;
  }
}

TEST(Tolerance, WeightIsCappedReciprocal) {
  EXPECT_DOUBLE_EQ(tolerance_to_weight(0.1, 1e3), 10.0);
  EXPECT_EQ(tolerance_to_weight(1e-5, 1e3), 1e3);
  EXPECT_EQ(tolerance_to_weight(0.0, 1e3), 1e3);
}

TEST(Tolerance, WeightTimesStdNeverExceedsOne) {
  for (int i = 0; i <= 1000; ++i) {
    const double sigma = tolerance_to_noise_std(i / 1000.0, 0.1, 13.0);
    const double w = tolerance_to_weight(sigma, 1e3);
    EXPECT_LE(w * sigma, 1.0 + 1e-12);
    if (sigma >= 1e-3) EXPECT_NEAR(w * sigma, 1.0, 1e-12);
  }
}

TEST(Sampling, SingleJointSingleEffector) {
  Rng rng(1);
  std::set<EffectorType> seen;
  for (int i = 0; i < 100; ++i) {
    const auto slots = sample_effector_set(rng, 1, 1, 1);
    ASSERT_EQ(slots.size(), 1u);
    EXPECT_EQ(slots[0].first, 0u);
    seen.insert(slots[0].second);
  }
  EXPECT_EQ(seen.size(), 3u);
}

TEST(Sampling, CountIsUniformAndPairsDistinct) {
  Rng rng(2);
  constexpr int kDraws = 100000;
  std::vector<int> counts(17, 0);
  for (int i = 0; i < kDraws; ++i) {
    const auto slots = sample_effector_set(rng, 64, 3, 16);
    ASSERT_GE(slots.size(), 3u);
    ASSERT_LE(slots.size(), 16u);
    ++counts[slots.size()];
    std::set<EffectorSlot> unique(slots.begin(), slots.end());
    ASSERT_EQ(unique.size(), slots.size());
    for (const auto& [joint, type] : slots) ASSERT_LT(joint, 64u);
  }
  // Each count: binomial(kDraws, 1/14); every bin within 3σ, and chi-square
  // below the 99.9% quantile for 13 degrees of freedom (34.53).
  const double p = 1.0 / 14.0, mean = kDraws * p, sd = std::sqrt(kDraws * p * (1 - p));
  double chi2 = 0.0;
  for (int n = 3; n <= 16; ++n) {
    EXPECT_LT(std::abs(counts[n] - mean), 3 * sd) << "count " << n;
    chi2 += (counts[n] - mean) * (counts[n] - mean) / mean;
  }
  EXPECT_LT(chi2, 34.53);
}

TEST(Sampling, JointAndTypeMarginalsAreUniform) {
  Rng rng(3);
  std::vector<int> by_type(3, 0);
  int total = 0;
  for (int i = 0; i < 20000; ++i) {
    for (const auto& [joint, type] : sample_effector_set(rng, 4, 6, 6)) {
      ++by_type[static_cast<int>(type)];
      ++total;
    }
  }
  for (int t = 0; t < 3; ++t) EXPECT_NEAR(by_type[t] / double(total), 1.0 / 3.0, 0.01);
}

TEST(Sampling, InfeasibleRangesAreConfigErrors) {
  Rng rng(4);
  EXPECT_THROW(sample_effector_set(rng, 2, 3, 7), ConfigError);
  EXPECT_THROW(sample_effector_set(rng, 10, 5, 4), ConfigError);
  EXPECT_THROW(sample_effector_set(rng, 10, 0, 4), ConfigError);
}

TEST(Sampling, SameSeedSameDraws) {
  Rng a(99), b(99);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(sample_effector_set(a, 64, 3, 16), sample_effector_set(b, 64, 3, 16));
    const Mat3 G = random_rotation(a);
    EXPECT_EQ(G, random_rotation(b));
    EXPECT_EQ(corrupt_rotation_effector(G, 0.1, a), corrupt_rotation_effector(G, 0.1, b));
    EXPECT_EQ(generate_lookat_effector(Vec3(1, 2, 3), G, 0.1, a), generate_lookat_effector(Vec3(1, 2, 3), G, 0.1, b));
  }
}

TEST(NoiseModels, PositionNoise) {
  Rng rng(5);
  const Vec3 g(0.3, -1.0, 2.0);
  const Vec6 exact = corrupt_position_effector(g, 0.0, rng);
  EXPECT_EQ(exact.head<3>(), g);
  EXPECT_EQ(exact.tail<3>(), Vec3::Zero());
  constexpr int kSamples = 1000000;
  Vec3 sum = Vec3::Zero(), sq = Vec3::Zero();
  for (int i = 0; i < kSamples; ++i) {
    const Vec6 d = corrupt_position_effector(g, 0.1, rng);
    ASSERT_EQ(d.tail<3>(), Vec3::Zero());
    const Vec3 e = d.head<3>() - g;
    sum += e;
    sq += e.cwiseProduct(e);
  }
  for (int k = 0; k < 3; ++k) {
    const double mean = sum[k] / kSamples;
    const double sd = std::sqrt(sq[k] / kSamples - mean * mean);
    EXPECT_NEAR(sd, 0.1, 0.002);
  }
}

TEST(NoiseModels, RotationNoise) {
  Rng rng(6);
  const Mat3 G = random_rotation(rng);
  EXPECT_EQ(corrupt_rotation_effector(G, 0.0, rng), matrix_to_rotation6d(G));
  // Oracle: E[geodesic(I, Z(a)Y(b)X(c))] with a, b, c ~ N(0, 0.05²), built from
  // Eigen's axis-angle factors and an independent generator.
  Rng oracle_rng(600);
  std::normal_distribution<double> n(0.0, 0.05);
  constexpr int kSamples = 100000;
  double oracle = 0.0, measured = 0.0;
  for (int i = 0; i < kSamples; ++i) {
    const Mat3 psi = (Eigen::AngleAxisd(n(oracle_rng), Vec3::UnitZ()) * Eigen::AngleAxisd(n(oracle_rng), Vec3::UnitY()) *
                      Eigen::AngleAxisd(n(oracle_rng), Vec3::UnitX()))
                         .toRotationMatrix();
    oracle += Eigen::AngleAxisd(psi).angle();
    const Mat3 R = rotation6d_to_matrix(corrupt_rotation_effector(G, 0.05, rng));
    ASSERT_TRUE(is_rotation(R));
    measured += geodesic_distance(G, R);
  }
  EXPECT_NEAR(measured / kSamples, oracle / kSamples, 0.1 * oracle / kSamples);
}

TEST(NoiseModels, RotationNoiseIsAppliedOnTheLeft) {
  Rng a(7), b(7);
  const Mat3 G = random_rotation(a);
  random_rotation(b);
  const Mat3 noisy = rotation6d_to_matrix(corrupt_rotation_effector(G, 0.3, a));
  std::normal_distribution<double> n(0.0, 0.3);
  Vec3 eps;
  for (int k = 0; k < 3; ++k) eps[k] = n(b);
  EXPECT_LT((noisy - euler_to_matrix(eps) * G).norm(), 1e-12);
}

TEST(NoiseModels, LookAtConsistencyAndDistance) {
  Rng rng(8);
  const double expected_mean = 5.0 * std::sqrt(2.0 / std::numbers::pi);
  constexpr int kSamples = 1000000;
  double sum = 0.0;
  for (int i = 0; i < kSamples; ++i) {
    const Mat3 G = random_rotation(rng);
    const Vec3 g(0.1, 1.2, -0.4);
    const Vec6 d = generate_lookat_effector(g, G, 0.0, rng);
    ASSERT_NEAR(d.tail<3>().norm(), 1.0, 1e-6);
    const double dist = (d.head<3>() - g).norm();
    sum += dist;
    if (i < 1000 && dist > 1e-3) EXPECT_LT(lookat_error(d.head<3>(), d.tail<3>(), G, g), 1e-3);
  }
  EXPECT_NEAR(sum / kSamples, expected_mean, 0.02 * expected_mean);
}

TEST(Centering, ExamplesAndInverse) {
  EffectorSet set;
  set.effectors = {make(0, EffectorType::Position, position_data(1, 0, 0)),
                   make(1, EffectorType::Position, position_data(3, 0, 0))};
  auto c = center_effectors(set);
  EXPECT_EQ(c.centroid, Vec3(2, 0, 0));
  EXPECT_EQ(c.effectors[0].position(), Vec3(-1, 0, 0));
  EXPECT_EQ(c.effectors[1].position(), Vec3(1, 0, 0));

  EffectorSet rotations;
  Vec6 r6;
  r6 << 0, 1, 0, 1, 0, 0;
  rotations.effectors = {make(2, EffectorType::Rotation, r6)};
  c = center_effectors(rotations);
  EXPECT_EQ(c.centroid, Vec3::Zero());
  EXPECT_EQ(c.effectors[0].data, r6);
}

TEST(Centering, TranslationInvariantAndInvertible) {
  Rng rng(9);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 100; ++trial) {
    EffectorSet set;
    set.effectors = {make(0, EffectorType::Position, position_data(n(rng), n(rng), n(rng)), 0.2),
                     make(3, EffectorType::Rotation, matrix_to_rotation6d(random_rotation(rng)), 0.4),
                     make(1, EffectorType::LookAt, generate_lookat_effector(Vec3(n(rng), n(rng), n(rng)), random_rotation(rng), 0.0, rng)),
                     make(4, EffectorType::Position, position_data(n(rng), n(rng), n(rng)))};
    const Vec3 shift(n(rng), n(rng), n(rng));
    EffectorSet moved = set;
    for (auto& e : moved.effectors) {
      if (e.type != EffectorType::Rotation) e.data.head<3>() += shift;
    }
    const auto a = center_effectors(set), b = center_effectors(moved);
    EXPECT_LT((b.centroid - a.centroid - shift).norm(), 1e-12);
    Vec3 mean = Vec3::Zero();
    for (std::size_t i = 0; i < a.effectors.size(); ++i) {
      EXPECT_LT((a.effectors[i].data - b.effectors[i].data).norm(), 1e-12);
      EXPECT_EQ(a.effectors[i].joint, set.effectors[i].joint);
      if (a.effectors[i].type == EffectorType::Position) mean += a.effectors[i].position();
    }
    EXPECT_LT(mean.norm(), 1e-12);
    EXPECT_EQ(a.effectors[1].data, set.effectors[1].data);
    EXPECT_EQ(a.effectors[2].direction(), set.effectors[2].direction());
    const EffectorSet back = a.restore();
    for (std::size_t i = 0; i < set.effectors.size(); ++i) {
      EXPECT_LT((back.effectors[i].data - set.effectors[i].data).norm(), 1e-12);
    }
  }
}

TEST(Encoding, RowLayoutAndWidth) {
  Rng rng(10);
  std::normal_distribution<double> n;
  Eigen::MatrixXd joints(64, 32), types(3, 32);
  for (Eigen::Index i = 0; i < joints.size(); ++i) joints.data()[i] = n(rng);
  for (Eigen::Index i = 0; i < types.size(); ++i) types.data()[i] = n(rng);
  EffectorSet set;
  set.effectors = {make(5, EffectorType::Position, position_data(1, 2, 3), 0.25),
                   make(5, EffectorType::Rotation, matrix_to_rotation6d(random_rotation(rng)), 0.5)};
  const auto c = center_effectors(set);
  const Eigen::MatrixXd x = encode_effector_inputs(c, joints, types);
  ASSERT_EQ(x.cols(), 71);
  ASSERT_EQ(x.rows(), 2);
  for (int r = 0; r < 2; ++r) {
    EXPECT_EQ(x.row(r).head<6>().transpose(), c.effectors[r].data);
    EXPECT_EQ(x(r, 6), c.effectors[r].tolerance);
    EXPECT_EQ(x.row(r).segment(7, 32), joints.row(5));
    EXPECT_EQ(x.row(r).segment(39, 32), types.row(r));
  }
  EXPECT_EQ(x.row(0).segment(7, 32), x.row(1).segment(7, 32));
  set.effectors[1].joint = 64;
  EXPECT_THROW(encode_effector_inputs(center_effectors(set), joints, types), ShapeError);
}

TEST(Validation, RejectsEachBrokenInvariant) {
  auto good = [] {
    EffectorSet s;
    s.effectors = {make(0, EffectorType::Position, position_data(0, 0, 0), 0.5)};
    return s;
  };
  EXPECT_NO_THROW(good().validate(4));
  EXPECT_THROW(EffectorSet{}.validate(4), BadRequest);
  auto s = good();
  s.effectors[0].joint = 4;
  EXPECT_THROW(s.validate(4), BadRequest);
  s = good();
  s.effectors.push_back(s.effectors[0]);
  EXPECT_THROW(s.validate(4), BadRequest);
  s = good();
  s.effectors[0].tolerance = 1.5;
  EXPECT_THROW(s.validate(4), BadRequest);
  s = good();
  s.effectors[0].data[4] = 1.0;
  try {
    s.validate(4);
    FAIL();
  } catch (const BadRequest& e) {
    EXPECT_EQ(e.field(), "/effectors/0/data");
  }
  s = good();
  s.effectors[0].type = EffectorType::LookAt;
  s.effectors[0].data << 1, 0, 0, 0, 0, 2;
  EXPECT_THROW(s.validate(4), BadRequest);
}

}  // namespace
}  // namespace protores

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

#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "protores/dataset.hpp"
#include "protores/error.hpp"
#include "protores/synthetic.hpp"

namespace protores {
namespace {

using testing::read_file;
using testing::star_skeleton;
using testing::TempDir;
using testing::write_file;

PoseDataset clip_dataset(const SkeletonSpec& skeleton, std::size_t clips, std::size_t frames_per_clip,
                         std::uint64_t seed = 1) {
  SyntheticConfig c;
  c.clips = clips;
  c.frames_per_clip = frames_per_clip;
  c.seed = seed;
  return generate_synthetic_dataset(skeleton, c);
}

std::set<std::string> frame_keys(const PoseDataset& ds) {
  std::set<std::string> keys;
  for (const auto& f : ds.frames) {
    std::ostringstream os;
    os.precision(17);
    os << f.root_position.transpose() << f.local_rotations[1].coeffs().transpose();
    keys.insert(os.str());
  }
  return keys;
}

TEST(DatasetFile, RoundTripAndSize) {
  const auto s = SkeletonSpec::humanoid64();
  const PoseDataset ds = clip_dataset(s, 3, 4);
  ASSERT_NO_THROW(ds.validate(s));
  TempDir dir("dataset");
  save_dataset(ds, dir / "a.prsd");
  EXPECT_EQ(std::filesystem::file_size(dir / "a.prsd"), dataset_file_size(64, 12));
  EXPECT_EQ(dataset_file_size(64, 12), 20u + 12u * (12u + 16u * 64u));
  const PoseDataset back = load_dataset(dir / "a.prsd", s);
  ASSERT_EQ(back.size(), ds.size());
  EXPECT_EQ(back.clips, ds.clips);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(back.frames[i].root_position, ds.frames[i].root_position.cast<float>().cast<double>());
    for (std::size_t j = 0; j < s.size(); ++j) {
      EXPECT_EQ(back.frames[i].local_rotations[j].coeffs(),
                ds.frames[i].local_rotations[j].coeffs().cast<float>().cast<double>());
    }
  }
  save_dataset(back, dir / "b.prsd");
  EXPECT_EQ(read_file(dir / "a.prsd"), read_file(dir / "b.prsd"));
  EXPECT_EQ(dataset_hash(back), dataset_hash(ds));
  EXPECT_EQ(read_file(dir / "a.prsd").substr(0, 4), "PRSD");
}

TEST(DatasetFile, RejectsMismatchesAndCorruption) {
  const auto s = star_skeleton();
  const PoseDataset ds = clip_dataset(s, 2, 3);
  TempDir dir("dataset");
  save_dataset(ds, dir / "d.prsd");
  EXPECT_THROW(load_dataset(dir / "d.prsd", SkeletonSpec::humanoid64()), FormatError);

  std::string bytes = read_file(dir / "d.prsd");
  std::string bad_magic = bytes;
  bad_magic[1] = 'X';
  write_file(dir / "magic.prsd", bad_magic);
  EXPECT_THROW(load_dataset(dir / "magic.prsd", s), FormatError);

  std::string bad_version = bytes;
  bad_version[4] = 7;
  write_file(dir / "version.prsd", bad_version);
  EXPECT_THROW(load_dataset(dir / "version.prsd", s), FormatError);

  write_file(dir / "short.prsd", bytes.substr(0, bytes.size() - 4));
  EXPECT_THROW(load_dataset(dir / "short.prsd", s), FormatError);

  // Scale the first quaternion's w component by 1.01.
  std::string stretched = bytes;
  float w;
  const std::size_t w_offset = 20 + 12 + 12;
  std::memcpy(&w, stretched.data() + w_offset, 4);
  w = w * 1.01f + 0.01f;
  std::memcpy(stretched.data() + w_offset, &w, 4);
  write_file(dir / "stretched.prsd", stretched);
  std::filesystem::copy_file(dir / "d.prsd.clips.json", dir / "stretched.prsd.clips.json");
  EXPECT_THROW(load_dataset(dir / "stretched.prsd", s), DataError);
}

TEST(DatasetFile, HashChangesWithContent) {
  const auto s = star_skeleton();
  PoseDataset ds = clip_dataset(s, 2, 3);
  const auto h = dataset_hash(ds);
  ds.frames[2].root_position.x() += 0.5;
  EXPECT_NE(dataset_hash(ds), h);
}

std::string csv_header(const SkeletonSpec& s, const std::vector<std::string>& suffixes, bool globals, bool clip) {
  std::string h = "root_x,root_y,root_z";
  for (const auto& j : s.joints()) {
    for (const auto& suffix : suffixes) h += "," + j.name + suffix;
    if (globals) h += "," + j.name + "_gx," + j.name + "_gy," + j.name + "_gz";
  }
  if (clip) h += ",clip";
  return h + "\n";
}

TEST(CsvImport, IdentityRow) {
  const auto s = star_skeleton();
  TempDir dir("csv");
  std::string text = csv_header(s, {"_qx", "_qy", "_qz", "_qw"}, false, false) + "0.5,1,0";
  for (std::size_t j = 0; j < s.size(); ++j) text += ",0,0,0,1";
  write_file(dir / "a.csv", text + "\n");
  const PoseDataset ds = import_csv(dir / "a.csv", s);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.frames[0].root_position, Vec3(0.5, 1, 0));
  for (const auto& q : ds.frames[0].local_rotations) EXPECT_EQ(q.coeffs(), Eigen::Vector4d(0, 0, 0, 1));
  EXPECT_TRUE(ds.clips.empty());
}

TEST(CsvImport, EulerDegreesWithFkCheckAndClips) {
  const auto s = star_skeleton();
  Rng rng(3);
  std::uniform_real_distribution<double> angle(-170.0, 170.0);
  std::ostringstream text;
  text.precision(17);
  text << csv_header(s, {"_rz", "_ry", "_rx"}, true, true);
  std::vector<std::vector<Mat3>> expected;
  for (int row = 0; row < 6; ++row) {
    std::vector<Mat3> locals;
    text << 0.1 * row << ",0.9,-0.2";
    std::vector<Vec3> degrees;
    for (std::size_t j = 0; j < s.size(); ++j) {
      const Vec3 d(angle(rng), angle(rng), angle(rng));
      degrees.push_back(d);
      locals.push_back(euler_to_matrix(d * std::numbers::pi / 180.0));
    }
    const auto fk = forward_kinematics(s, Vec3(0.1 * row, 0.9, -0.2), locals);
    for (std::size_t j = 0; j < s.size(); ++j) {
      text << "," << degrees[j].x() << "," << degrees[j].y() << "," << degrees[j].z();
      text << "," << fk.positions[j].x() << "," << fk.positions[j].y() << "," << fk.positions[j].z();
    }
    text << "," << (row < 4 ? "walk" : "jump") << "\n";
    expected.push_back(locals);
  }
  TempDir dir("csv");
  write_file(dir / "e.csv", text.str());
  CsvColumnSpec spec;
  spec.rotations = RotationColumns::EulerDegrees;
  ImportReport report;
  const PoseDataset ds = import_csv(dir / "e.csv", s, spec, &report);
  ASSERT_EQ(ds.size(), 6u);
  EXPECT_EQ(report.rows, 6u);
  ASSERT_TRUE(report.max_fk_deviation.has_value());
  EXPECT_LT(*report.max_fk_deviation, 1e-9);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      EXPECT_LT((quaternion_to_matrix(ds.frames[i].local_rotations[j]) - expected[i][j]).norm(), 1e-6);
    }
  }
  ASSERT_EQ(ds.clips.size(), 2u);
  EXPECT_EQ(ds.clips[0], (ClipRange{"walk", 0, 4}));
  EXPECT_EQ(ds.clips[1], (ClipRange{"jump", 4, 6}));

  // A wrong global position for ArmRight must be reported by name.
  std::string broken = text.str();
  const auto first_row = broken.find('\n') + 1;
  std::string row = broken.substr(first_row, broken.find('\n', first_row) - first_row);
  std::vector<std::string> fields;
  std::stringstream ss(row);
  for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
  const std::size_t gx = 3 + 2 * 6 + 3;  // ArmRight is joint 2: six columns per joint, angles first
  fields[gx] = std::to_string(std::stod(fields[gx]) + 0.25);
  std::string joined;
  for (std::size_t i = 0; i < fields.size(); ++i) joined += (i ? "," : "") + fields[i];
  broken.replace(first_row, row.size(), joined);
  write_file(dir / "bad.csv", broken);
  try {
    import_csv(dir / "bad.csv", s, spec);
    FAIL() << "FK mismatch accepted";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("ArmRight"), std::string::npos) << e.what();
  }
}

TEST(CsvImport, MalformedNumberNamesRowAndColumn) {
  const auto s = star_skeleton();
  TempDir dir("csv");
  std::string text = csv_header(s, {"_qx", "_qy", "_qz", "_qw"}, false, false);
  std::string good = "0,0,0";
  for (std::size_t j = 0; j < s.size(); ++j) good += ",0,0,0,1";
  std::string bad = "0,0,0";
  for (std::size_t j = 0; j < s.size(); ++j) bad += j == 3 ? ",0,0,zero,1" : ",0,0,0,1";
  write_file(dir / "m.csv", text + good + "\n" + bad + "\n");
  try {
    import_csv(dir / "m.csv", s);
    FAIL() << "malformed value accepted";
  } catch (const FormatError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("row 3"), std::string::npos) << what;
    EXPECT_NE(what.find("LegLeft_qz"), std::string::npos) << what;
  }
}

TEST(Split, TenClipsGoEightOneOne) {
  const auto s = star_skeleton();
  const PoseDataset ds = clip_dataset(s, 10, 3);
  const auto a = split_by_clip(ds, {0.8, 0.1, 0.1}, 5);
  const auto b = split_by_clip(ds, {0.8, 0.1, 0.1}, 5);
  EXPECT_EQ(a.train.clips.size(), 8u);
  EXPECT_EQ(a.valid.clips.size(), 1u);
  EXPECT_EQ(a.test.clips.size(), 1u);
  EXPECT_EQ(dataset_hash(a.train), dataset_hash(b.train));
  EXPECT_EQ(a.test.clips, b.test.clips);
  EXPECT_NO_THROW(a.train.validate(s));
  EXPECT_NO_THROW(a.test.validate(s));
  std::set<std::string> ids;
  for (const auto* part : {&a.train, &a.valid, &a.test}) {
    for (const auto& c : part->clips) EXPECT_TRUE(ids.insert(c.id).second) << c.id << " in two splits";
  }
  EXPECT_EQ(ids.size(), 10u);
  auto all = frame_keys(a.train);
  for (const auto& k : frame_keys(a.valid)) EXPECT_TRUE(all.insert(k).second);
  for (const auto& k : frame_keys(a.test)) EXPECT_TRUE(all.insert(k).second);
  EXPECT_EQ(all, frame_keys(ds));
  const auto c = split_by_clip(ds, {0.8, 0.1, 0.1}, 6);
  EXPECT_TRUE(c.test.clips != a.test.clips || c.valid.clips != a.valid.clips || dataset_hash(c.train) != dataset_hash(a.train));
}

TEST(Split, FramesWithoutClipIndexSplitUniformly) {
  const auto s = star_skeleton();
  PoseDataset ds = clip_dataset(s, 1, 100);
  ds.clips.clear();
  const auto split = split_by_clip(ds, {0.8, 0.1, 0.1}, 1);
  EXPECT_EQ(split.train.size(), 80u);
  EXPECT_EQ(split.valid.size(), 10u);
  EXPECT_EQ(split.test.size(), 10u);
}

TEST(Subsample, FractionsAndDeterminism) {
  const auto s = star_skeleton();
  const PoseDataset ds = clip_dataset(s, 50, 20);
  ASSERT_EQ(ds.size(), 1000u);
  const PoseDataset same = subsample_frames(ds, 1.0, 3);
  EXPECT_EQ(dataset_hash(same), dataset_hash(ds));
  const PoseDataset tenth = subsample_frames(ds, 0.1, 3);
  EXPECT_EQ(tenth.size(), 100u);
  EXPECT_NO_THROW(tenth.validate(s));
  EXPECT_EQ(dataset_hash(tenth), dataset_hash(subsample_frames(ds, 0.1, 3)));
  EXPECT_NE(dataset_hash(tenth), dataset_hash(subsample_frames(ds, 0.1, 4)));
  // order preserved: kept frames appear in the same relative order as in the source
  std::vector<std::size_t> positions;
  for (const auto& f : tenth.frames) {
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.frames[i].root_position == f.root_position) {
        positions.push_back(i);
        break;
      }
    }
  }
  ASSERT_EQ(positions.size(), 100u);
  EXPECT_TRUE(std::is_sorted(positions.begin(), positions.end()));
  EXPECT_THROW(subsample_frames(ds, 0.0, 1), ConfigError);
}

TEST(Stats, ConstantDatasetHasZeroSpread) {
  const auto s = star_skeleton();
  PoseDataset ds;
  ds.joint_count = s.size();
  Rng rng(4);
  const Pose p = testing::random_pose(s.size(), rng);
  ds.frames = {p, p, p};
  const auto stats = dataset_stats(ds, s);
  for (std::size_t j = 0; j < s.size(); ++j) {
    EXPECT_LT(stats.position_std[j].norm(), 1e-12);
    EXPECT_LT(stats.quaternion_std[j].norm(), 1e-12);
  }
}

TEST(Stats, TwoFramesMatchClosedForm) {
  const auto s = star_skeleton();
  PoseDataset ds;
  ds.joint_count = s.size();
  Pose a = Pose::rest(s.size()), b = Pose::rest(s.size());
  a.root_position = Vec3(1, 2, 3);
  b.root_position = Vec3(-1, 0, 3);
  const double h = std::numbers::pi / 4;
  b.local_rotations[0] = Quat(std::cos(h), 0, 0, std::sin(h));  // hips turned π/2 about z
  ds.frames = {a, b};
  const auto stats = dataset_stats(ds, s);
  // population std of two values is half their distance
  EXPECT_EQ(stats.position_std[0], Vec3::Zero());
  for (std::size_t j = 1; j < s.size(); ++j) {
    const Vec3 o = s.offset(j);
    const Vec3 turned(-o.y(), o.x(), o.z());
    EXPECT_LT((stats.position_std[j] - (o - turned).cwiseAbs() / 2).norm(), 1e-12);
    EXPECT_LT(stats.quaternion_std[j].norm(), 1e-12);
  }
  const Eigen::Vector4d expected(0, 0, std::sin(h) / 2, (1 - std::cos(h)) / 2);
  EXPECT_LT((stats.quaternion_std[0] - expected).norm(), 1e-12);

  // frame order does not matter
  std::swap(ds.frames[0], ds.frames[1]);
  const auto swapped = dataset_stats(ds, s);
  for (std::size_t j = 0; j < s.size(); ++j) EXPECT_LT((swapped.position_std[j] - stats.position_std[j]).norm(), 1e-15);
}

TEST(Stats, TableHasOneRowPerJoint) {
  const auto s = star_skeleton();
  const auto stats = dataset_stats(clip_dataset(s, 2, 5), s);
  std::ostringstream os;
  write_stats_table(os, stats);
  const std::string table = os.str();
  for (const auto& j : s.joints()) EXPECT_NE(table.find(j.name), std::string::npos);
  const auto doc = stats_to_json(stats);
  EXPECT_EQ(doc.at("joints").size(), s.size());
  EXPECT_THROW(dataset_stats(PoseDataset{s.size(), {}, {}}, s), EmptyInput);
}

TEST(Synthetic, ValidAndDeterministic) {
  const auto s = SkeletonSpec::humanoid64();
  const PoseDataset a = clip_dataset(s, 5, 7, 9), b = clip_dataset(s, 5, 7, 9);
  EXPECT_NO_THROW(a.validate(s, 1e-6));
  EXPECT_EQ(a.size(), 35u);
  EXPECT_EQ(a.clips.size(), 5u);
  EXPECT_EQ(dataset_hash(a), dataset_hash(b));
  EXPECT_NE(dataset_hash(a), dataset_hash(clip_dataset(s, 5, 7, 10)));
}

}  // namespace
}  // namespace protores

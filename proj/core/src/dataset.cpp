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

#include "protores/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "protores/effector.hpp"
#include "protores/error.hpp"

namespace protores {

namespace {

constexpr char kMagic[4] = {'P', 'R', 'S', 'D'};
constexpr std::uint64_t kHeaderBytes = 4 + 4 + 4 + 8;

std::filesystem::path clips_path(const std::filesystem::path& path) { return path.string() + ".clips.json"; }

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) throw FormatError("dataset file is truncated");
  return value;
}

// Canonical per-frame f32 encoding shared by the file format and the hash.
void encode_frame(const Pose& pose, std::vector<float>& out) {
  out.clear();
  for (int k = 0; k < 3; ++k) out.push_back(static_cast<float>(pose.root_position[k]));
  for (const auto& q : pose.local_rotations) {
    out.push_back(static_cast<float>(q.x()));
    out.push_back(static_cast<float>(q.y()));
    out.push_back(static_cast<float>(q.z()));
    out.push_back(static_cast<float>(q.w()));
  }
}

PoseDataset take_clips(const PoseDataset& source, std::vector<ClipRange> clips, bool keep_index) {
  std::sort(clips.begin(), clips.end(), [](const ClipRange& a, const ClipRange& b) { return a.begin < b.begin; });
  PoseDataset out;
  out.joint_count = source.joint_count;
  for (const auto& c : clips) {
    const std::size_t start = out.frames.size();
    out.frames.insert(out.frames.end(), source.frames.begin() + static_cast<std::ptrdiff_t>(c.begin),
                      source.frames.begin() + static_cast<std::ptrdiff_t>(c.end));
    if (keep_index) out.clips.push_back({c.id, start, out.frames.size()});
  }
  return out;
}

std::vector<std::string> split_line(const std::string& line, char delimiter) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, delimiter)) {
    const auto first = field.find_first_not_of(" \t\r\"");
    const auto last = field.find_last_not_of(" \t\r\"");
    fields.push_back(first == std::string::npos ? std::string() : field.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == delimiter) fields.emplace_back();
  return fields;
}

}  // namespace

std::vector<ClipRange> PoseDataset::effective_clips() const {
  if (!clips.empty()) return clips;
  std::vector<ClipRange> out;
  out.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) out.push_back({std::to_string(i), i, i + 1});
  return out;
}

void PoseDataset::validate(const SkeletonSpec& skeleton, double tolerance) const {
  if (joint_count != skeleton.size()) {
    throw FormatError("dataset has " + std::to_string(joint_count) + " joints, skeleton has " +
                      std::to_string(skeleton.size()));
  }
  for (std::size_t i = 0; i < frames.size(); ++i) {
    try {
      frames[i].validate(skeleton, tolerance);
    } catch (const Error& e) {
      throw DataError("frame " + std::to_string(i) + ": " + e.what());
    }
  }
  if (!clips.empty()) {
    std::size_t expected = 0;
    for (const auto& c : clips) {
      if (c.begin != expected || c.end <= c.begin) {
        throw DataError("clip '" + c.id + "' does not continue the partition at frame " + std::to_string(expected));
      }
      expected = c.end;
    }
    if (expected != frames.size()) throw DataError("clip index does not cover every frame");
  }
}

std::uint64_t dataset_file_size(std::size_t joints, std::size_t frames) {
  return kHeaderBytes + static_cast<std::uint64_t>(frames) * (12 + 16 * static_cast<std::uint64_t>(joints));
}

void save_dataset(const PoseDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kDatasetVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.joint_count));
  put<std::uint64_t>(out, dataset.frames.size());
  std::vector<float> buffer;
  for (const auto& pose : dataset.frames) {
    if (pose.size() != dataset.joint_count) throw ShapeError("frame joint count differs from the dataset");
    encode_frame(pose, buffer);
    out.write(reinterpret_cast<const char*>(buffer.data()), static_cast<std::streamsize>(buffer.size() * 4));
  }
  if (!out) throw Error("write failed for '" + path.string() + "'");
  const auto sidecar = clips_path(path);
  if (dataset.clips.empty()) {
    std::filesystem::remove(sidecar);
    return;
  }
  nlohmann::json doc = {{"clips", nlohmann::json::array()}};
  for (const auto& c : dataset.clips) doc["clips"].push_back({{"id", c.id}, {"begin", c.begin}, {"end", c.end}});
  std::ofstream side(sidecar);
  side << doc.dump(1) << "\n";
}

PoseDataset load_dataset(const std::filesystem::path& path, const SkeletonSpec& skeleton) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open dataset '" + path.string() + "'");
  char magic[4] = {};
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("'" + path.string() + "' is not a dataset file");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kDatasetVersion) throw FormatError("unsupported dataset version " + std::to_string(version));
  const auto joints = get<std::uint32_t>(in);
  if (joints != skeleton.size()) {
    throw FormatError("dataset has " + std::to_string(joints) + " joints, skeleton has " +
                      std::to_string(skeleton.size()));
  }
  const auto count = get<std::uint64_t>(in);
  const auto expected = dataset_file_size(joints, count);
  if (std::filesystem::file_size(path) != expected) {
    throw FormatError("dataset size is " + std::to_string(std::filesystem::file_size(path)) + " bytes, expected " +
                      std::to_string(expected));
  }
  PoseDataset ds;
  ds.joint_count = joints;
  ds.frames.reserve(count);
  std::vector<float> buffer(3 + 4 * static_cast<std::size_t>(joints));
  for (std::uint64_t f = 0; f < count; ++f) {
    in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size() * 4));
    Pose pose;
    pose.root_position = Vec3(buffer[0], buffer[1], buffer[2]);
    pose.local_rotations.reserve(joints);
    for (std::size_t j = 0; j < joints; ++j) {
      const float* q = buffer.data() + 3 + 4 * j;
      pose.local_rotations.emplace_back(q[3], q[0], q[1], q[2]);
    }
    ds.frames.push_back(std::move(pose));
  }
  const auto sidecar = clips_path(path);
  if (std::filesystem::exists(sidecar)) {
    std::ifstream side(sidecar);
    try {
      const auto doc = nlohmann::json::parse(side);
      for (const auto& c : doc.at("clips")) {
        ds.clips.push_back({c.at("id").get<std::string>(), c.at("begin").get<std::size_t>(),
                            c.at("end").get<std::size_t>()});
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("malformed clip index: ") + e.what());
    }
  }
  ds.validate(skeleton, 1e-3);
  return ds;
}

std::uint64_t dataset_hash(const PoseDataset& dataset) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
  };
  const auto joints = static_cast<std::uint32_t>(dataset.joint_count);
  mix(&joints, sizeof(joints));
  std::vector<float> buffer;
  for (const auto& pose : dataset.frames) {
    encode_frame(pose, buffer);
    mix(buffer.data(), buffer.size() * sizeof(float));
  }
  return h;
}

PoseDataset import_csv(const std::filesystem::path& path, const SkeletonSpec& skeleton, const CsvColumnSpec& spec,
                       ImportReport* report) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw FormatError("CSV file is empty");
  const auto header = split_line(line, spec.delimiter);
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[header[i]] = i;

  auto require = [&](const std::string& name) {
    auto it = column.find(name);
    if (it == column.end()) throw FormatError("CSV header lacks column '" + name + "'");
    return it->second;
  };
  const std::size_t J = skeleton.size();
  const std::array<std::size_t, 3> root_cols = {require("root_x"), require("root_y"), require("root_z")};
  const bool quaternions = spec.rotations == RotationColumns::Quaternion;
  const std::vector<std::string> rot_suffix =
      quaternions ? std::vector<std::string>{"_qx", "_qy", "_qz", "_qw"} : std::vector<std::string>{"_rz", "_ry", "_rx"};
  std::vector<std::vector<std::size_t>> rot_cols(J);
  std::vector<std::optional<std::array<std::size_t, 3>>> global_cols(J);
  for (std::size_t j = 0; j < J; ++j) {
    const auto& name = skeleton.joint(j).name;
    for (const auto& s : rot_suffix) rot_cols[j].push_back(require(name + s));
    if (column.count(name + "_gx") && column.count(name + "_gy") && column.count(name + "_gz")) {
      global_cols[j] = std::array<std::size_t, 3>{column[name + "_gx"], column[name + "_gy"], column[name + "_gz"]};
    }
  }
  std::optional<std::size_t> clip_col;
  if (!spec.clip_column.empty() && column.count(spec.clip_column)) clip_col = column[spec.clip_column];

  PoseDataset ds;
  ds.joint_count = J;
  std::vector<std::string> clip_ids;
  std::optional<double> max_dev;
  struct Worst {
    double deviation;
    std::size_t row;
    std::size_t joint;
  };
  std::vector<Worst> failures;
  const double angle_scale = spec.rotations == RotationColumns::EulerDegrees ? M_PI / 180.0 : 1.0;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_line(line, spec.delimiter);
    auto number = [&](std::size_t col) {
      if (col >= fields.size()) {
        throw FormatError("row " + std::to_string(row) + ", column '" + header[col] + "': missing value");
      }
      const std::string& s = fields[col];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v)) {
        throw FormatError("row " + std::to_string(row) + ", column '" + header[col] + "': cannot parse '" + s + "'");
      }
      return v;
    };
    Pose pose;
    pose.root_position = Vec3(number(root_cols[0]), number(root_cols[1]), number(root_cols[2]));
    pose.local_rotations.reserve(J);
    for (std::size_t j = 0; j < J; ++j) {
      const auto& c = rot_cols[j];
      if (quaternions) {
        Quat q(number(c[3]), number(c[0]), number(c[1]), number(c[2]));
        if (std::abs(q.norm() - 1.0) > 1e-3) {
          throw DataError("row " + std::to_string(row) + ": quaternion of '" + skeleton.joint(j).name +
                          "' is not unit length");
        }
        pose.local_rotations.push_back(q.normalized());
      } else {
        const Vec3 angles(number(c[0]) * angle_scale, number(c[1]) * angle_scale, number(c[2]) * angle_scale);
        pose.local_rotations.push_back(matrix_to_quaternion(euler_to_matrix(angles)));
      }
    }
    if (std::any_of(global_cols.begin(), global_cols.end(), [](const auto& g) { return g.has_value(); })) {
      const auto fk = forward_kinematics(skeleton, pose);
      for (std::size_t j = 0; j < J; ++j) {
        if (!global_cols[j]) continue;
        const auto& g = *global_cols[j];
        const double dev = (fk.positions[j] - Vec3(number(g[0]), number(g[1]), number(g[2]))).norm();
        max_dev = std::max(max_dev.value_or(0.0), dev);
        if (dev > spec.fk_tolerance) failures.push_back({dev, row, j});
      }
    }
    if (clip_col) clip_ids.push_back(*clip_col < fields.size() ? fields[*clip_col] : std::string());
    ds.frames.push_back(std::move(pose));
  }
  if (!failures.empty()) {
    std::sort(failures.begin(), failures.end(), [](const Worst& a, const Worst& b) { return a.deviation > b.deviation; });
    std::ostringstream msg;
    msg << "forward kinematics disagrees with stored positions; worst:";
    for (std::size_t i = 0; i < std::min<std::size_t>(5, failures.size()); ++i) {
      msg << " " << skeleton.joint(failures[i].joint).name << " (row " << failures[i].row << ", "
          << failures[i].deviation << " m)";
    }
    throw DataError(msg.str());
  }
  if (clip_col) {
    for (std::size_t i = 0; i < clip_ids.size(); ++i) {
      if (i == 0 || clip_ids[i] != clip_ids[i - 1]) {
        ds.clips.push_back({clip_ids[i], i, i + 1});
      } else {
        ds.clips.back().end = i + 1;
      }
    }
    std::map<std::string, int> seen;
    for (const auto& c : ds.clips) {
      if (++seen[c.id] > 1) throw DataError("clip '" + c.id + "' appears in non-contiguous rows");
    }
  }
  if (report != nullptr) {
    report->rows = ds.frames.size();
    report->max_fk_deviation = max_dev;
  }
  return ds;
}

DatasetSplit split_by_clip(const PoseDataset& dataset, std::array<double, 3> proportions, std::uint64_t seed) {
  for (double p : proportions) {
    if (!(p >= 0.0)) throw ConfigError("split proportions must be non-negative");
  }
  const double total = proportions[0] + proportions[1] + proportions[2];
  if (!(total > 0.0)) throw ConfigError("split proportions must not all be zero");
  auto clips = dataset.effective_clips();
  Rng rng(seed);
  std::shuffle(clips.begin(), clips.end(), rng);
  const std::size_t n = clips.size();
  const auto n_train = std::min(n, static_cast<std::size_t>(std::llround(proportions[0] / total * n)));
  const auto n_valid = std::min(n - n_train, static_cast<std::size_t>(std::llround(proportions[1] / total * n)));
  const bool keep = !dataset.clips.empty();
  auto slice = [&](std::size_t from, std::size_t to) {
    return take_clips(dataset, std::vector<ClipRange>(clips.begin() + static_cast<std::ptrdiff_t>(from),
                                                      clips.begin() + static_cast<std::ptrdiff_t>(to)),
                      keep);
  };
  return {slice(0, n_train), slice(n_train, n_train + n_valid), slice(n_train + n_valid, n)};
}

PoseDataset subsample_frames(const PoseDataset& dataset, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("subsample fraction must lie in (0, 1]");
  const std::size_t n = dataset.size();
  const auto k = std::min(n, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> kept;
  kept.reserve(k);
  Rng rng(seed);
  std::sample(all.begin(), all.end(), std::back_inserter(kept), k, rng);
  PoseDataset out;
  out.joint_count = dataset.joint_count;
  out.frames.reserve(k);
  std::vector<std::string> owner;
  if (!dataset.clips.empty()) {
    owner.resize(n);
    for (const auto& c : dataset.clips) {
      for (std::size_t i = c.begin; i < c.end; ++i) owner[i] = c.id;
    }
  }
  for (std::size_t i : kept) {
    out.frames.push_back(dataset.frames[i]);
    if (owner.empty()) continue;
    const std::size_t pos = out.frames.size() - 1;
    if (out.clips.empty() || out.clips.back().id != owner[i]) {
      out.clips.push_back({owner[i], pos, pos + 1});
    } else {
      out.clips.back().end = pos + 1;
    }
  }
  return out;
}

DatasetStats dataset_stats(const PoseDataset& dataset, const SkeletonSpec& skeleton) {
  if (dataset.empty()) throw EmptyInput("dataset has no frames");
  if (dataset.joint_count != skeleton.size()) throw FormatError("dataset and skeleton joint counts differ");
  const std::size_t J = skeleton.size();
  const auto n = static_cast<double>(dataset.size());
  std::vector<std::vector<Vec3>> positions(J);
  std::vector<Vec3> pos_mean(J, Vec3::Zero());
  std::vector<Eigen::Vector4d> quat_mean(J, Eigen::Vector4d::Zero());
  for (auto& p : positions) p.reserve(dataset.size());
  for (const auto& pose : dataset.frames) {
    const auto fk = forward_kinematics(skeleton, pose);
    for (std::size_t j = 0; j < J; ++j) {
      positions[j].push_back(fk.positions[j] - fk.positions[0]);
      pos_mean[j] += positions[j].back();
      quat_mean[j] += pose.local_rotations[j].coeffs();
    }
  }
  DatasetStats s;
  for (std::size_t j = 0; j < J; ++j) {
    pos_mean[j] /= n;
    quat_mean[j] /= n;
    Vec3 pv = Vec3::Zero();
    Eigen::Vector4d qv = Eigen::Vector4d::Zero();
    for (std::size_t f = 0; f < dataset.size(); ++f) {
      pv += (positions[j][f] - pos_mean[j]).cwiseAbs2();
      qv += (dataset.frames[f].local_rotations[j].coeffs() - quat_mean[j]).cwiseAbs2();
    }
    s.joint_names.push_back(skeleton.joint(j).name);
    s.position_std.push_back((pv / n).cwiseSqrt());
    s.quaternion_std.push_back((qv / n).cwiseSqrt());
  }
  return s;
}

void write_stats_table(std::ostream& out, const DatasetStats& stats) {
  std::size_t width = 5;
  for (const auto& n : stats.joint_names) width = std::max(width, n.size());
  const auto flags = out.flags();
  out << std::left << std::setw(static_cast<int>(width)) << "Joint" << std::right;
  for (const char* c : {"pos_X", "pos_Y", "pos_Z", "quat_X", "quat_Y", "quat_Z", "quat_W"}) out << " " << std::setw(8) << c;
  out << "\n" << std::fixed << std::setprecision(4);
  for (std::size_t j = 0; j < stats.joint_names.size(); ++j) {
    out << std::left << std::setw(static_cast<int>(width)) << stats.joint_names[j] << std::right;
    for (int k = 0; k < 3; ++k) out << " " << std::setw(8) << stats.position_std[j][k];
    for (int k = 0; k < 4; ++k) out << " " << std::setw(8) << stats.quaternion_std[j][k];
    out << "\n";
  }
  out.flags(flags);
}

nlohmann::json stats_to_json(const DatasetStats& stats) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t j = 0; j < stats.joint_names.size(); ++j) {
    const auto& p = stats.position_std[j];
    const auto& q = stats.quaternion_std[j];
    rows.push_back({{"joint", stats.joint_names[j]},
                    {"position_std", {p.x(), p.y(), p.z()}},
                    {"quaternion_std", {q[0], q[1], q[2], q[3]}}});
  }
  return {{"joints", rows}};
}

}  // namespace protores

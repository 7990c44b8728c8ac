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

#include "protores/bench.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

#include "protores/error.hpp"
#include "protores/interchange.hpp"
#include "protores/pose_losses.hpp"

namespace protores {

namespace {

using nlohmann::json;

std::string hash_to_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

std::uint64_t hash_from_hex(const std::string& s) {
  if (s.size() != 16 || s.find_first_not_of("0123456789abcdef") != std::string::npos) {
    throw FormatError("dataset_hash must be 16 lowercase hex digits");
  }
  return std::stoull(s, nullptr, 16);
}

BenchmarkKind kind_from_string(std::string_view name) {
  if (name == "random") return BenchmarkKind::Random;
  if (name == "5point") return BenchmarkKind::FivePoint;
  throw FormatError("unknown benchmark kind '" + std::string(name) + "'");
}

Rng file_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

/// Tolerance, then noise, for each slot in order.
EffectorSet draw_effectors(std::span<const EffectorSlot> slots, const GroundTruth& truth, const TrainConfig& noise,
                           Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  EffectorSet set;
  set.effectors.reserve(slots.size());
  for (const auto& slot : slots) {
    const double tolerance = unit(rng);
    const double sigma = tolerance_to_noise_std(tolerance, noise.sigma_max(slot.second), noise.eta);
    set.effectors.push_back(make_effector(slot, tolerance, truth.positions[slot.first],
                                          truth.global_rotations[slot.first], sigma, rng));
  }
  return set;
}

double sorted_mean(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

void check_test_split(const PoseDataset& test, const SkeletonSpec& skeleton) {
  if (test.joint_count != skeleton.size()) {
    throw ShapeError("test split has " + std::to_string(test.joint_count) + " joints, skeleton has " +
                     std::to_string(skeleton.size()));
  }
  if (test.empty()) throw EmptyInput("test split is empty");
}

/// Item-order-independent mean metrics of `predictor` over `items`.
Metrics mean_metrics(const Predictor& predictor, std::span<const BenchmarkItem> items, const PoseDataset& test,
                     const SkeletonSpec& skeleton, std::size_t batch_size) {
  const std::size_t J = skeleton.size();
  std::vector<double> gpd, ikd, geo;
  gpd.reserve(items.size());
  ikd.reserve(items.size());
  geo.reserve(items.size());
  batch_size = std::max<std::size_t>(batch_size, 1);
  for (std::size_t begin = 0; begin < items.size(); begin += batch_size) {
    const std::size_t end = std::min(items.size(), begin + batch_size);
    std::vector<EffectorSet> sets;
    std::vector<std::size_t> frames;
    for (std::size_t i = begin; i < end; ++i) {
      if (items[i].frame >= test.size()) {
        throw DataError("benchmark item references frame " + std::to_string(items[i].frame) + " of a " +
                        std::to_string(test.size()) + "-frame test split");
      }
      sets.push_back(items[i].effectors);
      frames.push_back(items[i].frame);
    }
    const auto predictions = predictor(sets, frames);
    if (predictions.size() != sets.size()) throw ShapeError("predictor returned the wrong number of poses");
    for (std::size_t k = 0; k < predictions.size(); ++k) {
      const auto& p = predictions[k];
      if (p.local_rotations.size() != J || p.global_positions.size() != J) {
        throw ShapeError("prediction does not match the skeleton");
      }
      const auto m = item_metrics(p, ground_truth_from_pose(skeleton, test.frames[frames[k]]));
      gpd.push_back(m.gpd_l2);
      ikd.push_back(m.ikd_l2);
      geo.push_back(m.loc_geo);
    }
  }
  return {sorted_mean(std::move(gpd)), sorted_mean(std::move(ikd)), sorted_mean(std::move(geo))};
}

json metrics_json(const Metrics& m) {
  return json{{"gpd_l2_det", m.gpd_l2}, {"ikd_l2_det", m.ikd_l2}, {"loc_geo_det", m.loc_geo}};
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4e", v);
  return buf;
}

void write_row(std::ostream& out, const std::string& label, const std::string& count, const Metrics& m) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-18s %8s  %14s  %14s  %14s\n", label.c_str(), count.c_str(), sci(m.gpd_l2).c_str(),
                sci(m.ikd_l2).c_str(), sci(m.loc_geo).c_str());
  out << buf;
}

}  // namespace

std::string_view to_string(BenchmarkKind kind) { return kind == BenchmarkKind::Random ? "random" : "5point"; }

nlohmann::json BenchmarkFile::to_json(const SkeletonSpec& skeleton) const {
  json list = json::array();
  for (const auto& item : items) {
    list.push_back(json{{"frame", item.frame},
                        {"effectors", effector_set_to_json(item.effectors, skeleton).at("effectors")}});
  }
  return json{{"kind", std::string(protores::to_string(kind))},
              {"seed", seed},
              {"effector_count", effector_count},
              {"dataset_hash", hash_to_hex(dataset_hash)},
              {"joint_count", skeleton.size()},
              {"items", std::move(list)}};
}

BenchmarkFile BenchmarkFile::from_json(const nlohmann::json& doc, const SkeletonSpec& skeleton) {
  BenchmarkFile file;
  try {
    file.kind = kind_from_string(doc.at("kind").get<std::string>());
    file.seed = doc.at("seed").get<std::uint64_t>();
    file.effector_count = doc.at("effector_count").get<std::size_t>();
    file.dataset_hash = hash_from_hex(doc.at("dataset_hash").get<std::string>());
    if (doc.at("joint_count").get<std::size_t>() != skeleton.size()) {
      throw FormatError("benchmark was generated for a " + doc.at("joint_count").dump() + "-joint skeleton");
    }
    const json& list = doc.at("items");
    for (std::size_t i = 0; i < list.size(); ++i) {
      BenchmarkItem item;
      item.frame = list[i].at("frame").get<std::size_t>();
      const std::string pointer = "/items/" + std::to_string(i) + "/effectors";
      item.effectors = effector_set_from_json(list[i].at("effectors"), skeleton, pointer);
      if (item.effectors.size() != file.effector_count) {
        throw FormatError("item " + std::to_string(i) + " has " + std::to_string(item.effectors.size()) +
                          " effectors, expected " + std::to_string(file.effector_count));
      }
      file.items.push_back(std::move(item));
    }
  } catch (const json::exception& err) {
    throw FormatError(std::string("malformed benchmark file: ") + err.what());
  } catch (const BadRequest& err) {
    throw FormatError(std::string(err.what()) + " at '" + err.field() + "'");
  }
  return file;
}

void BenchmarkFile::save(const std::filesystem::path& path, const SkeletonSpec& skeleton) const {
  write_json_file(to_json(skeleton), path);
}

BenchmarkFile BenchmarkFile::load(const std::filesystem::path& path, const SkeletonSpec& skeleton) {
  return from_json(read_json_file(path), skeleton);
}

std::string BenchmarkFile::file_name() const {
  if (kind == BenchmarkKind::FivePoint) return "5point.json";
  char buf[32];
  std::snprintf(buf, sizeof buf, "random_n%02zu.json", effector_count);
  return buf;
}

std::vector<BenchmarkFile> generate_random_benchmark(const PoseDataset& test, const SkeletonSpec& skeleton,
                                                     std::uint64_t seed, const TrainConfig& noise) {
  check_test_split(test, skeleton);
  std::vector<std::vector<std::size_t>> zones;
  for (Zone zone : kLimbZones) {
    zones.push_back(skeleton.joints_in_zone(zone));
    if (zones.back().empty()) {
      throw SkeletonError("skeleton has no joints in zone " + std::string(to_string(zone)));
    }
  }
  const std::uint64_t hash = dataset_hash(test);
  std::vector<BenchmarkFile> files;
  for (std::size_t n = kBenchmarkMinEffectors; n <= kBenchmarkMaxEffectors; ++n) {
    BenchmarkFile file;
    file.kind = BenchmarkKind::Random;
    file.seed = seed;
    file.effector_count = n;
    file.dataset_hash = hash;
    Rng rng = file_rng(seed, n);
    for (std::size_t f = 0; f < test.size(); ++f) {
      const GroundTruth truth = ground_truth_from_pose(skeleton, test.frames[f]);
      std::vector<EffectorSlot> slots;
      for (const auto& joints : zones) {
        std::uniform_int_distribution<std::size_t> pick(0, joints.size() - 1);
        slots.emplace_back(joints[pick(rng)], EffectorType::Position);
      }
      std::vector<EffectorSlot> candidates;
      for (std::size_t j = 0; j < skeleton.size(); ++j) {
        for (std::size_t t = 0; t < kEffectorTypeCount; ++t) {
          const EffectorSlot slot{j, static_cast<EffectorType>(t)};
          if (std::find(slots.begin(), slots.end(), slot) == slots.end()) candidates.push_back(slot);
        }
      }
      const auto rest = sample_distinct_slots(rng, std::move(candidates), n - slots.size());
      slots.insert(slots.end(), rest.begin(), rest.end());
      file.items.push_back({f, draw_effectors(slots, truth, noise, rng)});
    }
    files.push_back(std::move(file));
  }
  return files;
}

BenchmarkFile generate_5point_benchmark(const PoseDataset& test, const SkeletonSpec& skeleton) {
  check_test_split(test, skeleton);
  std::vector<std::size_t> joints;
  for (const char* key : {"chest", "left_hand", "right_hand", "left_foot", "right_foot"}) {
    joints.push_back(skeleton.index_of(skeleton.landmark(key)));
  }
  BenchmarkFile file;
  file.kind = BenchmarkKind::FivePoint;
  file.effector_count = joints.size();
  file.dataset_hash = dataset_hash(test);
  for (std::size_t f = 0; f < test.size(); ++f) {
    const auto globals = forward_kinematics(skeleton, test.frames[f]);
    BenchmarkItem item{f, {}};
    for (std::size_t j : joints) {
      Effector e;
      e.joint = j;
      e.type = EffectorType::Position;
      e.data.head<3>() = globals.positions[j];
      e.tolerance = kFivePointTolerance;
      item.effectors.effectors.push_back(e);
    }
    file.items.push_back(std::move(item));
  }
  return file;
}

std::vector<std::filesystem::path> save_benchmark(const std::vector<BenchmarkFile>& files,
                                                  const std::filesystem::path& dir, const SkeletonSpec& skeleton) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  for (const auto& file : files) {
    paths.push_back(dir / file.file_name());
    file.save(paths.back(), skeleton);
  }
  return paths;
}

std::vector<BenchmarkFile> load_benchmark(const std::filesystem::path& dir, const SkeletonSpec& skeleton) {
  if (!std::filesystem::is_directory(dir)) throw NotFound("no benchmark directory " + dir.string());
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw EmptyInput("no benchmark files in " + dir.string());
  std::vector<BenchmarkFile> files;
  for (const auto& p : paths) files.push_back(BenchmarkFile::load(p, skeleton));
  return files;
}

Predictor model_predictor(const Model& model) {
  return [&model](std::span<const EffectorSet> sets, std::span<const std::size_t>) {
    const auto outputs = model_forward_batch(model, sets, Mode::Eval);
    std::vector<Prediction> out;
    out.reserve(outputs.size());
    for (const auto& o : outputs) {
      out.push_back({o.draft_world().head<3>(), o.local_rotations, o.global.positions});
    }
    return out;
  };
}

Predictor oracle_predictor(const PoseDataset& test, const SkeletonSpec& skeleton) {
  return [&test, &skeleton](std::span<const EffectorSet>, std::span<const std::size_t> frames) {
    std::vector<Prediction> out;
    for (std::size_t f : frames) {
      const Pose& pose = test.frames.at(f);
      const auto locals = pose.local_matrices();
      out.push_back({pose.root_position, locals, forward_kinematics(skeleton, pose.root_position, locals).positions});
    }
    return out;
  };
}

Predictor constant_predictor(const Pose& pose, const SkeletonSpec& skeleton) {
  const auto locals = pose.local_matrices();
  const Prediction fixed{pose.root_position, locals, forward_kinematics(skeleton, pose.root_position, locals).positions};
  return [fixed](std::span<const EffectorSet> sets, std::span<const std::size_t>) {
    return std::vector<Prediction>(sets.size(), fixed);
  };
}

Metrics item_metrics(const Prediction& p, const GroundTruth& truth) {
  Metrics m;
  m.gpd_l2 = l2_error(truth.positions.front(), p.root_draft);
  for (std::size_t j = 0; j < truth.positions.size(); ++j) {
    m.ikd_l2 += l2_error(truth.positions[j], p.global_positions[j]);
    m.loc_geo += rotation_angle(truth.local_rotations[j], p.local_rotations[j]);
  }
  return m;
}

nlohmann::json MetricsReport::to_json() const {
  json doc = metrics_json(aggregate);
  doc["items"] = items;
  json list = json::array();
  for (const auto& f : files) {
    json row = metrics_json(f.mean);
    row["name"] = f.name;
    row["effector_count"] = f.effector_count;
    row["items"] = f.items;
    list.push_back(std::move(row));
  }
  doc["files"] = std::move(list);
  return doc;
}

void MetricsReport::write_table(std::ostream& out) const {
  char header[160];
  std::snprintf(header, sizeof header, "%-18s %8s  %14s  %14s  %14s\n", "file", "items", "L_gpd-L2^det",
                "L_ikd-L2^det", "L_loc-geo^det");
  out << header;
  for (const auto& f : files) write_row(out, f.name, std::to_string(f.items), f.mean);
  write_row(out, "all", std::to_string(items), aggregate);
}

MetricsReport evaluate(const Predictor& predictor, std::span<const BenchmarkFile> files, const PoseDataset& test,
                       const SkeletonSpec& skeleton, std::size_t batch_size) {
  check_test_split(test, skeleton);
  const std::uint64_t hash = dataset_hash(test);
  MetricsReport report;
  for (const auto& file : files) {
    if (file.dataset_hash != hash) {
      throw DataError(file.file_name() + " was generated from a different test split");
    }
    FileMetrics fm;
    fm.name = file.file_name();
    fm.effector_count = file.effector_count;
    fm.items = file.items.size();
    fm.mean = mean_metrics(predictor, file.items, test, skeleton, batch_size);
    report.items += fm.items;
    report.files.push_back(std::move(fm));
  }
  if (report.items > 0) {
    for (const auto& f : report.files) {
      const double w = static_cast<double>(f.items) / static_cast<double>(report.items);
      report.aggregate.gpd_l2 += w * f.mean.gpd_l2;
      report.aggregate.ikd_l2 += w * f.mean.ikd_l2;
      report.aggregate.loc_geo += w * f.mean.loc_geo;
    }
  }
  return report;
}

MetricsReport evaluate_model(const Model& model, std::span<const BenchmarkFile> files, const PoseDataset& test,
                             std::size_t batch_size) {
  return evaluate(model_predictor(model), files, test, model.skeleton(), batch_size);
}

std::string_view to_string(EffectorMix mix) {
  switch (mix) {
    case EffectorMix::PositionOnly:
      return "position";
    case EffectorMix::RotationOnly:
      return "rotation";
    case EffectorMix::Mixed:
      return "mixed";
  }
  return "unknown";
}

EffectorMix effector_mix_from_string(std::string_view name) {
  if (name == "position") return EffectorMix::PositionOnly;
  if (name == "rotation") return EffectorMix::RotationOnly;
  if (name == "mixed") return EffectorMix::Mixed;
  throw ConfigError("unknown effector mix '" + std::string(name) + "' (position, rotation or mixed)");
}

std::vector<SweepRow> effector_sweep(const Predictor& predictor, const PoseDataset& test, const SkeletonSpec& skeleton,
                                     EffectorMix mix, std::span<const double> fractions, std::uint64_t seed,
                                     const TrainConfig& noise) {
  check_test_split(test, skeleton);
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("sweep fraction " + std::to_string(f) + " outside (0, 1]");
  }
  const std::size_t J = skeleton.size();
  std::vector<EffectorSlot> joints;
  for (std::size_t j = 0; j < J; ++j) joints.emplace_back(j, EffectorType::Position);

  std::vector<SweepRow> rows;
  for (std::size_t r = 0; r < fractions.size(); ++r) {
    SweepRow row;
    row.fraction = fractions[r];
    row.joints = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(fractions[r] * J)), 1, J);
    Rng rng = file_rng(seed, r);
    std::vector<BenchmarkItem> items;
    for (std::size_t f = 0; f < test.size(); ++f) {
      const GroundTruth truth = ground_truth_from_pose(skeleton, test.frames[f]);
      std::vector<EffectorSlot> slots;
      for (const auto& [j, type] : sample_distinct_slots(rng, joints, row.joints)) {
        if (mix != EffectorMix::RotationOnly) slots.emplace_back(j, EffectorType::Position);
        if (mix != EffectorMix::PositionOnly) slots.emplace_back(j, EffectorType::Rotation);
      }
      items.push_back({f, draw_effectors(slots, truth, noise, rng)});
    }
    row.metrics = mean_metrics(predictor, items, test, skeleton, 256);
    rows.push_back(row);
  }
  return rows;
}

void write_sweep_table(std::ostream& out, std::span<const SweepRow> rows) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s %8s  %14s  %14s  %14s\n", "fraction", "joints", "L_gpd-L2^det", "L_ikd-L2^det",
                "L_loc-geo^det");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-10.3f %8zu  %14s  %14s  %14s\n", r.fraction, r.joints,
                  sci(r.metrics.gpd_l2).c_str(), sci(r.metrics.ikd_l2).c_str(), sci(r.metrics.loc_geo).c_str());
    out << buf;
  }
}

nlohmann::json sweep_to_json(std::span<const SweepRow> rows) {
  json list = json::array();
  for (const auto& r : rows) {
    json row = metrics_json(r.metrics);
    row["fraction"] = r.fraction;
    row["joints"] = r.joints;
    list.push_back(std::move(row));
  }
  return list;
}

}  // namespace protores

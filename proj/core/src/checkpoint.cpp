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

#include "protores/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "protores/error.hpp"

namespace protores {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

constexpr char kCheckpointMagic[4] = {'P', 'R', 'C', 'K'};
constexpr char kStateMagic[4] = {'P', 'R', 'T', 'S'};
constexpr std::uint32_t kStateVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& what) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) throw FormatError("truncated file while reading " + what);
  return value;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open '" + path.string() + "'");
  return in;
}

void check_magic(std::istream& in, const char (&magic)[4], const std::filesystem::path& path) {
  char got[4] = {};
  if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
    throw FormatError("'" + path.string() + "' has the wrong magic");
  }
}

nlohmann::json read_manifest(std::istream& in, const std::filesystem::path& path) {
  check_magic(in, kCheckpointMagic, path);
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto length = get<std::uint64_t>(in, "manifest length");
  if (length > (1ull << 31)) throw FormatError("manifest length is implausible");
  std::string text(length, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length))) throw FormatError("truncated manifest");
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
  }
}

void write_matrix_f64(std::ostream& out, const Eigen::MatrixXd& m) {
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}

Eigen::MatrixXd read_matrix_f64(std::istream& in) {
  const auto rows = get<std::uint64_t>(in, "rows");
  const auto cols = get<std::uint64_t>(in, "cols");
  if (rows > (1ull << 32) || cols > (1ull << 32)) throw FormatError("implausible tensor shape");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)))) {
    throw FormatError("truncated tensor payload");
  }
  return m;
}

void write_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const auto n = get<std::uint64_t>(in, "string length");
  if (n > (1ull << 31)) throw FormatError("implausible string length");
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw FormatError("truncated string");
  return s;
}

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  nlohmann::json tensors = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& t : model.parameters()) {
    tensors.push_back({{"name", t.name}, {"shape", {t.value.rows(), t.value.cols()}}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(t.value.size()) * sizeof(float);
  }
  const nlohmann::json manifest = {
      {"format", "protores-checkpoint"},
      {"config", model.config().to_json()},
      {"skeleton", model.skeleton().to_json()},
      {"tensors", tensors},
      {"payload_bytes", offset},
  };
  const std::string text = manifest.dump();
  // Write to a temporary and rename so an interrupted save never clobbers the last good file.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    auto out = open_out(tmp);
    out.write(kCheckpointMagic, 4);
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    std::vector<float> buffer;
    for (const auto& t : model.parameters()) {
      // Column-major order, matching Eigen storage.
      buffer.resize(static_cast<std::size_t>(t.value.size()));
      for (Eigen::Index i = 0; i < t.value.size(); ++i) buffer[static_cast<std::size_t>(i)] = static_cast<float>(t.value.data()[i]);
      out.write(reinterpret_cast<const char*>(buffer.data()), static_cast<std::streamsize>(buffer.size() * sizeof(float)));
    }
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

nlohmann::json read_checkpoint_manifest(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_manifest(in, path);
}

Model load_checkpoint(const std::filesystem::path& path) {
  auto in = open_in(path);
  const nlohmann::json manifest = read_manifest(in, path);
  try {
    const ModelConfig config = ModelConfig::from_json(manifest.at("config"));
    const SkeletonSpec skeleton = SkeletonSpec::from_json(manifest.at("skeleton"));
    const auto payload_bytes = manifest.at("payload_bytes").get<std::uint64_t>();
    std::vector<char> payload(payload_bytes);
    if (!in.read(payload.data(), static_cast<std::streamsize>(payload_bytes))) {
      throw FormatError("checkpoint payload is truncated");
    }
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after checkpoint payload");
    ModelParameters params;
    for (const auto& t : manifest.at("tensors")) {
      const auto rows = t.at("shape").at(0).get<Eigen::Index>();
      const auto cols = t.at("shape").at(1).get<Eigen::Index>();
      const auto offset = t.at("offset").get<std::uint64_t>();
      const auto bytes = static_cast<std::uint64_t>(rows * cols) * sizeof(float);
      if (rows < 0 || cols < 0 || offset + bytes > payload_bytes) {
        throw FormatError("tensor '" + t.at("name").get<std::string>() + "' lies outside the payload");
      }
      Eigen::MatrixXd m(rows, cols);
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        float f;
        std::memcpy(&f, payload.data() + offset + static_cast<std::uint64_t>(i) * sizeof(float), sizeof(float));
        m.data()[i] = f;
      }
      params.add(t.at("name").get<std::string>(), std::move(m));
    }
    return Model(config, skeleton, std::move(params));
  } catch (const ShapeError& e) {
    throw FormatError(std::string("checkpoint does not match its config: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid checkpoint config: ") + e.what());
  } catch (const SkeletonError& e) {
    throw FormatError(std::string("invalid checkpoint skeleton: ") + e.what());
  }
}

std::filesystem::path training_state_path(const std::filesystem::path& checkpoint) {
  return checkpoint.string() + ".state";
}

void save_training_state(const TrainingState& state, const std::filesystem::path& path) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    auto out = open_out(tmp);
    out.write(kStateMagic, 4);
    put<std::uint32_t>(out, kStateVersion);
    put<std::uint64_t>(out, state.step);
    put<double>(out, state.elapsed_seconds);
    put<std::uint64_t>(out, state.optimizer.step);
    write_string(out, state.rng_state);
    put<std::uint64_t>(out, state.parameters.size());
    for (std::size_t i = 0; i < state.parameters.size(); ++i) {
      write_string(out, state.parameters[i].name);
      write_matrix_f64(out, state.parameters[i].value);
      write_matrix_f64(out, state.optimizer.first_moment.at(i));
      write_matrix_f64(out, state.optimizer.second_moment.at(i));
    }
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

TrainingState load_training_state(const std::filesystem::path& path) {
  auto in = open_in(path);
  check_magic(in, kStateMagic, path);
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kStateVersion) throw FormatError("unsupported training state version " + std::to_string(version));
  TrainingState s;
  s.step = get<std::uint64_t>(in, "step");
  s.elapsed_seconds = get<double>(in, "elapsed");
  s.optimizer.step = get<std::uint64_t>(in, "optimizer step");
  s.rng_state = read_string(in);
  const auto count = get<std::uint64_t>(in, "tensor count");
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = read_string(in);
    s.parameters.add(std::move(name), read_matrix_f64(in));
    s.optimizer.first_moment.push_back(read_matrix_f64(in));
    s.optimizer.second_moment.push_back(read_matrix_f64(in));
  }
  return s;
}

}  // namespace protores

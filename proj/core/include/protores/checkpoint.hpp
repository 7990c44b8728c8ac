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
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "protores/model.hpp"

namespace protores {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// "PRCK", u32 version, u64 manifest length, JSON manifest (config, skeleton,
/// tensor names, shapes and byte offsets), then a little-endian f32 payload.
void save_checkpoint(const Model& model, const std::filesystem::path& path);

/// Throws FormatError on bad magic, version, truncation or manifest/shape mismatch.
Model load_checkpoint(const std::filesystem::path& path);

/// Parsed manifest only; does not read the payload.
nlohmann::json read_checkpoint_manifest(const std::filesystem::path& path);

/// Adam moments and counters that make a resumed run continue bit-exactly.
struct OptimizerState {
  Gradients first_moment;
  Gradients second_moment;
  std::uint64_t step = 0;
};

/// Everything besides the f32 checkpoint that a resumed run needs: full-precision
/// parameters, optimizer moments, step counter and generator state.
struct TrainingState {
  ModelParameters parameters;
  OptimizerState optimizer;
  std::string rng_state;
  std::uint64_t step = 0;
  double elapsed_seconds = 0.0;
};

void save_training_state(const TrainingState& state, const std::filesystem::path& path);
TrainingState load_training_state(const std::filesystem::path& path);

/// Sidecar path used by the trainer for a checkpoint.
std::filesystem::path training_state_path(const std::filesystem::path& checkpoint);

}  // namespace protores

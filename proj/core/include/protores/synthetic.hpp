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

#include "protores/dataset.hpp"

namespace protores {

/// Clip-structured poses driven by a low-dimensional latent trajectory. Stands
/// in for captured data when none is available.
struct SyntheticConfig {
  std::size_t clips = 100;
  std::size_t frames_per_clip = 20;
  std::size_t latent_dim = 8;
  double angle_scale = 0.6;  // radians, per Euler component
  double root_extent = 1.0;  // meters, half-width of the root x/z range
  std::uint64_t seed = 0;
};

PoseDataset generate_synthetic_dataset(const SkeletonSpec& skeleton, const SyntheticConfig& config);

}  // namespace protores

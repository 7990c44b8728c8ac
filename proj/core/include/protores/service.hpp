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

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "protores/solve.hpp"
#include "protores/training.hpp"

namespace protores {

struct ServiceConfig {
  std::vector<std::filesystem::path> checkpoints;
  std::string bind = "127.0.0.1:8080";  // host:port, port 0 picks a free one
  std::size_t workers = 2;              // solver threads shared by all connections
  std::size_t io_threads = 1;
  bool handle_signals = false;          // stop on SIGINT / SIGTERM
};

/// Defaults, then `key = value` lines from `file` (checkpoint, bind, workers,
/// io_threads), then PROTORES_CHECKPOINT / PROTORES_BIND, then `overrides`.
/// Checkpoint lists are comma separated. Throws ConfigError.
ServiceConfig resolve_service_config(const std::optional<std::filesystem::path>& file,
                                     const std::map<std::string, std::string>& overrides, const EnvLookup& env);

/// Same precedence with the file already parsed.
ServiceConfig resolve_service_config(const std::map<std::string, std::string>& file_values,
                                     const std::map<std::string, std::string>& overrides, const EnvLookup& env);

/// Keys understood by the service configuration.
const std::vector<std::string>& service_config_keys();

/// Loads every configured checkpoint. Throws ConfigError when none is configured
/// and rethrows load failures with the offending path.
std::shared_ptr<ModelRegistry> load_models(const ServiceConfig& config);

/// HTTP and WebSocket front end over a shared immutable model registry.
///
///   POST /v1/solve            solve request -> solve response; latency in X-Solve-Latency-Ms
///   GET  /v1/skeletons/{id}   skeleton document of a model
///   GET  /v1/health           {"status": "ok", "models": [...]}
///   WS   /v1/stream           solve requests in, responses out in order; while a
///                             solve runs only the newest waiting request is kept
class Service {
 public:
  Service(std::shared_ptr<const ModelRegistry> models, ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and serves on background threads. Returns the bound port.
  unsigned short start();
  /// Stops accepting, drops open connections and joins all threads. Idempotent.
  void stop();
  /// Blocks until the service stops.
  void wait();

  struct StreamStats {
    std::size_t requests = 0;
    std::size_t responses = 0;
    std::size_t coalesced = 0;  // requests replaced before they were solved
  };
  StreamStats stream_stats() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace protores

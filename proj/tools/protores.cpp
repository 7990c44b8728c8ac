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

// protores command line tool.

#include <algorithm>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "protores/bench.hpp"
#include "protores/checkpoint.hpp"
#include "protores/dataset.hpp"
#include "protores/error.hpp"
#include "protores/interchange.hpp"
#include "protores/service.hpp"
#include "protores/solve.hpp"
#include "protores/synthetic.hpp"
#include "protores/training.hpp"

namespace {

using namespace protores;
using nlohmann::json;

/// Options every subcommand accepts.
struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--config", common.config, "key = value config file (training, noise and service keys)");
  cmd->add_option("--seed", common.seed, "random seed (ignored where nothing is random)");
}

/// The --config file split by consumer.
struct ConfigFile {
  std::map<std::string, std::string> train;
  std::map<std::string, std::string> service;
  std::optional<std::string> skeleton;
};

ConfigFile read_config(const Common& common) {
  ConfigFile out;
  if (common.config.empty()) return out;
  const auto train_keys = TrainConfig::keys();
  const auto& service_keys = service_config_keys();
  for (const auto& [key, value] : read_key_value_file(common.config)) {
    if (std::find(train_keys.begin(), train_keys.end(), key) != train_keys.end()) {
      out.train[key] = value;
    } else if (std::find(service_keys.begin(), service_keys.end(), key) != service_keys.end()) {
      out.service[key] = value;
    } else if (key == "skeleton") {
      out.skeleton = value;
    } else {
      throw ConfigError(common.config + ": unknown key '" + key + "'");
    }
  }
  return out;
}

TrainConfig train_config(const Common& common, const ConfigFile& file, std::map<std::string, std::string> overrides) {
  if (common.seed) overrides["seed"] = std::to_string(*common.seed);
  return resolve_train_config(file.train, overrides, process_environment());
}

SkeletonSpec skeleton_from(const std::string& flag, const ConfigFile& file) {
  const std::string path = !flag.empty() ? flag : file.skeleton.value_or("");
  return path.empty() ? SkeletonSpec::humanoid64() : SkeletonSpec::load(path);
}

std::map<std::string, std::string> parse_sets(const std::vector<std::string>& sets) {
  std::map<std::string, std::string> out;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    out[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return out;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("expected a comma separated list of numbers, got '" + text + "'");
    }
  }
  return out;
}

void print_json(const json& doc) { std::cout << doc.dump(2) << '\n'; }

struct ModelFlags {
  std::string architecture = "protores";
  std::string encoder = "psa";
  std::size_t width = 1024;
  std::size_t encoder_blocks = 3;
  std::size_t decoder_blocks = 3;
  std::size_t layers = 3;
  std::size_t embedding_dim = 32;
  double dropout = 0.01;

  ModelConfig config(std::size_t joints) const {
    ModelConfig c;
    if (architecture == "protores") {
      c.architecture = Architecture::ProtoRes;
    } else if (architecture == "masked-fcr") {
      c.architecture = Architecture::MaskedFcr;
    } else {
      throw ConfigError("--arch must be protores or masked-fcr");
    }
    if (encoder == "psa") {
      c.encoder_variant = EncoderVariant::Psa;
    } else if (encoder == "mcdc") {
      c.encoder_variant = EncoderVariant::Mcdc;
    } else {
      throw ConfigError("--encoder must be psa or mcdc");
    }
    c.width = width;
    c.encoder_blocks = encoder_blocks;
    c.gpd_blocks = decoder_blocks;
    c.ikd_blocks = decoder_blocks;
    c.layers_per_block = layers;
    c.embedding_dim = embedding_dim;
    c.dropout = dropout;
    c.joint_count = joints;
    return c;
  }
};

int run(int argc, char** argv) {
  CLI::App app{"ProtoRes learned inverse kinematics: training, evaluation and pose solving"};
  app.require_subcommand(1);

  // train
  Common train_common;
  ModelFlags model_flags;
  std::string train_data, train_out, train_skeleton;
  std::vector<std::string> train_sets;
  bool train_resume = false;
  std::optional<std::size_t> train_max_steps;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a pose dataset");
  add_common(train_cmd, train_common);
  train_cmd->add_option("--data", train_data, "training split (.prsd)")->required();
  train_cmd->add_option("--out", train_out, "output directory for model.prck and metrics.jsonl")->required();
  train_cmd->add_option("--skeleton", train_skeleton, "skeleton file (default: built-in 64-joint humanoid)");
  train_cmd->add_option("--set", train_sets, "override a training key, e.g. --set batch_size=64");
  train_cmd->add_flag("--resume", train_resume, "continue from the checkpoint in --out");
  train_cmd->add_option("--max-steps", train_max_steps, "stop after this many steps");
  train_cmd->add_option("--arch", model_flags.architecture, "protores or masked-fcr");
  train_cmd->add_option("--encoder", model_flags.encoder, "psa or mcdc");
  train_cmd->add_option("--width", model_flags.width, "hidden width d_h");
  train_cmd->add_option("--encoder-blocks", model_flags.encoder_blocks);
  train_cmd->add_option("--decoder-blocks", model_flags.decoder_blocks, "blocks in each decoder");
  train_cmd->add_option("--layers", model_flags.layers, "layers per block");
  train_cmd->add_option("--embedding-dim", model_flags.embedding_dim);
  train_cmd->add_option("--dropout", model_flags.dropout);

  // eval
  Common eval_common;
  std::string eval_checkpoint, eval_data, eval_bench;
  bool eval_json = false, eval_five_point = false;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on benchmark files");
  add_common(eval_cmd, eval_common);
  eval_cmd->add_option("--checkpoint", eval_checkpoint)->required();
  eval_cmd->add_option("--data", eval_data, "test split the benchmark was generated from")->required();
  eval_cmd->add_option("--bench", eval_bench, "benchmark directory (default: generate from --seed)");
  eval_cmd->add_flag("--five-point", eval_five_point, "add the 5-point file when generating");
  eval_cmd->add_flag("--json", eval_json, "machine-readable output");

  // bench gen / bench sweep
  auto* bench_cmd = app.add_subcommand("bench", "Benchmark generation and sweeps");
  bench_cmd->require_subcommand(1);
  Common gen_common;
  std::string gen_data, gen_out, gen_skeleton;
  bool gen_five_point = false;
  auto* gen_cmd = bench_cmd->add_subcommand("gen", "Generate the frozen random benchmark (N = 6..12)");
  add_common(gen_cmd, gen_common);
  gen_cmd->add_option("--data", gen_data, "test split (.prsd)")->required();
  gen_cmd->add_option("--out", gen_out, "output directory")->required();
  gen_cmd->add_option("--skeleton", gen_skeleton);
  gen_cmd->add_flag("--five-point", gen_five_point, "also write the 5-point file");

  Common sweep_common;
  std::string sweep_checkpoint, sweep_data, sweep_mix = "mixed", sweep_fractions = "0.05,0.1,0.25,0.5,0.75,1";
  bool sweep_json = false;
  auto* sweep_cmd = bench_cmd->add_subcommand("sweep", "Metrics against the share of joints used as effectors");
  add_common(sweep_cmd, sweep_common);
  sweep_cmd->add_option("--checkpoint", sweep_checkpoint)->required();
  sweep_cmd->add_option("--data", sweep_data, "test split (.prsd)")->required();
  sweep_cmd->add_option("--mix", sweep_mix, "position, rotation or mixed");
  sweep_cmd->add_option("--fractions", sweep_fractions, "comma separated fractions in (0, 1]");
  sweep_cmd->add_flag("--json", sweep_json);

  // solve
  Common solve_common;
  std::string solve_effectors, solve_checkpoint, solve_out, solve_format = "quaternion";
  bool solve_globals = false;
  auto* solve_cmd = app.add_subcommand("solve", "Solve one effector file into a pose file");
  add_common(solve_cmd, solve_common);
  solve_cmd->add_option("--effectors", solve_effectors, "effector set document")->required();
  solve_cmd->add_option("--checkpoint", solve_checkpoint)->required();
  solve_cmd->add_option("--out", solve_out, "pose document to write (default: stdout)");
  solve_cmd->add_option("--format", solve_format, "quaternion or sixd");
  solve_cmd->add_flag("--global-positions", solve_globals, "include world joint positions");

  // stats
  Common stats_common;
  std::string stats_data, stats_skeleton;
  bool stats_json = false;
  auto* stats_cmd = app.add_subcommand("stats", "Per-joint position and rotation standard deviations");
  add_common(stats_cmd, stats_common);
  stats_cmd->add_option("--data", stats_data)->required();
  stats_cmd->add_option("--skeleton", stats_skeleton);
  stats_cmd->add_flag("--json", stats_json);

  // serve
  Common serve_common;
  std::vector<std::string> serve_checkpoints;
  std::string serve_bind;
  std::optional<std::size_t> serve_workers;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP / WebSocket solve service");
  add_common(serve_cmd, serve_common);
  serve_cmd->add_option("--checkpoint", serve_checkpoints, "checkpoint to serve (repeatable)");
  serve_cmd->add_option("--bind", serve_bind, "host:port");
  serve_cmd->add_option("--workers", serve_workers, "solver threads");

  // inspect
  Common inspect_common;
  std::string inspect_checkpoint;
  bool inspect_json = false;
  auto* inspect_cmd = app.add_subcommand("inspect", "Print a checkpoint manifest");
  add_common(inspect_cmd, inspect_common);
  inspect_cmd->add_option("checkpoint", inspect_checkpoint)->required();
  inspect_cmd->add_flag("--json", inspect_json);

  // dataset utilities
  Common synth_common;
  std::string synth_out, synth_skeleton;
  SyntheticConfig synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic clip-structured dataset");
  add_common(synth_cmd, synth_common);
  synth_cmd->add_option("--out", synth_out)->required();
  synth_cmd->add_option("--skeleton", synth_skeleton);
  synth_cmd->add_option("--clips", synth.clips);
  synth_cmd->add_option("--frames", synth.frames_per_clip, "frames per clip");

  Common import_common;
  std::string import_csv_path, import_out, import_skeleton, import_rotations = "quaternion";
  auto* import_cmd = app.add_subcommand("import", "Convert a CSV pose table to the binary format");
  add_common(import_cmd, import_common);
  import_cmd->add_option("--csv", import_csv_path)->required();
  import_cmd->add_option("--out", import_out)->required();
  import_cmd->add_option("--skeleton", import_skeleton);
  import_cmd->add_option("--rotations", import_rotations, "quaternion, euler-rad or euler-deg");

  Common split_common;
  std::string split_data, split_out, split_skeleton, split_proportions = "0.8,0.1,0.1";
  std::optional<double> split_subsample;
  auto* split_cmd = app.add_subcommand("split", "Split by clip into train/valid/test files");
  add_common(split_cmd, split_common);
  split_cmd->add_option("--data", split_data)->required();
  split_cmd->add_option("--out", split_out, "output directory")->required();
  split_cmd->add_option("--skeleton", split_skeleton);
  split_cmd->add_option("--proportions", split_proportions);
  split_cmd->add_option("--subsample", split_subsample, "keep this fraction of frames first");

  Common skeleton_common;
  std::string skeleton_out;
  auto* skeleton_cmd = app.add_subcommand("skeleton", "Write the built-in humanoid skeleton file");
  add_common(skeleton_cmd, skeleton_common);
  skeleton_cmd->add_option("--out", skeleton_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    // Usage of the innermost subcommand that was recognized.
    const CLI::App* where = &app;
    while (!where->get_subcommands().empty()) where = where->get_subcommands().front();
    std::cerr << "error: " << e.what() << "\n\n" << where->help();
    return 2;
  }

  if (*train_cmd) {
    const auto file = read_config(train_common);
    const auto skel = skeleton_from(train_skeleton, file);
    const auto config = train_config(train_common, file, parse_sets(train_sets));
    const auto data = load_dataset(train_data, skel);
    const auto model_config = model_flags.config(skel.size());
    const std::filesystem::path checkpoint = std::filesystem::path(train_out) / "model.prck";
    Model model = train_resume && std::filesystem::exists(checkpoint) ? load_checkpoint(checkpoint)
                                                                        : Model(model_config, skel, config.seed);
    TrainOptions options;
    options.output_dir = train_out;
    options.resume = train_resume;
    options.max_steps = train_max_steps;
    options.on_log = [](std::size_t step, const LossBreakdown& loss) {
      std::cerr << "step " << step << "  total " << loss.total << "  ikd_l2_det " << loss.ikd_l2_det
                << "  loc_geo_det " << loss.loc_geo_det << '\n';
    };
    const auto result = train(model, data, config, options);
    std::cout << "trained " << result.steps << " steps; checkpoint " << result.checkpoint.string() << '\n';
    return 0;
  }

  if (*eval_cmd) {
    const auto file = read_config(eval_common);
    const auto config = train_config(eval_common, file, {});
    const Model model = load_checkpoint(eval_checkpoint);
    const auto test = load_dataset(eval_data, model.skeleton());
    std::vector<BenchmarkFile> files;
    if (!eval_bench.empty()) {
      files = load_benchmark(eval_bench, model.skeleton());
    } else {
      files = generate_random_benchmark(test, model.skeleton(), eval_common.seed.value_or(0), config);
      if (eval_five_point) files.push_back(generate_5point_benchmark(test, model.skeleton()));
    }
    const auto report = evaluate_model(model, files, test);
    if (eval_json) {
      print_json(report.to_json());
    } else {
      report.write_table(std::cout);
    }
    return 0;
  }

  if (*gen_cmd) {
    const auto file = read_config(gen_common);
    const auto skel = skeleton_from(gen_skeleton, file);
    const auto config = train_config(gen_common, file, {});
    const auto test = load_dataset(gen_data, skel);
    auto files = generate_random_benchmark(test, skel, gen_common.seed.value_or(0), config);
    if (gen_five_point) files.push_back(generate_5point_benchmark(test, skel));
    for (const auto& p : save_benchmark(files, gen_out, skel)) std::cout << p.string() << '\n';
    return 0;
  }

  if (*sweep_cmd) {
    const auto file = read_config(sweep_common);
    const auto config = train_config(sweep_common, file, {});
    const Model model = load_checkpoint(sweep_checkpoint);
    const auto test = load_dataset(sweep_data, model.skeleton());
    const auto fractions = parse_list(sweep_fractions);
    const auto rows = effector_sweep(model_predictor(model), test, model.skeleton(), effector_mix_from_string(sweep_mix),
                                     fractions, sweep_common.seed.value_or(0), config);
    if (sweep_json) {
      print_json(sweep_to_json(rows));
    } else {
      write_sweep_table(std::cout, rows);
    }
    return 0;
  }

  if (*solve_cmd) {
    (void)read_config(solve_common);
    ModelRegistry registry;
    const std::string id = registry.load(solve_checkpoint);
    const Model& model = registry.get(id);
    SolveRequest request;
    request.model = id;
    request.effectors = load_effector_set(solve_effectors, model.skeleton());
    request.options = {rotation_format_from_string(solve_format, "--format"), solve_globals};
    const auto response = solve(registry, request);
    const json pose =
        pose_to_json(model.skeleton(), response.root_position, response.local_rotations, request.options);
    if (solve_out.empty()) {
      print_json(pose);
    } else {
      write_json_file(pose, solve_out);
    }
    return 0;
  }

  if (*stats_cmd) {
    const auto file = read_config(stats_common);
    const auto skel = skeleton_from(stats_skeleton, file);
    const auto stats = dataset_stats(load_dataset(stats_data, skel), skel);
    if (stats_json) {
      print_json(stats_to_json(stats));
    } else {
      write_stats_table(std::cout, stats);
    }
    return 0;
  }

  if (*serve_cmd) {
    const auto file = read_config(serve_common);
    std::map<std::string, std::string> overrides;
    if (!serve_checkpoints.empty()) {
      std::string joined;
      for (const auto& c : serve_checkpoints) joined += (joined.empty() ? "" : ",") + c;
      overrides["checkpoint"] = joined;
    }
    if (!serve_bind.empty()) overrides["bind"] = serve_bind;
    if (serve_workers) overrides["workers"] = std::to_string(*serve_workers);
    auto config = resolve_service_config(file.service, overrides, process_environment());
    config.handle_signals = true;
    Service service(load_models(config), config);
    const auto port = service.start();
    std::cerr << "serving on " << config.bind.substr(0, config.bind.rfind(':')) << ":" << port << '\n';
    service.wait();
    return 0;
  }

  if (*inspect_cmd) {
    (void)read_config(inspect_common);
    const json manifest = read_checkpoint_manifest(inspect_checkpoint);
    if (inspect_json) {
      print_json(manifest);
    } else {
      std::cout << "config: " << manifest.at("config").dump() << '\n';
      std::cout << "joints: " << manifest.at("skeleton").at("joints").size() << '\n';
      std::cout << "tensors:\n";
      for (const auto& t : manifest.at("tensors")) {
        std::cout << "  " << t.at("name").get<std::string>() << "  " << t.at("shape").dump() << '\n';
      }
    }
    return 0;
  }

  if (*synth_cmd) {
    const auto file = read_config(synth_common);
    const auto skel = skeleton_from(synth_skeleton, file);
    synth.seed = synth_common.seed.value_or(0);
    save_dataset(generate_synthetic_dataset(skel, synth), synth_out);
    return 0;
  }

  if (*import_cmd) {
    const auto file = read_config(import_common);
    const auto skel = skeleton_from(import_skeleton, file);
    CsvColumnSpec spec;
    if (import_rotations == "quaternion") {
      spec.rotations = RotationColumns::Quaternion;
    } else if (import_rotations == "euler-rad") {
      spec.rotations = RotationColumns::EulerRadians;
    } else if (import_rotations == "euler-deg") {
      spec.rotations = RotationColumns::EulerDegrees;
    } else {
      throw ConfigError("--rotations must be quaternion, euler-rad or euler-deg");
    }
    ImportReport report;
    save_dataset(import_csv(import_csv_path, skel, spec, &report), import_out);
    std::cout << "imported " << report.rows << " rows\n";
    return 0;
  }

  if (*split_cmd) {
    const auto file = read_config(split_common);
    const auto skel = skeleton_from(split_skeleton, file);
    const auto p = parse_list(split_proportions);
    if (p.size() != 3) throw ConfigError("--proportions needs three values");
    PoseDataset data = load_dataset(split_data, skel);
    const std::uint64_t seed = split_common.seed.value_or(0);
    if (split_subsample) data = subsample_frames(data, *split_subsample, seed);
    const auto split = split_by_clip(data, {p[0], p[1], p[2]}, seed);
    std::filesystem::create_directories(split_out);
    const std::filesystem::path out(split_out);
    save_dataset(split.train, out / "train.prsd");
    save_dataset(split.valid, out / "valid.prsd");
    save_dataset(split.test, out / "test.prsd");
    std::cout << "train " << split.train.size() << ", valid " << split.valid.size() << ", test " << split.test.size()
              << " frames\n";
    return 0;
  }

  if (*skeleton_cmd) {
    (void)read_config(skeleton_common);
    SkeletonSpec::humanoid64().save(skeleton_out);
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  protores::retain_freed_memory();
  try {
    return run(argc, argv);
  } catch (const protores::BadRequest& e) {
    std::cerr << "error: " << e.what() << (e.field().empty() ? "" : " (at " + e.field() + ")") << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return 1;
}

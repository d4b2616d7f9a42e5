// Copyright 2026 The simhammer Authors
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

// simhammer <calibrate|fig2|fig3a|fig3b|scan|attack> --config <path>
//           --seed <u64> --out <dir> [--set key=value ...]
//
// The output directory is --out, else $SIMHAMMER_OUT, else output.dir.
// Exit status: 0 success, 1 usage or configuration error, 2 run failure.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "simhammer/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"simhammer: speculative rowhammer simulator"};
  std::string command;
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> overrides;
  bool quiet = false;

  app.add_option("command", command, "calibrate | fig2 | fig3a | fig3b | scan | attack")
      ->required()
      ->check(CLI::IsMember(simhammer::command_names()));
  app.add_option("--config,-c", config_path, "configuration file")->check(CLI::ExistingFile);
  app.add_option("--preset,-p", preset, "built-in preset used when no --config is given")
      ->check(CLI::IsMember(simhammer::preset_names()));
  app.add_option("--seed,-s", seed, "simulation seed");
  app.add_option("--out,-o", out_dir, "output directory");
  app.add_option("--set", overrides, "key=value override, repeatable");
  app.add_flag("--quiet,-q", quiet, "no progress output");
  CLI11_PARSE(app, argc, argv);

  simhammer::ExperimentConfig cfg;
  try {
    simhammer::ConfigSource src = config_path.empty()
                                      ? simhammer::ConfigSource::preset(preset.empty() ? "t420"
                                                                                       : preset)
                                      : simhammer::ConfigSource::from_file(config_path);
    for (const auto& o : overrides) src.set(o);
    if (seed) src.set("seed", std::to_string(*seed));
    cfg = simhammer::build_config(src);
  } catch (const simhammer::SimError& e) {
    std::cerr << "simhammer: " << e.what() << '\n';
    return 1;
  }

  if (out_dir.empty()) {
    const char* env = std::getenv("SIMHAMMER_OUT");
    out_dir = env && *env ? env : cfg.output_dir;
  }

  std::ostream null_stream(nullptr);
  try {
    const auto files = simhammer::run_command(command, cfg, out_dir, quiet ? null_stream : std::cout);
    if (!quiet) {
      for (const auto& f : files) std::cout << "wrote " << f.string() << '\n';
    }
  } catch (const simhammer::ConfigError& e) {
    std::cerr << "simhammer: configuration error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "simhammer: " << command << " failed: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

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

// Key-value experiment configuration.
//
//   # comment
//   include = t420            preset name, or a path relative to this file
//   dram.rows = 32768
//   template.cell = 0:0:0:0:1000:17:3:1to0:110933
//   fig3a.budget = 2h         durations accept s, ms, us, min, h suffixes
//
// Later assignments override earlier ones; template.cell and scan.region
// accumulate (template.clear / scan.clear drop what came before).

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "simhammer/attack.hpp"
#include "simhammer/gadget.hpp"
#include "simhammer/machine.hpp"

namespace simhammer {

struct ConfigEntry {
  std::string key;
  std::string value;
  std::string origin;  // file:line, for diagnostics
};

/// Flattened key-value entries with includes expanded in place.
class ConfigSource {
 public:
  static ConfigSource from_file(const std::filesystem::path& path);
  static ConfigSource from_string(const std::string& text, const std::string& origin = "<string>",
                                  const std::filesystem::path& base_dir = {});
  static ConfigSource preset(const std::string& name);

  /// Appends `key=value`; used for command-line overrides.
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  const std::vector<ConfigEntry>& entries() const { return entries_; }

 private:
  void parse(const std::string& text, const std::string& origin,
             const std::filesystem::path& base_dir, int depth);

  std::vector<ConfigEntry> entries_;
};

/// Names of the built-in presets.
std::vector<std::string> preset_names();
/// Raw text of a built-in preset; throws ConfigError for unknown names.
const std::string& preset_text(const std::string& name);

struct ExperimentConfig {
  MachineConfig machine;
  GadgetConfig gadget;
  std::uint64_t array_size = 16;
  AttackConfig attack;
  bool attacker_knows_physical = false;

  /// Victim row used by the single-pair experiments (calibrate, fig2,
  /// fig3a, fig3b); aggressors are the rows on either side.
  DramAddress target;
  std::vector<ScanRegion> scan_regions;
  Cycles scan_budget = 0;
  Cycles scan_padding = 0;

  std::uint64_t fig2_trials = 1000;
  std::vector<Cycles> fig3a_padding;
  Cycles fig3a_budget = 0;
  Cycles fig3a_jitter_max = 0;
  unsigned fig3a_threads = 0;  // 0 = hardware concurrency
  std::size_t fig3b_samples = 10000;
  Cycles fig3b_bin_width = 20;

  std::uint64_t seed = 0;
  std::string output_dir = "out";
  bool output_wall_time = false;

  double frequency_hz() const { return machine.cpu.frequency_hz; }
  double seconds(Cycles c) const { return static_cast<double>(c) / frequency_hz(); }
};

/// Interprets the entries. Throws ConfigError on unknown keys, malformed
/// values or an inconsistent machine description.
ExperimentConfig build_config(const ConfigSource& source);

/// "0:100:10, 837, 840:845" -> sorted unique list (ranges are inclusive).
std::vector<Cycles> parse_cycle_list(const std::string& text);

/// Integer cycles, or a duration with a unit suffix converted at frequency_hz.
Cycles parse_cycles(const std::string& text, double frequency_hz);

}  // namespace simhammer

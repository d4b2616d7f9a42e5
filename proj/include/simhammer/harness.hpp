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

// Experiments and their file outputs. Every run_* function builds fresh
// machines from the config, so results depend on the config and seed only.
//
// Output files (all under the output directory):
//   calibrate  calibration.json
//   fig2       fig2.csv                 trial,drain_on,success
//   fig3a      fig3a.csv                padding,per_hammer_cost,first_flip_cycles,first_flip_seconds
//   fig3b      fig3b.csv + fig3b.json   bin_lo,bin_hi,count
//   scan       pairs.csv + scan_flips.csv + scan.json
//   attack     attack.json + attack_flips.csv + pairs.csv

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "simhammer/attack.hpp"
#include "simhammer/config.hpp"

namespace simhammer {

/// Aggressor pair around cfg.target (rows target-1 and target+1).
HammerPair target_pair(const Machine& m, const ExperimentConfig& cfg);

struct CalibrateResult {
  CalibrationReport report;
  unsigned counter_bits = 0;
};
CalibrateResult run_calibrate(const ExperimentConfig& cfg);

struct Fig2Row {
  std::uint64_t trial = 0;
  bool drain_on = false;
  bool success = false;
  Cycles probe_latency = 0;
};
struct Fig2Result {
  unsigned train_k = 0;
  std::uint64_t drain_len = 0;
  std::vector<Fig2Row> rows;  // drain-off series, then drain-on series
  std::uint64_t successes(bool drain_on) const;
};
Fig2Result run_fig2(const ExperimentConfig& cfg);

struct Fig3aRow {
  Cycles padding = 0;
  Cycles per_hammer_cost = 0;
  std::optional<Cycles> first_flip;  // virtual cycles from the start of hammering
  bool short_circuited = false;
};
/// Independent instances, possibly on several threads; rows follow the
/// padding order whatever the completion order.
std::vector<Fig3aRow> run_fig3a(const ExperimentConfig& cfg);

struct Fig3bBin {
  Cycles lo = 0;
  Cycles hi = 0;  // exclusive
  std::uint64_t count = 0;
};
struct Fig3bResult {
  unsigned train_k = 0;
  std::uint64_t drain_len = 0;
  std::vector<Cycles> samples;
  std::vector<Fig3bBin> bins;
  Cycles min = 0;
  Cycles max = 0;
  double mean = 0.0;
  double fraction_1200_1400 = 0.0;
  double fraction_below_1500 = 0.0;
};
Fig3bResult run_fig3b(const ExperimentConfig& cfg);

ScanResult run_scan(const ExperimentConfig& cfg);

struct AttackRun {
  AttackOutcome outcome;
  std::uint64_t template_cells = 0;
};
AttackRun run_attack(const ExperimentConfig& cfg);

/// Builds the plan run_attack executes.
AttackPlan attack_plan(const ExperimentConfig& cfg);

// Serialization. Strings are byte-stable for a given input.
std::string calibration_json(const ExperimentConfig& cfg, const CalibrateResult& r);
std::string fig2_csv(const Fig2Result& r);
std::string fig3a_csv(const ExperimentConfig& cfg, const std::vector<Fig3aRow>& rows);
std::string fig3b_csv(const Fig3bResult& r);
std::string fig3b_json(const Fig3bResult& r);
std::string pairs_csv(const DramGeometry& g, const ScanResult& scan);
std::string flips_csv(const std::vector<FlipEvent>& flips);
std::string scan_json(const ExperimentConfig& cfg, const ScanResult& scan);
std::string attack_json(const ExperimentConfig& cfg, const AttackRun& run, double wall_seconds);

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"calibrate", "fig2",  "fig3a",
                                                 "fig3b",     "scan",  "attack"};
  return names;
}

/// Runs one command and writes its files into out_dir (created if needed).
/// Human-readable progress goes to `log`. Returns the paths written.
std::vector<std::filesystem::path> run_command(const std::string& command,
                                               const ExperimentConfig& cfg,
                                               const std::filesystem::path& out_dir,
                                               std::ostream& log);

}  // namespace simhammer

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

// Bounds-check-bypass victim and the rounds built on top of it:
//
//   verify round   flush vul_addr, train, flush array_size, drain, call with
//                  the out-of-bounds index, then time a load of vul_addr.
//   hammer round   flush target (and partner), train, flush array_size,
//                  drain, out-of-bounds call, then a direct load of the
//                  partner. This is one iteration of hybrid hammering.
//
// plus the calibrations for the training count, the drain length and the
// per-round cost.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "simhammer/machine.hpp"

namespace simhammer {

struct VictimArray {
  VirtAddr base;
  std::uint64_t array_size = 16;  // one-byte elements
  VirtAddr array_size_location;
};

/// Picks a victim layout for attacking `target`: the array lives at the
/// start of the target's bank neighbourhood and array_size sits in the same
/// bank as the target, on a row with no template cells next to it, so its
/// load always misses the row buffer. Simulator-side setup, not attacker
/// logic.
VictimArray make_victim_layout(const Machine& machine, VirtAddr target,
                               std::uint64_t array_size = 16);

struct RoundResult {
  bool success = false;
  Cycles probe_latency = 0;
  Cycles round_cost = 0;
  std::uint64_t mispredict_count_delta = 0;
  /// Ground truth from the speculation engine.
  bool transient_executed = false;
};

struct GadgetConfig {
  Cycles threshold = TimingModel::kClassifyThreshold;
  std::uint64_t trials = 1000;  // drain calibration must succeed N/N
  std::uint64_t drain_max = 4096;
  unsigned baseline_training = 5;
  unsigned calibration_rounds = 10;
  bool reset_predictor = true;
  std::uint64_t branch_id = 0x401a2c;
};

enum class Serializer : std::uint8_t { None, Fence, Syscall };

struct VerifyOptions {
  bool flush_vul = true;
  Serializer serializer = Serializer::None;
};

enum class FlushMode : std::uint8_t { Clflush, Eviction };

struct HammerRoundOptions {
  std::optional<VirtAddr> partner;
  /// Hammer the partner speculatively too (a second full gadget round).
  bool speculative_partner = false;
  Cycles padding = 0;
  FlushMode flush_mode = FlushMode::Clflush;
  /// Eviction sets keyed by the line being evicted (virtual address).
  const std::map<std::uint64_t, std::vector<VirtAddr>>* eviction_sets = nullptr;
};

struct CalibrationReport {
  unsigned min_training = 0;
  std::uint64_t drain_len = 0;
  Cycles round_cost = 0;
};

class Gadget {
 public:
  Gadget(Machine& machine, VictimArray victim, GadgetConfig config = {});

  struct CallOutcome {
    bool transient_executed = false;
    bool mispredicted_taken = false;
  };

  /// if (index < array_size) access victim_array + index
  CallOutcome victim_function(std::uint64_t index);

  /// One round of timing-based verification. Throws MisuseError when
  /// vul_addr is inside the array.
  RoundResult verify_round(unsigned train_k, std::uint64_t drain_len, VirtAddr vul_addr,
                           VerifyOptions opts = {});

  /// One speculative-hammering iteration against `target`. round_cost is the
  /// full iteration cost; probe_latency is 0 (no probe).
  RoundResult hammer_round(VirtAddr target, unsigned train_k, std::uint64_t drain_len,
                           const HammerRoundOptions& opts = {});

  /// Smallest training count whose mispredicted-taken PMC count still matches
  /// the baseline. Probe rounds target vul_addr with no drain; the counter
  /// does not depend on it.
  unsigned calibrate_min_training(VirtAddr vul_addr) const;

  /// Smallest drain length for which `trials` consecutive verify rounds all
  /// succeed. Throws CalibrationError if none up to drain_max works.
  std::uint64_t calibrate_drain_loop(unsigned train_k, VirtAddr vul_addr) const;

  /// Noise-free steady-state cost of one hammer round on a forked machine.
  Cycles measure_round_cost(VirtAddr target, unsigned train_k, std::uint64_t drain_len,
                            const HammerRoundOptions& opts = {}) const;

  /// `n` consecutive hammer-round costs on a forked machine, jitter as
  /// configured, after one warm-up round.
  std::vector<Cycles> sample_round_costs(VirtAddr target, unsigned train_k,
                                         std::uint64_t drain_len, std::size_t n,
                                         const HammerRoundOptions& opts = {}) const;

  std::uint64_t oob_index(VirtAddr va) const { return va.value - victim_.base.value; }
  bool in_bounds(VirtAddr va) const { return oob_index(va) < victim_.array_size; }

  const VictimArray& victim() const { return victim_; }
  const GadgetConfig& config() const { return config_; }
  Machine& machine() { return machine_; }

 private:
  void evict_or_flush(VirtAddr va, const HammerRoundOptions& opts);
  void train(unsigned train_k);

  Machine& machine_;
  VictimArray victim_;
  GadgetConfig config_;
};

}  // namespace simhammer

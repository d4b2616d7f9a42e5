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

// End-to-end pipeline: find vulnerable aggressor pairs by direct
// double-sided hammering, then re-create the flips through speculative
// hammering of one aggressor while loading the other directly.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "simhammer/gadget.hpp"
#include "simhammer/machine.hpp"

namespace simhammer {

/// What the attacker may learn about the address space.
struct AttackerView {
  bool knows_physical = false;

  /// Counted page-map lookup. Throws MisuseError in randomized mode when
  /// the view has no physical knowledge.
  PhysAddr physical(const Machine& m, VirtAddr va) const;
  VirtAddr virtual_of(const Machine& m, PhysAddr pa) const;
};

struct HammerPair {
  VirtAddr addr_a;
  VirtAddr addr_b;
  DramAddress row_a;
  DramAddress row_b;

  bool hammerable() const { return row_a.same_bank(row_b) && row_a.row != row_b.row; }
  /// Row sandwiched by a double-sided pair.
  std::uint32_t victim_row() const { return (row_a.row + row_b.row) / 2; }
};

struct FlipReport {
  std::vector<FlipEvent> flips;
  std::uint64_t iterations = 0;
  Cycles virtual_time = 0;
  double wall_time = 0.0;  // seconds, informational
  Cycles per_iteration_cost = 0;
  /// The loop stopped simulating because no adjacent cell can reach its
  /// threshold at this cost; iterations/virtual_time still cover the budget.
  bool fast_forwarded = false;

  bool success() const { return !flips.empty(); }
};

/// Rows [row_lo, row_hi] of one bank.
struct ScanRegion {
  DramAddress bank;
  std::uint32_t row_lo = 0;
  std::uint32_t row_hi = 0;
};

struct ScanHit {
  HammerPair pair;
  std::vector<FlipEvent> flips;
};

struct ScanResult {
  std::vector<ScanHit> hits;
  bool partial = false;
  /// Flips outside every region's interior rows; restored, not reported.
  std::uint64_t stray_flips = 0;
  std::uint64_t pairs_scanned = 0;
  Cycles per_iteration_cost = 0;
  Cycles elapsed = 0;
};

/// Double-sided hammer iteration: `padding` nops, clflush both, load both.
void direct_iteration(Machine& m, VirtAddr a, VirtAddr b, Cycles padding);

/// Noise-free cost of direct_iteration in steady state.
Cycles direct_iteration_cost(const TimingModel& t, Cycles padding);

/// Whether some phase of a periodic hammer with period `cost` can put
/// `threshold` activations of one row into a refresh window.
bool flip_reachable(Cycles refresh_interval, Cycles cost, std::uint64_t threshold);

/// Direct double-sided hammering until the first flip or `budget` cycles.
FlipReport direct_hammer(Machine& m, const HammerPair& pair, Cycles padding, Cycles budget);

/// Hammers every (r, r+2) pair inside each region for one full refresh
/// window, aligned so that aggressor a's first activation opens the window.
/// Only flips in rows with both neighbours inside a region are reported.
/// Memory is restored (and weak cells re-armed) afterwards.
ScanResult scan_vulnerable_pairs(Machine& m, const AttackerView& view,
                                 std::span<const ScanRegion> regions, Cycles budget,
                                 Cycles padding = 0);

enum class HammerMode : std::uint8_t { Hybrid, PureSpeculative };

struct AttackConfig {
  std::optional<unsigned> train_k;        // calibrated when unset
  std::optional<std::uint64_t> drain_len; // calibrated when unset
  Cycles padding = 0;
  HammerMode mode = HammerMode::Hybrid;
  FlushMode flush_mode = FlushMode::Clflush;
  std::size_t eviction_set_size = 0;  // 0 = cache ways
  Cycles pair_budget = 0;             // 0 = whole remaining budget
  Cycles budget = 0;
};

/// Speculative hammering of pair.addr_a with direct loads of pair.addr_b.
/// Requires train_k and drain_len. Throws MisuseError for pairs that are not
/// in one bank.
FlipReport speculative_hammer(Machine& m, Gadget& gadget, const HammerPair& pair,
                              const AttackConfig& config, Cycles budget);

/// Speculative hammering of a single address; needs the closed-page policy.
FlipReport one_location_hammer(Machine& m, Gadget& gadget, VirtAddr addr,
                               const AttackConfig& config, Cycles budget);

struct AttackPlan {
  std::vector<ScanRegion> regions;
  Cycles scan_budget = 0;
  AttackConfig attack;
  GadgetConfig gadget;
  std::uint64_t array_size = 16;
  AttackerView attacker;  // view used during the hammering phase
};

struct AttackOutcome {
  ScanResult scan;
  CalibrationReport calibration;
  std::optional<std::size_t> pair_index;  // index into scan.hits
  FlipReport report;                      // the hammering phase only
  bool no_target = false;
  Cycles scan_time = 0;
  Cycles total_time = 0;
  std::uint64_t page_queries_during_attack = 0;
};

AttackOutcome full_attack(Machine& m, const AttackPlan& plan);

}  // namespace simhammer

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

// Virtual clock, pattern-history-table branch predictor, speculation window
// model with a scalar resolution backlog, and a performance-counter analog.

#pragma once

#include <cstdint>
#include <vector>

#include "simhammer/common.hpp"

namespace simhammer {

enum class Prediction : std::uint8_t { NotTaken, Taken };

/// Table of k-bit saturating counters. A counter predicts taken once it
/// reaches 2^(k-1); every entry starts at 0 (strongly not-taken).
class BranchPredictor {
 public:
  explicit BranchPredictor(unsigned counter_bits = 3, std::size_t entries = 4096);

  Prediction predict(std::uint64_t branch_id) const;
  void update(std::uint64_t branch_id, bool taken);

  std::uint32_t counter(std::uint64_t branch_id) const;
  std::uint32_t max_counter() const { return (1U << bits_) - 1; }
  std::uint32_t taken_threshold() const { return 1U << (bits_ - 1); }
  unsigned counter_bits() const { return bits_; }

  void reset();
  void reset_entry(std::uint64_t branch_id);

 private:
  std::size_t slot(std::uint64_t branch_id) const { return branch_id % table_.size(); }

  unsigned bits_;
  std::vector<std::uint32_t> table_;
};

struct SpeculationContext {
  Cycles base_window = 0;         // latency of the unresolved guard operand
  Cycles pending_resolution = 0;  // backlog from still-unresolved outer branches

  Cycles effective_window() const {
    return pending_resolution >= base_window ? 0 : base_window - pending_resolution;
  }
};

/// Whether a transient load of the given latency completes inside the window.
/// The caller has already established that the guard is predicted taken.
inline bool speculate(const SpeculationContext& ctx, Cycles transient_load_latency) {
  return transient_load_latency <= ctx.effective_window();
}

struct PmcCounters {
  std::uint64_t mispredicted_taken_conditional = 0;
  Cycles cycles = 0;
};

struct CpuConfig {
  unsigned counter_bits = 3;
  std::size_t pht_entries = 4096;
  /// Backlog each attack-loop iteration inherits from its own unresolved
  /// loop branch. The default matches rowbuf_miss.
  Cycles backlog_accrual = 280;
  bool fence_drains = false;
  Cycles fence_cost = 40;
  Cycles syscall_cost = 1200;
  double frequency_hz = 2.6e9;

  void validate() const;
};

class Cpu {
 public:
  Cpu(CpuConfig config, Cycles alu_op);

  Cycles now() const { return now_; }
  void advance(Cycles c) { now_ += c; }
  /// Moves the clock forward to `t` if it is in the future.
  void advance_to(Cycles t) {
    if (t > now_) now_ = t;
  }
  void alu(std::uint64_t ops) { now_ += ops * alu_op_; }

  BranchPredictor& predictor() { return predictor_; }
  const BranchPredictor& predictor() const { return predictor_; }

  Cycles pending_resolution() const { return pending_; }
  SpeculationContext context(Cycles base_window) const { return {base_window, pending_}; }

  /// Start of an attack-loop iteration: the loop branch stays unresolved
  /// and adds `backlog_accrual` to the pending resolution.
  void begin_iteration() { pending_ += config_.backlog_accrual; }
  /// End of an iteration: everything in flight has retired.
  void retire() { pending_ = 0; }

  /// Empty loop of `cycles` iterations.
  void drain(std::uint64_t cycles);
  /// mfence/lfence analog; leaves the backlog alone unless fence_drains.
  void fence();
  /// Serializing and slow.
  void syscall();

  void record_mispredicted_taken() { ++mispredicts_; }
  PmcCounters pmc_read() const;
  void pmc_reset();

  const CpuConfig& config() const { return config_; }
  Cycles alu_op() const { return alu_op_; }

 private:
  CpuConfig config_;
  Cycles alu_op_;
  BranchPredictor predictor_;
  Cycles now_ = 0;
  Cycles pending_ = 0;
  std::uint64_t mispredicts_ = 0;
  Cycles pmc_cycle_base_ = 0;
};

}  // namespace simhammer

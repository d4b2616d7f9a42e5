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

#include "simhammer/cpu.hpp"

#include <algorithm>

namespace simhammer {

BranchPredictor::BranchPredictor(unsigned counter_bits, std::size_t entries)
    : bits_(counter_bits), table_(entries, 0) {
  if (counter_bits < 1 || counter_bits > 16) {
    throw ConfigError("predictor: counter width must be in [1, 16]");
  }
  if (entries == 0) throw ConfigError("predictor: table needs at least one entry");
}

Prediction BranchPredictor::predict(std::uint64_t branch_id) const {
  return table_[slot(branch_id)] >= taken_threshold() ? Prediction::Taken
                                                      : Prediction::NotTaken;
}

void BranchPredictor::update(std::uint64_t branch_id, bool taken) {
  auto& c = table_[slot(branch_id)];
  if (taken) {
    if (c < max_counter()) ++c;
  } else if (c > 0) {
    --c;
  }
}

std::uint32_t BranchPredictor::counter(std::uint64_t branch_id) const {
  return table_[slot(branch_id)];
}

void BranchPredictor::reset() { std::fill(table_.begin(), table_.end(), 0); }

void BranchPredictor::reset_entry(std::uint64_t branch_id) { table_[slot(branch_id)] = 0; }

void CpuConfig::validate() const {
  if (counter_bits < 1 || counter_bits > 16) {
    throw ConfigError("cpu: counter_bits must be in [1, 16]");
  }
  if (pht_entries == 0) throw ConfigError("cpu: pht_entries must be >= 1");
  if (syscall_cost < 1000) throw ConfigError("cpu: syscall_cost must be >= 1000 cycles");
  if (!(frequency_hz > 0)) throw ConfigError("cpu: frequency_hz must be positive");
}

Cpu::Cpu(CpuConfig config, Cycles alu_op)
    : config_(config), alu_op_(alu_op), predictor_(config.counter_bits, config.pht_entries) {}

void Cpu::drain(std::uint64_t cycles) {
  pending_ = pending_ > cycles ? pending_ - cycles : 0;
  now_ += cycles * alu_op_;
}

void Cpu::fence() {
  if (config_.fence_drains) pending_ = 0;
  now_ += config_.fence_cost;
}

void Cpu::syscall() {
  pending_ = 0;
  now_ += config_.syscall_cost;
}

PmcCounters Cpu::pmc_read() const { return {mispredicts_, now_ - pmc_cycle_base_}; }

void Cpu::pmc_reset() {
  mispredicts_ = 0;
  pmc_cycle_base_ = now_;
}

}  // namespace simhammer

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

#include "simhammer/gadget.hpp"

#include <cstdlib>

namespace simhammer {

namespace {

bool row_is_quiet(const Dram& dram, const DramAddress& row) {
  const auto& g = dram.geometry();
  for (const auto& c : dram.flip_template().cells) {
    if (!c.cell.same_bank(row)) continue;
    const auto diff = std::llabs(std::int64_t{c.cell.row} - std::int64_t{row.row});
    if (diff <= 1) return false;
  }
  return row.row < g.rows_per_bank;
}

}  // namespace

VictimArray make_victim_layout(const Machine& machine, VirtAddr target,
                               std::uint64_t array_size) {
  const Dram& dram = machine.dram();
  const auto& g = dram.geometry();
  if (g.cols_per_row < 16) throw ConfigError("victim layout needs at least 16 cols per row");
  if (array_size == 0 || array_size > 64) {
    throw ConfigError("victim layout: array_size must be in [1, 64]");
  }
  const DramAddress t = machine.dram_of(target);
  const std::uint32_t rows = g.rows_per_bank;
  for (std::uint32_t step = 0; step < rows; ++step) {
    const std::uint32_t r = (t.row + rows / 2 + step) % rows;
    const auto dist = std::llabs(std::int64_t{r} - std::int64_t{t.row});
    if (dist <= 3) continue;
    DramAddress spot = t.with_row(r);
    spot.col = 0;
    if (!row_is_quiet(dram, spot)) continue;
    VictimArray v;
    v.base = machine.virt_of(spot);
    v.array_size = array_size;
    spot.col = 8;  // next 64-byte line of the same row
    v.array_size_location = machine.virt_of(spot);
    return v;
  }
  throw ConfigError("victim layout: no quiet row available in the target's bank");
}

Gadget::Gadget(Machine& machine, VictimArray victim, GadgetConfig config)
    : machine_(machine), victim_(victim), config_(config) {
  const Cache& cache = machine_.memory().cache();
  if (cache.line_of(machine_.pages().translate(victim_.base)) ==
      cache.line_of(machine_.pages().translate(victim_.array_size_location))) {
    throw ConfigError("victim array and array_size must occupy distinct cache lines");
  }
}

Gadget::CallOutcome Gadget::victim_function(std::uint64_t index) {
  Cpu& cpu = machine_.cpu();
  const MemAccess bound = machine_.load(victim_.array_size_location);
  cpu.alu(2);  // compare + branch
  const bool in = index < victim_.array_size;
  BranchPredictor& pht = cpu.predictor();
  CallOutcome out;
  if (!in && pht.predict(config_.branch_id) == Prediction::Taken) {
    cpu.record_mispredicted_taken();
    out.mispredicted_taken = true;
    out.transient_executed =
        machine_.transient_load(VirtAddr{victim_.base.value + index}, bound.nominal);
  }
  if (in) machine_.load(VirtAddr{victim_.base.value + index});
  pht.update(config_.branch_id, in);
  return out;
}

void Gadget::train(unsigned train_k) {
  for (unsigned i = 0; i < train_k; ++i) victim_function(i % victim_.array_size);
}

void Gadget::evict_or_flush(VirtAddr va, const HammerRoundOptions& opts) {
  if (opts.flush_mode == FlushMode::Clflush) {
    machine_.flush(va);
    return;
  }
  if (opts.eviction_sets == nullptr) throw MisuseError("eviction mode without eviction sets");
  const std::uint64_t line = va.value / machine_.memory().cache().config().line_size;
  const auto it = opts.eviction_sets->find(line);
  if (it == opts.eviction_sets->end()) {
    throw MisuseError("no eviction set for address " + std::to_string(va.value));
  }
  for (VirtAddr e : it->second) machine_.load(e);
}

RoundResult Gadget::verify_round(unsigned train_k, std::uint64_t drain_len, VirtAddr vul_addr,
                                 VerifyOptions opts) {
  if (in_bounds(vul_addr)) {
    throw MisuseError("verify_round: vul_addr must lie outside the victim array");
  }
  Cpu& cpu = machine_.cpu();
  if (config_.reset_predictor) cpu.predictor().reset_entry(config_.branch_id);
  const Cycles start = machine_.now();
  const std::uint64_t events_before = cpu.pmc_read().mispredicted_taken_conditional;
  cpu.begin_iteration();

  if (opts.flush_vul) machine_.flush(vul_addr);
  train(train_k);
  machine_.flush(victim_.array_size_location);
  cpu.drain(drain_len);
  if (opts.serializer == Serializer::Fence) cpu.fence();
  if (opts.serializer == Serializer::Syscall) cpu.syscall();
  const CallOutcome call = victim_function(oob_index(vul_addr));
  const MemAccess probe = machine_.load(vul_addr);
  cpu.retire();

  RoundResult r;
  r.probe_latency = probe.latency;
  r.success = probe.latency < config_.threshold;
  r.round_cost = machine_.now() - start;
  r.mispredict_count_delta = cpu.pmc_read().mispredicted_taken_conditional - events_before;
  r.transient_executed = call.transient_executed;
  return r;
}

RoundResult Gadget::hammer_round(VirtAddr target, unsigned train_k, std::uint64_t drain_len,
                                 const HammerRoundOptions& opts) {
  if (in_bounds(target)) throw MisuseError("hammer_round: target inside the victim array");
  if (opts.partner && opts.speculative_partner && in_bounds(*opts.partner)) {
    throw MisuseError("hammer_round: partner inside the victim array");
  }
  Cpu& cpu = machine_.cpu();
  if (config_.reset_predictor) cpu.predictor().reset_entry(config_.branch_id);
  const Cycles start = machine_.now();
  const std::uint64_t events_before = cpu.pmc_read().mispredicted_taken_conditional;
  cpu.begin_iteration();

  machine_.nop(opts.padding);
  evict_or_flush(target, opts);
  if (opts.partner) evict_or_flush(*opts.partner, opts);
  train(train_k);
  evict_or_flush(victim_.array_size_location, opts);
  cpu.drain(drain_len);
  const CallOutcome call = victim_function(oob_index(target));
  if (opts.partner) {
    if (opts.speculative_partner) {
      cpu.retire();
      cpu.begin_iteration();
      train(train_k);
      evict_or_flush(victim_.array_size_location, opts);
      cpu.drain(drain_len);
      victim_function(oob_index(*opts.partner));
    } else {
      machine_.load(*opts.partner);
    }
  }
  cpu.retire();

  RoundResult r;
  r.success = call.transient_executed;
  r.round_cost = machine_.now() - start;
  r.mispredict_count_delta = cpu.pmc_read().mispredicted_taken_conditional - events_before;
  r.transient_executed = call.transient_executed;
  return r;
}

unsigned Gadget::calibrate_min_training(VirtAddr vul_addr) const {
  auto events = [&](unsigned k) {
    Machine fork = machine_;
    Gadget g(fork, victim_, config_);
    fork.cpu().pmc_reset();
    for (unsigned r = 0; r < config_.calibration_rounds; ++r) g.verify_round(k, 0, vul_addr);
    return fork.cpu().pmc_read().mispredicted_taken_conditional;
  };
  // The PoC baseline may be too short for wide counters; grow it until the
  // mistraining shows up at all.
  unsigned k = config_.baseline_training;
  std::uint64_t baseline = events(k);
  while (baseline == 0 && k < 1024) baseline = events(++k);
  if (baseline == 0) {
    throw CalibrationError("min-training calibration: no mispredicted-taken events observed");
  }
  while (k > 0 && events(k - 1) >= baseline) --k;
  return k;
}

std::uint64_t Gadget::calibrate_drain_loop(unsigned train_k, VirtAddr vul_addr) const {
  Machine fork = machine_;
  Gadget g(fork, victim_, config_);
  g.verify_round(train_k, config_.drain_max, vul_addr);  // warm the caches and row buffers
  for (std::uint64_t len = 0; len <= config_.drain_max; ++len) {
    bool all = true;
    for (std::uint64_t t = 0; t < config_.trials && all; ++t) {
      all = g.verify_round(train_k, len, vul_addr).success;
    }
    if (all) return len;
  }
  throw CalibrationError("drain calibration: no loop length <= " +
                         std::to_string(config_.drain_max) + " gives " +
                         std::to_string(config_.trials) + "/" + std::to_string(config_.trials) +
                         " speculative DRAM accesses (backlog accrual " +
                         std::to_string(machine_.cpu().config().backlog_accrual) + ")");
}

Cycles Gadget::measure_round_cost(VirtAddr target, unsigned train_k, std::uint64_t drain_len,
                                  const HammerRoundOptions& opts) const {
  Machine fork = machine_;
  fork.memory().set_jitter_max(0);
  Gadget g(fork, victim_, config_);
  Cycles cost = 0;
  for (int i = 0; i < 3; ++i) cost = g.hammer_round(target, train_k, drain_len, opts).round_cost;
  return cost;
}

std::vector<Cycles> Gadget::sample_round_costs(VirtAddr target, unsigned train_k,
                                               std::uint64_t drain_len, std::size_t n,
                                               const HammerRoundOptions& opts) const {
  Machine fork = machine_;
  Gadget g(fork, victim_, config_);
  for (int i = 0; i < 2; ++i) g.hammer_round(target, train_k, drain_len, opts);
  std::vector<Cycles> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(g.hammer_round(target, train_k, drain_len, opts).round_cost);
  }
  return out;
}

}  // namespace simhammer

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

// One simulated host: CPU clock and predictor, cache + DRAM, and the page
// map between virtual and physical addresses. A Machine is a plain value;
// copying it forks an independent simulation.

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "simhammer/cache.hpp"
#include "simhammer/cpu.hpp"
#include "simhammer/dram.hpp"

namespace simhammer {

enum class MappingMode : std::uint8_t { Identity, RandomizedPages };

class PageMap {
 public:
  static constexpr std::uint64_t kPageSize = 4096;

  PageMap(std::uint64_t capacity, MappingMode mode, std::uint64_t seed);

  /// MMU translation; throws AddressError outside the mapped range.
  PhysAddr translate(VirtAddr va) const;
  VirtAddr reverse(PhysAddr pa) const;

  /// Software-visible page-map lookups (pagemap-style). These are counted so
  /// the threat model can be checked: attack code in the unprivileged view
  /// must leave the count at zero.
  PhysAddr query(VirtAddr va) const;
  VirtAddr query_reverse(PhysAddr pa) const;
  std::uint64_t query_count() const { return queries_; }

  MappingMode mode() const { return mode_; }
  std::uint64_t capacity() const { return capacity_; }

 private:
  std::uint64_t capacity_;
  MappingMode mode_;
  std::vector<std::uint32_t> forward_;  // virtual page -> physical page
  std::vector<std::uint32_t> inverse_;
  mutable std::uint64_t queries_ = 0;
};

struct MachineConfig {
  DramConfig dram;
  CacheConfig cache;
  CpuConfig cpu;
  FlipTemplate flip_template;
  MappingMode mapping = MappingMode::Identity;
  std::uint64_t seed = 0;
};

class Machine {
 public:
  explicit Machine(const MachineConfig& config);

  Cycles now() const { return cpu_.now(); }

  /// Architectural load: advances the clock by the observed latency.
  MemAccess load(VirtAddr va);
  /// clflush; advances the clock.
  void flush(VirtAddr va);
  void nop(std::uint64_t count) { cpu_.alu(count); }
  /// Idle until virtual time t.
  void wait_until(Cycles t) { cpu_.advance_to(t); }

  /// Noise-free latency a load of va would see now.
  Cycles peek_latency(VirtAddr va) const;

  /// Speculative load under a guard whose operand took `base_window` cycles.
  /// If it fits the effective window the load touches cache and DRAM as a
  /// normal load would (but the clock does not move); otherwise nothing
  /// happens. Addresses outside the mapped range never execute.
  bool transient_load(VirtAddr va, Cycles base_window);

  Cpu& cpu() { return cpu_; }
  const Cpu& cpu() const { return cpu_; }
  MemorySystem& memory() { return memory_; }
  const MemorySystem& memory() const { return memory_; }
  Dram& dram() { return memory_.dram(); }
  const Dram& dram() const { return memory_.dram(); }
  const PageMap& pages() const { return pages_; }
  const TimingModel& timing() const { return memory_.timing(); }

  /// Simulator-side (not attacker-visible) helpers for building layouts.
  VirtAddr virt_of(const DramAddress& a) const;
  DramAddress dram_of(VirtAddr va) const;

 private:
  Cpu cpu_;
  MemorySystem memory_;
  PageMap pages_;
};

}  // namespace simhammer

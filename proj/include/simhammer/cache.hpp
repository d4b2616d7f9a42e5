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

// Single-level, physically indexed, set-associative LRU cache and the
// memory system that puts it in front of a Dram.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "simhammer/common.hpp"
#include "simhammer/dram.hpp"

namespace simhammer {

struct CacheConfig {
  std::uint32_t sets = 64;
  std::uint32_t ways = 4;
  std::uint32_t line_size = 64;

  void validate() const;
};

class Cache {
 public:
  explicit Cache(CacheConfig config);

  std::uint64_t set_index(PhysAddr pa) const;
  std::uint64_t line_of(PhysAddr pa) const { return pa.value / config_.line_size; }

  bool contains(PhysAddr pa) const;
  /// Hit: promotes the line to MRU and returns true. Miss: no state change.
  bool touch(PhysAddr pa);
  /// Installs as MRU, evicting the LRU line of a full set.
  void install(PhysAddr pa);
  void invalidate(PhysAddr pa);

  /// Resident line numbers of one set, MRU first.
  std::vector<std::uint64_t> set_contents(std::uint64_t set) const;

  const CacheConfig& config() const { return config_; }

 private:
  CacheConfig config_;
  // sets * ways line numbers, MRU first within a set; `fill_` holds counts.
  std::vector<std::uint64_t> lines_;
  std::vector<std::uint32_t> fill_;
};

struct MemAccess {
  Cycles latency = 0;  // includes jitter
  Cycles nominal = 0;  // noise-free latency
  bool hit = false;
};

struct TraceEvent {
  Cycles cycle;
  char op;  // 'L' load, 'F' flush
  std::uint64_t pa;
  bool hit;
  Cycles latency;
};

/// Cache + DRAM with the shared timing table. Physical addresses only;
/// translation lives a layer up.
class MemorySystem {
 public:
  MemorySystem(CacheConfig cache, DramConfig dram, FlipTemplate flip_template);

  /// Hit: cache_hit latency. Miss: DRAM latency via map_physical, line
  /// installed. Throws AddressError when pa is beyond capacity.
  MemAccess cached_access(PhysAddr pa, Cycles now);

  /// Evicts the line holding pa. Always costs clflush, resident or not.
  Cycles flush(PhysAddr pa, Cycles now);

  /// Noise-free latency `cached_access` would currently see; no side effects.
  Cycles peek_latency(PhysAddr pa) const;

  /// `size` distinct addresses congruent to target's set, none sharing its
  /// line. Throws MisuseError when size < ways or capacity runs out.
  std::vector<PhysAddr> build_eviction_set(PhysAddr target, std::size_t size) const;

  const TimingModel& timing() const { return dram_.config().timing; }
  /// Overrides the jitter bound (0 = noise-free) without touching the seed.
  void set_jitter_max(Cycles jitter_max) { jitter_max_ = jitter_max; }
  Cycles jitter_max() const { return jitter_max_; }
  Cache& cache() { return cache_; }
  const Cache& cache() const { return cache_; }
  Dram& dram() { return dram_; }
  const Dram& dram() const { return dram_; }

  void enable_trace(bool on) { tracing_ = on; }
  const std::vector<TraceEvent>& trace() const { return trace_; }
  void write_trace_csv(std::ostream& os) const;

 private:
  Cache cache_;
  Dram dram_;
  Rng jitter_;
  Cycles jitter_max_;
  bool tracing_ = false;
  std::vector<TraceEvent> trace_;
};

}  // namespace simhammer

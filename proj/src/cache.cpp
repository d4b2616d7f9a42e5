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

#include "simhammer/cache.hpp"

#include <algorithm>
#include <bit>
#include <ostream>

namespace simhammer {

void CacheConfig::validate() const {
  if (sets < 1 || ways < 1) throw ConfigError("cache: sets and ways must be >= 1");
  if (!std::has_single_bit(line_size)) {
    throw ConfigError("cache: line_size must be a power of two");
  }
}

Cache::Cache(CacheConfig config) : config_(config) {
  config_.validate();
  lines_.assign(std::uint64_t{config_.sets} * config_.ways, 0);
  fill_.assign(config_.sets, 0);
}

std::uint64_t Cache::set_index(PhysAddr pa) const { return line_of(pa) % config_.sets; }

bool Cache::contains(PhysAddr pa) const {
  const std::uint64_t set = set_index(pa);
  const auto first = lines_.begin() + static_cast<std::ptrdiff_t>(set * config_.ways);
  return std::find(first, first + fill_[set], line_of(pa)) != first + fill_[set];
}

bool Cache::touch(PhysAddr pa) {
  const std::uint64_t set = set_index(pa);
  const auto first = lines_.begin() + static_cast<std::ptrdiff_t>(set * config_.ways);
  const auto last = first + fill_[set];
  const auto it = std::find(first, last, line_of(pa));
  if (it == last) return false;
  std::rotate(first, it, it + 1);
  return true;
}

void Cache::install(PhysAddr pa) {
  if (touch(pa)) return;
  const std::uint64_t set = set_index(pa);
  const auto first = lines_.begin() + static_cast<std::ptrdiff_t>(set * config_.ways);
  if (fill_[set] < config_.ways) ++fill_[set];
  // Shift right by one (dropping the LRU slot when full) and insert at MRU.
  std::rotate(first, first + fill_[set] - 1, first + fill_[set]);
  *first = line_of(pa);
}

void Cache::invalidate(PhysAddr pa) {
  const std::uint64_t set = set_index(pa);
  const auto first = lines_.begin() + static_cast<std::ptrdiff_t>(set * config_.ways);
  const auto last = first + fill_[set];
  const auto it = std::find(first, last, line_of(pa));
  if (it == last) return;
  std::rotate(it, it + 1, last);
  --fill_[set];
}

std::vector<std::uint64_t> Cache::set_contents(std::uint64_t set) const {
  const auto first = lines_.begin() + static_cast<std::ptrdiff_t>(set * config_.ways);
  return {first, first + fill_[set]};
}

MemorySystem::MemorySystem(CacheConfig cache, DramConfig dram, FlipTemplate flip_template)
    : cache_(cache),
      dram_(dram, std::move(flip_template)),
      jitter_(dram.timing.jitter_seed),
      jitter_max_(dram.timing.jitter_max) {}

MemAccess MemorySystem::cached_access(PhysAddr pa, Cycles now) {
  const DramAddress where = dram_.map_physical(pa);
  MemAccess out;
  if (cache_.touch(pa)) {
    out = {timing().cache_hit, timing().cache_hit, true};
  } else {
    const DramAccess d = dram_.access(where, now);
    const Cycles jmax = jitter_max_;
    const Cycles noise = jmax > 0 ? jitter_.between(0, jmax) : 0;
    out = {d.latency + noise, d.latency, false};
    cache_.install(pa);
  }
  if (tracing_) trace_.push_back({now, 'L', pa.value, out.hit, out.latency});
  return out;
}

Cycles MemorySystem::flush(PhysAddr pa, Cycles now) {
  cache_.invalidate(pa);
  if (tracing_) trace_.push_back({now, 'F', pa.value, false, timing().clflush});
  return timing().clflush;
}

Cycles MemorySystem::peek_latency(PhysAddr pa) const {
  const DramAddress where = dram_.map_physical(pa);
  if (cache_.contains(pa)) return timing().cache_hit;
  return dram_.peek_latency(where);
}

std::vector<PhysAddr> MemorySystem::build_eviction_set(PhysAddr target,
                                                       std::size_t size) const {
  const auto& cfg = cache_.config();
  if (size < cfg.ways) {
    throw MisuseError("eviction set of " + std::to_string(size) + " lines cannot evict a " +
                      std::to_string(cfg.ways) + "-way set");
  }
  const std::uint64_t stride = std::uint64_t{cfg.sets} * cfg.line_size;
  const std::uint64_t capacity = dram_.geometry().capacity();
  const std::uint64_t offset = target.value % stride;
  const std::uint64_t target_line = cache_.line_of(target);
  std::vector<PhysAddr> out;
  for (std::uint64_t base = offset; base < capacity && out.size() < size; base += stride) {
    const PhysAddr candidate{base - base % cfg.line_size};
    if (cache_.line_of(candidate) != target_line) out.push_back(candidate);
  }
  if (out.size() < size) {
    throw MisuseError("not enough congruent lines in memory for an eviction set of " +
                      std::to_string(size));
  }
  return out;
}

void MemorySystem::write_trace_csv(std::ostream& os) const {
  os << "cycle,op,pa,hit,latency\n";
  for (const auto& e : trace_) {
    os << e.cycle << ',' << e.op << ',' << e.pa << ',' << (e.hit ? 1 : 0) << ',' << e.latency
       << '\n';
  }
}

}  // namespace simhammer

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

#include "simhammer/machine.hpp"

#include <numeric>

namespace simhammer {

PageMap::PageMap(std::uint64_t capacity, MappingMode mode, std::uint64_t seed)
    : capacity_(capacity), mode_(mode) {
  if (mode_ == MappingMode::Identity) return;
  const std::uint64_t pages = capacity_ / kPageSize;
  if (pages > std::uint64_t{UINT32_MAX}) throw ConfigError("page map: too many pages");
  forward_.resize(pages);
  std::iota(forward_.begin(), forward_.end(), 0U);
  Rng rng(seed ^ 0x70616765ULL);
  for (std::uint64_t i = pages; i > 1; --i) {
    std::swap(forward_[i - 1], forward_[rng.below(i)]);
  }
  inverse_.resize(pages);
  for (std::uint64_t v = 0; v < pages; ++v) inverse_[forward_[v]] = static_cast<std::uint32_t>(v);
}

PhysAddr PageMap::translate(VirtAddr va) const {
  if (va.value >= capacity_) {
    throw AddressError("virtual address " + std::to_string(va.value) + " is not mapped");
  }
  const std::uint64_t page = va.value / kPageSize;
  if (mode_ == MappingMode::Identity || page >= forward_.size()) return PhysAddr{va.value};
  return PhysAddr{std::uint64_t{forward_[page]} * kPageSize + va.value % kPageSize};
}

VirtAddr PageMap::reverse(PhysAddr pa) const {
  if (pa.value >= capacity_) {
    throw AddressError("physical address " + std::to_string(pa.value) + " beyond capacity");
  }
  const std::uint64_t page = pa.value / kPageSize;
  if (mode_ == MappingMode::Identity || page >= inverse_.size()) return VirtAddr{pa.value};
  return VirtAddr{std::uint64_t{inverse_[page]} * kPageSize + pa.value % kPageSize};
}

PhysAddr PageMap::query(VirtAddr va) const {
  ++queries_;
  return translate(va);
}

VirtAddr PageMap::query_reverse(PhysAddr pa) const {
  ++queries_;
  return reverse(pa);
}

Machine::Machine(const MachineConfig& config)
    : cpu_(config.cpu, config.dram.timing.alu_op),
      memory_(config.cache, config.dram, config.flip_template),
      pages_(config.dram.geometry.capacity(), config.mapping, config.seed) {}

MemAccess Machine::load(VirtAddr va) {
  const MemAccess a = memory_.cached_access(pages_.translate(va), cpu_.now());
  cpu_.advance(a.latency);
  return a;
}

void Machine::flush(VirtAddr va) {
  cpu_.advance(memory_.flush(pages_.translate(va), cpu_.now()));
}

Cycles Machine::peek_latency(VirtAddr va) const {
  return memory_.peek_latency(pages_.translate(va));
}

bool Machine::transient_load(VirtAddr va, Cycles base_window) {
  if (va.value >= pages_.capacity()) return false;
  const PhysAddr pa = pages_.translate(va);
  if (!speculate(cpu_.context(base_window), memory_.peek_latency(pa))) return false;
  memory_.cached_access(pa, cpu_.now());
  return true;
}

VirtAddr Machine::virt_of(const DramAddress& a) const {
  return pages_.reverse(memory_.dram().to_physical(a));
}

DramAddress Machine::dram_of(VirtAddr va) const {
  return memory_.dram().map_physical(pages_.translate(va));
}

}  // namespace simhammer

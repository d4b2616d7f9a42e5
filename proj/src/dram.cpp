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

#include "simhammer/dram.hpp"

#include <algorithm>
#include <sstream>

namespace simhammer {

void DramGeometry::validate() const {
  if (channels < 1 || dimms_per_channel < 1 || ranks < 1 || banks_per_rank < 1 ||
      cols_per_row < 1) {
    throw ConfigError("dram geometry: every count must be >= 1");
  }
  if (rows_per_bank < 3) {
    throw ConfigError("dram geometry: rows_per_bank must be >= 3");
  }
}

void TimingModel::validate() const {
  if (!(cache_hit < kClassifyThreshold && kClassifyThreshold < rowbuf_hit &&
        rowbuf_hit < rowbuf_miss)) {
    throw ConfigError("timing: need cache_hit < 100 < rowbuf_hit < rowbuf_miss");
  }
  if (clflush >= 200) throw ConfigError("timing: clflush must cost < 200 cycles");
}

std::string to_string(const DramAddress& a) {
  std::ostringstream os;
  os << a.channel << ',' << a.dimm << ',' << a.rank << ',' << a.bank << ',' << a.row << ','
     << a.col;
  return os.str();
}

std::string to_string(FlipDirection d) {
  return d == FlipDirection::ZeroToOne ? "0to1" : "1to0";
}

FlipDirection parse_flip_direction(const std::string& s) {
  if (s == "0to1" || s == "01" || s == "up") return FlipDirection::ZeroToOne;
  if (s == "1to0" || s == "10" || s == "down") return FlipDirection::OneToZero;
  throw ConfigError("unknown flip direction '" + s + "' (expected 0to1 or 1to0)");
}

void FlipTemplate::validate(const DramGeometry& g) const {
  for (const auto& c : cells) {
    const auto& a = c.cell;
    if (a.channel >= g.channels || a.dimm >= g.dimms_per_channel || a.rank >= g.ranks ||
        a.bank >= g.banks_per_rank || a.row >= g.rows_per_bank || a.col >= g.cols_per_row) {
      throw ConfigError("flip template: cell " + to_string(a) + " outside geometry");
    }
    if (c.bit >= 64) throw ConfigError("flip template: bit index must be < 64");
    if (c.threshold == 0) throw ConfigError("flip template: thresholds must be > 0");
  }
}

Dram::Dram(DramConfig config, FlipTemplate flip_template)
    : config_(config), template_(std::move(flip_template)) {
  config_.geometry.validate();
  template_.validate(config_.geometry);
  if (config_.refresh_interval == 0) throw ConfigError("dram: refresh_interval must be > 0");
  open_rows_.assign(config_.geometry.total_banks(), std::nullopt);
  flipped_.assign(template_.cells.size(), false);
  for (std::size_t i = 0; i < template_.cells.size(); ++i) {
    const auto& c = template_.cells[i];
    cells_by_row_[row_key(c.cell)].push_back(i);
    // Weak cells start out holding the value they are prone to lose.
    if (c.direction == FlipDirection::OneToZero) {
      memory_[cell_index(c.cell)] |= (std::uint64_t{1} << c.bit);
    }
  }
}

void Dram::validate_address(const DramAddress& a) const {
  const auto& g = config_.geometry;
  if (a.channel >= g.channels || a.dimm >= g.dimms_per_channel || a.rank >= g.ranks ||
      a.bank >= g.banks_per_rank || a.row >= g.rows_per_bank || a.col >= g.cols_per_row) {
    throw AddressError("dram address " + to_string(a) + " outside geometry");
  }
}

std::uint64_t Dram::bank_index(const DramAddress& a) const {
  const auto& g = config_.geometry;
  return ((std::uint64_t{a.channel} * g.dimms_per_channel + a.dimm) * g.ranks + a.rank) *
             g.banks_per_rank +
         a.bank;
}

std::uint64_t Dram::row_key(const DramAddress& a) const {
  return bank_index(a) * config_.geometry.rows_per_bank + a.row;
}

std::uint64_t Dram::cell_index(const DramAddress& a) const {
  return to_physical(a).value / DramGeometry::kCellWidth;
}

std::uint64_t Dram::count_of(std::uint64_t key) const {
  auto it = counters_.find(key);
  if (it == counters_.end() || it->second.epoch != epoch_) return 0;
  return it->second.count;
}

std::uint64_t Dram::activations(const DramAddress& row) const {
  validate_address(row);
  return count_of(row_key(row));
}

std::optional<std::uint32_t> Dram::open_row(const DramAddress& bank) const {
  validate_address(bank);
  return open_rows_[bank_index(bank)];
}

void Dram::refresh_tick(Cycles now) {
  const Cycles interval = config_.refresh_interval;
  if (now < last_refresh_ || now - last_refresh_ < interval) return;
  last_refresh_ += (now - last_refresh_) / interval * interval;
  ++epoch_;  // lazily zeroes every counter
}

Cycles Dram::next_refresh_after(Cycles now) const {
  const Cycles interval = config_.refresh_interval;
  if (now < last_refresh_) return last_refresh_;
  return last_refresh_ + ((now - last_refresh_) / interval + 1) * interval;
}

Cycles Dram::peek_latency(const DramAddress& addr) const {
  validate_address(addr);
  if (config_.closed_page) return config_.timing.rowbuf_miss;
  const auto& open = open_rows_[bank_index(addr)];
  return (open && *open == addr.row) ? config_.timing.rowbuf_hit : config_.timing.rowbuf_miss;
}

DramAccess Dram::access(const DramAddress& addr, Cycles now) {
  validate_address(addr);
  refresh_tick(now);
  auto& open = open_rows_[bank_index(addr)];
  if (!config_.closed_page && open && *open == addr.row) {
    return {config_.timing.rowbuf_hit, false};
  }
  open = config_.closed_page ? std::nullopt : std::optional<std::uint32_t>(addr.row);
  auto& counter = counters_[row_key(addr)];
  if (counter.epoch != epoch_) counter = {epoch_, 0};
  ++counter.count;
  if (!cells_by_row_.empty()) {
    if (addr.row > 0) check_victim_row(addr.with_row(addr.row - 1), now);
    if (addr.row + 1 < config_.geometry.rows_per_bank) {
      check_victim_row(addr.with_row(addr.row + 1), now);
    }
  }
  return {config_.timing.rowbuf_miss, true};
}

std::uint64_t Dram::disturbance(const DramAddress& victim_row) const {
  const std::uint64_t key = row_key(victim_row);
  const std::uint64_t below = victim_row.row > 0 ? count_of(key - 1) : 0;
  const std::uint64_t above =
      victim_row.row + 1 < config_.geometry.rows_per_bank ? count_of(key + 1) : 0;
  return std::max(below, above);
}

void Dram::check_victim_row(const DramAddress& victim_row, Cycles now) {
  auto it = cells_by_row_.find(row_key(victim_row));
  if (it == cells_by_row_.end()) return;
  const std::uint64_t d = disturbance(victim_row);
  for (std::size_t index : it->second) {
    if (!flipped_[index] && d >= template_.cells[index].threshold) flip_cell(index, now);
  }
}

void Dram::flip_cell(std::size_t index, Cycles now) {
  const auto& c = template_.cells[index];
  flipped_[index] = true;
  auto& word = memory_[cell_index(c.cell)];
  const std::uint64_t mask = std::uint64_t{1} << c.bit;
  if (c.direction == FlipDirection::ZeroToOne) {
    word |= mask;
  } else {
    word &= ~mask;
  }
  flip_log_.push_back({now, c.cell, c.bit, c.direction});
}

std::vector<FlipEvent> Dram::check_flips(Cycles now) {
  refresh_tick(now);
  for (std::size_t i = 0; i < template_.cells.size(); ++i) {
    if (!flipped_[i] && disturbance(template_.cells[i].cell) >= template_.cells[i].threshold) {
      flip_cell(i, now);
    }
  }
  std::vector<FlipEvent> fresh(flip_log_.begin() + static_cast<std::ptrdiff_t>(reported_),
                               flip_log_.end());
  reported_ = flip_log_.size();
  return fresh;
}

DramAddress Dram::map_physical(PhysAddr pa) const {
  const auto& g = config_.geometry;
  if (pa.value >= g.capacity()) {
    throw AddressError("physical address " + std::to_string(pa.value) + " >= capacity " +
                       std::to_string(g.capacity()));
  }
  std::uint64_t idx = pa.value / DramGeometry::kCellWidth;
  DramAddress a;
  a.col = static_cast<std::uint32_t>(idx % g.cols_per_row);
  idx /= g.cols_per_row;
  a.bank = static_cast<std::uint32_t>(idx % g.banks_per_rank);
  idx /= g.banks_per_rank;
  a.row = static_cast<std::uint32_t>(idx % g.rows_per_bank);
  idx /= g.rows_per_bank;
  a.rank = static_cast<std::uint32_t>(idx % g.ranks);
  idx /= g.ranks;
  a.dimm = static_cast<std::uint32_t>(idx % g.dimms_per_channel);
  idx /= g.dimms_per_channel;
  a.channel = static_cast<std::uint32_t>(idx);
  return a;
}

PhysAddr Dram::to_physical(const DramAddress& a) const {
  validate_address(a);
  const auto& g = config_.geometry;
  std::uint64_t idx = a.channel;
  idx = idx * g.dimms_per_channel + a.dimm;
  idx = idx * g.ranks + a.rank;
  idx = idx * g.rows_per_bank + a.row;
  idx = idx * g.banks_per_rank + a.bank;
  idx = idx * g.cols_per_row + a.col;
  return PhysAddr{idx * DramGeometry::kCellWidth};
}

std::uint64_t Dram::read_word(PhysAddr pa) const {
  map_physical(pa);
  auto it = memory_.find(pa.value / DramGeometry::kCellWidth);
  return it == memory_.end() ? 0 : it->second;
}

void Dram::write_word(PhysAddr pa, std::uint64_t value) {
  map_physical(pa);
  memory_[pa.value / DramGeometry::kCellWidth] = value;
}

void Dram::restore(std::span<const FlipEvent> events) {
  for (const auto& e : events) {
    for (std::size_t i = 0; i < template_.cells.size(); ++i) {
      const auto& c = template_.cells[i];
      if (c.cell != e.cell || c.bit != e.bit || !flipped_[i]) continue;
      auto& word = memory_[cell_index(c.cell)];
      const std::uint64_t mask = std::uint64_t{1} << c.bit;
      if (c.direction == FlipDirection::ZeroToOne) {
        word &= ~mask;
      } else {
        word |= mask;
      }
      flipped_[i] = false;
    }
  }
}

std::optional<std::uint64_t> Dram::min_armed_threshold_near(
    std::span<const DramAddress> aggressors) const {
  std::optional<std::uint64_t> best;
  for (const auto& agg : aggressors) {
    validate_address(agg);
    for (int delta : {-1, 1}) {
      const std::int64_t r = std::int64_t{agg.row} + delta;
      if (r < 0 || r >= std::int64_t{config_.geometry.rows_per_bank}) continue;
      auto it = cells_by_row_.find(row_key(agg.with_row(static_cast<std::uint32_t>(r))));
      if (it == cells_by_row_.end()) continue;
      for (std::size_t index : it->second) {
        if (flipped_[index]) continue;
        const auto t = template_.cells[index].threshold;
        if (!best || t < *best) best = t;
      }
    }
  }
  return best;
}

}  // namespace simhammer

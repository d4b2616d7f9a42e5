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

// DRAM model: geometry, linear physical-address slicing, per-bank row
// buffers, bulk refresh and template-driven disturbance flips.
//
// Physical address layout (low to high), each field taken modulo its bound:
//
//   | byte-in-cell (3 bits) | col | bank | row | rank | dimm | channel |
//
// so consecutive 8-byte cells walk a row, the next row-sized chunk moves to
// the next bank, and addresses that differ only above the bank field share a
// bank but open different rows.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "simhammer/common.hpp"

namespace simhammer {

struct DramGeometry {
  std::uint32_t channels = 1;
  std::uint32_t dimms_per_channel = 1;
  std::uint32_t ranks = 1;
  std::uint32_t banks_per_rank = 8;
  std::uint32_t rows_per_bank = 64;
  std::uint32_t cols_per_row = 128;
  static constexpr std::uint32_t kCellWidth = 8;

  std::uint64_t total_banks() const {
    return std::uint64_t{channels} * dimms_per_channel * ranks * banks_per_rank;
  }
  std::uint64_t row_bytes() const { return std::uint64_t{cols_per_row} * kCellWidth; }
  std::uint64_t capacity() const { return total_banks() * rows_per_bank * row_bytes(); }

  /// Throws ConfigError unless every count is >= 1 and rows_per_bank >= 3.
  void validate() const;
};

struct DramAddress {
  std::uint32_t channel = 0;
  std::uint32_t dimm = 0;
  std::uint32_t rank = 0;
  std::uint32_t bank = 0;
  std::uint32_t row = 0;
  std::uint32_t col = 0;

  auto operator<=>(const DramAddress&) const = default;

  bool same_bank(const DramAddress& o) const {
    return channel == o.channel && dimm == o.dimm && rank == o.rank && bank == o.bank;
  }
  DramAddress with_row(std::uint32_t r) const {
    DramAddress copy = *this;
    copy.row = r;
    return copy;
  }
};

std::string to_string(const DramAddress& a);

enum class FlipDirection : std::uint8_t { ZeroToOne, OneToZero };

std::string to_string(FlipDirection d);
FlipDirection parse_flip_direction(const std::string& s);

/// A physically weak cell: flips once the busier of its two neighbour rows
/// has been activated `threshold` times inside one refresh window.
struct TemplateCell {
  DramAddress cell;
  std::uint32_t bit = 0;  // 0..63 within the 8-byte cell
  FlipDirection direction = FlipDirection::OneToZero;
  std::uint64_t threshold = 1;
};

struct FlipTemplate {
  std::vector<TemplateCell> cells;

  void validate(const DramGeometry& g) const;
};

struct FlipEvent {
  Cycles cycle = 0;
  DramAddress cell;
  std::uint32_t bit = 0;
  FlipDirection direction = FlipDirection::OneToZero;

  bool operator==(const FlipEvent&) const = default;
};

/// Latency table shared by the cache, DRAM and CPU layers. Classification
/// threshold is 100 cycles: cache_hit must sit below it and both DRAM
/// latencies above it.
struct TimingModel {
  Cycles cache_hit = 40;
  Cycles rowbuf_hit = 180;
  Cycles rowbuf_miss = 280;
  Cycles clflush = 50;
  Cycles alu_op = 1;
  /// Upper bound of the uniform noise added to each DRAM access; 0 disables.
  Cycles jitter_max = 0;
  std::uint64_t jitter_seed = 0;

  static constexpr Cycles kClassifyThreshold = 100;

  /// Throws ConfigError when the cache/DRAM separation or the clflush bound
  /// is violated.
  void validate() const;
};

struct DramConfig {
  DramGeometry geometry;
  TimingModel timing;
  Cycles refresh_interval = 166'400'000;  // 64 ms at 2.6 GHz
  bool closed_page = false;
};

struct DramAccess {
  Cycles latency = 0;
  bool opened = false;
};

class Dram {
 public:
  Dram(DramConfig config, FlipTemplate flip_template);

  /// Serves one access at virtual time `now`. Runs refresh first, then the
  /// row-buffer logic, then the flip check on the two rows next to an opened
  /// row. Throws AddressError on an out-of-range address.
  DramAccess access(const DramAddress& addr, Cycles now);

  /// Latency `access` would report right now, without side effects.
  Cycles peek_latency(const DramAddress& addr) const;

  void refresh_tick(Cycles now);

  /// Full sweep of the template; returns every flip recorded since the
  /// previous call (including flips raised by `access`).
  std::vector<FlipEvent> check_flips(Cycles now);

  DramAddress map_physical(PhysAddr pa) const;
  PhysAddr to_physical(const DramAddress& a) const;

  std::uint64_t read_word(PhysAddr pa) const;
  void write_word(PhysAddr pa, std::uint64_t value);

  std::uint64_t activations(const DramAddress& row) const;
  std::optional<std::uint32_t> open_row(const DramAddress& bank) const;
  Cycles last_refresh() const { return last_refresh_; }
  /// First refresh boundary strictly after `now`.
  Cycles next_refresh_after(Cycles now) const;

  const std::vector<FlipEvent>& flip_log() const { return flip_log_; }

  /// Rewrites the pre-flip value of each event's cell and re-arms it.
  void restore(std::span<const FlipEvent> events);

  /// Smallest threshold among armed template cells in rows adjacent to any
  /// of `aggressors`; nullopt when none exist.
  std::optional<std::uint64_t> min_armed_threshold_near(
      std::span<const DramAddress> aggressors) const;

  const DramConfig& config() const { return config_; }
  const DramGeometry& geometry() const { return config_.geometry; }
  const FlipTemplate& flip_template() const { return template_; }
  /// Sparse memory image: cell index -> value; absent cells read as 0.
  const std::map<std::uint64_t, std::uint64_t>& contents() const { return memory_; }

 private:
  struct Counter {
    std::uint64_t epoch = 0;
    std::uint64_t count = 0;
  };

  void validate_address(const DramAddress& a) const;
  std::uint64_t bank_index(const DramAddress& a) const;
  std::uint64_t row_key(const DramAddress& a) const;
  std::uint64_t cell_index(const DramAddress& a) const;
  std::uint64_t count_of(std::uint64_t key) const;
  std::uint64_t disturbance(const DramAddress& victim_row) const;
  void check_victim_row(const DramAddress& victim_row, Cycles now);
  void flip_cell(std::size_t index, Cycles now);

  DramConfig config_;
  FlipTemplate template_;
  std::vector<std::optional<std::uint32_t>> open_rows_;
  std::unordered_map<std::uint64_t, Counter> counters_;
  std::uint64_t epoch_ = 0;
  Cycles last_refresh_ = 0;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_by_row_;
  std::vector<bool> flipped_;
  std::map<std::uint64_t, std::uint64_t> memory_;
  std::vector<FlipEvent> flip_log_;
  std::size_t reported_ = 0;
};

}  // namespace simhammer

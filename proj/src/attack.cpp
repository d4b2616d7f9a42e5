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

#include "simhammer/attack.hpp"

#include <algorithm>
#include <chrono>
#include <map>

namespace simhammer {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Runs `step` until a new flip shows up or the budget is spent. In
// noise-free mode the iteration cost is constant after warm-up, so once no
// armed cell next to an aggressor can be reached at that cost the rest of
// the budget is skipped arithmetically.
template <class Step>
FlipReport hammer_loop(Machine& m, std::span<const DramAddress> aggressors, Cycles budget,
                       std::size_t flips_before, Step&& step) {
  const auto wall0 = std::chrono::steady_clock::now();
  FlipReport rep;
  const Cycles start = m.now();
  const Cycles window = m.dram().config().refresh_interval;
  const bool noise_free = m.memory().jitter_max() == 0;
  while (m.now() - start < budget) {
    const Cycles it_start = m.now();
    step();
    ++rep.iterations;
    rep.per_iteration_cost = m.now() - it_start;
    if (m.dram().flip_log().size() > flips_before) break;
    if (rep.per_iteration_cost == 0) break;
    if (noise_free && rep.iterations == 2) {
      const auto threshold = m.dram().min_armed_threshold_near(aggressors);
      if (!threshold || !flip_reachable(window, rep.per_iteration_cost, *threshold)) {
        const Cycles elapsed = m.now() - start;
        if (elapsed < budget) {
          const Cycles c = rep.per_iteration_cost;
          const std::uint64_t extra = (budget - elapsed + c - 1) / c;
          m.wait_until(m.now() + extra * c);
          rep.iterations += extra;
        }
        rep.fast_forwarded = true;
        break;
      }
    }
  }
  const auto& log = m.dram().flip_log();
  rep.flips.assign(log.begin() + static_cast<std::ptrdiff_t>(flips_before), log.end());
  rep.virtual_time = m.now() - start;
  rep.wall_time = seconds_since(wall0);
  return rep;
}

std::map<std::uint64_t, std::vector<VirtAddr>> build_eviction_sets(
    const Machine& m, std::initializer_list<VirtAddr> targets, std::size_t size) {
  const auto& mem = m.memory();
  const std::uint64_t line = mem.cache().config().line_size;
  if (size == 0) size = mem.cache().config().ways;
  std::map<std::uint64_t, std::vector<VirtAddr>> sets;
  for (VirtAddr va : targets) {
    std::vector<VirtAddr> vs;
    for (PhysAddr pa : mem.build_eviction_set(m.pages().translate(va), size)) {
      vs.push_back(m.pages().reverse(pa));
    }
    sets[va.value / line] = std::move(vs);
  }
  return sets;
}

}  // namespace

PhysAddr AttackerView::physical(const Machine& m, VirtAddr va) const {
  if (!knows_physical && m.pages().mode() == MappingMode::RandomizedPages) {
    throw MisuseError("attacker view has no virtual-to-physical knowledge");
  }
  return m.pages().query(va);
}

VirtAddr AttackerView::virtual_of(const Machine& m, PhysAddr pa) const {
  if (!knows_physical && m.pages().mode() == MappingMode::RandomizedPages) {
    throw MisuseError("attacker view has no virtual-to-physical knowledge");
  }
  return m.pages().query_reverse(pa);
}

void direct_iteration(Machine& m, VirtAddr a, VirtAddr b, Cycles padding) {
  m.nop(padding);
  m.flush(a);
  m.flush(b);
  m.load(a);
  m.load(b);
}

Cycles direct_iteration_cost(const TimingModel& t, Cycles padding) {
  return padding * t.alu_op + 2 * t.clflush + 2 * t.rowbuf_miss;
}

bool flip_reachable(Cycles refresh_interval, Cycles cost, std::uint64_t threshold) {
  if (cost == 0) return true;
  const std::uint64_t max_per_window = (refresh_interval + cost - 1) / cost;
  return max_per_window >= threshold;
}

FlipReport direct_hammer(Machine& m, const HammerPair& pair, Cycles padding, Cycles budget) {
  if (!pair.hammerable()) throw MisuseError("direct_hammer: aggressors must share a bank");
  const DramAddress rows[] = {pair.row_a, pair.row_b};
  return hammer_loop(m, rows, budget, m.dram().flip_log().size(),
                     [&] { direct_iteration(m, pair.addr_a, pair.addr_b, padding); });
}

ScanResult scan_vulnerable_pairs(Machine& m, const AttackerView& view,
                                 std::span<const ScanRegion> regions, Cycles budget,
                                 Cycles padding) {
  if (!view.knows_physical) {
    throw MisuseError("scan runs in calibration mode and needs physical address knowledge");
  }
  const TimingModel& t = m.timing();
  const Cycles window = m.dram().config().refresh_interval;
  const Cycles offset_a = padding * t.alu_op + 2 * t.clflush;
  const auto& g = m.dram().geometry();

  ScanResult result;
  result.per_iteration_cost = direct_iteration_cost(t, padding);
  const Cycles scan_start = m.now();
  const std::size_t log_start = m.dram().flip_log().size();
  auto interior = [&](const DramAddress& cell) {
    return std::any_of(regions.begin(), regions.end(), [&](const ScanRegion& r) {
      return cell.same_bank(r.bank) && cell.row > r.row_lo && cell.row < r.row_hi;
    });
  };

  for (const auto& region : regions) {
    if (region.row_hi >= g.rows_per_bank || region.row_lo > region.row_hi) {
      throw MisuseError("scan region rows out of range");
    }
    for (std::uint32_t r = region.row_lo; r + 2 <= region.row_hi; ++r) {
      const Cycles aligned = m.now() + offset_a;
      const Cycles boundary =
          aligned == 0 ? 0 : m.dram().next_refresh_after(aligned - 1);
      if (boundary + window - scan_start > budget) {
        result.partial = true;
        break;
      }
      DramAddress da = region.bank;
      da.col = 0;
      HammerPair pair;
      pair.row_a = da.with_row(r);
      pair.row_b = da.with_row(r + 2);
      pair.addr_a = view.virtual_of(m, m.dram().to_physical(pair.row_a));
      pair.addr_b = view.virtual_of(m, m.dram().to_physical(pair.row_b));

      m.wait_until(boundary - offset_a);
      const std::size_t before = m.dram().flip_log().size();
      while (m.now() + offset_a < boundary + window) {
        direct_iteration(m, pair.addr_a, pair.addr_b, padding);
      }
      ++result.pairs_scanned;
      const auto& log = m.dram().flip_log();
      std::vector<FlipEvent> found;
      for (std::size_t i = before; i < log.size(); ++i) {
        if (interior(log[i].cell)) {
          found.push_back(log[i]);
        } else {
          ++result.stray_flips;
        }
      }
      if (!found.empty()) result.hits.push_back({pair, std::move(found)});
    }
    if (result.partial) break;
  }

  const auto& log = m.dram().flip_log();
  const std::vector<FlipEvent> found(log.begin() + static_cast<std::ptrdiff_t>(log_start),
                                     log.end());
  m.dram().restore(found);
  result.elapsed = m.now() - scan_start;
  return result;
}

FlipReport speculative_hammer(Machine& m, Gadget& gadget, const HammerPair& pair,
                              const AttackConfig& config, Cycles budget) {
  if (!pair.hammerable()) {
    throw MisuseError("speculative_hammer: pair rows must be distinct rows of one bank");
  }
  if (!config.train_k || !config.drain_len) {
    throw MisuseError("speculative_hammer: training count and drain length not calibrated");
  }
  std::map<std::uint64_t, std::vector<VirtAddr>> eviction_sets;
  HammerRoundOptions opts;
  opts.partner = pair.addr_b;
  opts.speculative_partner = config.mode == HammerMode::PureSpeculative;
  opts.padding = config.padding;
  opts.flush_mode = config.flush_mode;
  if (config.flush_mode == FlushMode::Eviction) {
    eviction_sets = build_eviction_sets(
        m, {pair.addr_a, pair.addr_b, gadget.victim().array_size_location},
        config.eviction_set_size);
    opts.eviction_sets = &eviction_sets;
  }
  const std::size_t before = m.dram().flip_log().size();
  if (budget == 0) return {};
  gadget.hammer_round(pair.addr_a, *config.train_k, *config.drain_len, opts);
  const DramAddress rows[] = {pair.row_a, pair.row_b};
  return hammer_loop(m, rows, budget, before, [&] {
    gadget.hammer_round(pair.addr_a, *config.train_k, *config.drain_len, opts);
  });
}

FlipReport one_location_hammer(Machine& m, Gadget& gadget, VirtAddr addr,
                               const AttackConfig& config, Cycles budget) {
  if (!m.dram().config().closed_page) {
    throw MisuseError("one-location hammering needs the closed-page policy");
  }
  if (!config.train_k || !config.drain_len) {
    throw MisuseError("one_location_hammer: training count and drain length not calibrated");
  }
  std::map<std::uint64_t, std::vector<VirtAddr>> eviction_sets;
  HammerRoundOptions opts;
  opts.padding = config.padding;
  opts.flush_mode = config.flush_mode;
  if (config.flush_mode == FlushMode::Eviction) {
    eviction_sets = build_eviction_sets(m, {addr, gadget.victim().array_size_location},
                                        config.eviction_set_size);
    opts.eviction_sets = &eviction_sets;
  }
  const std::size_t before = m.dram().flip_log().size();
  if (budget == 0) return {};
  gadget.hammer_round(addr, *config.train_k, *config.drain_len, opts);
  const DramAddress rows[] = {m.dram_of(addr)};
  return hammer_loop(m, rows, budget, before, [&] {
    gadget.hammer_round(addr, *config.train_k, *config.drain_len, opts);
  });
}

AttackOutcome full_attack(Machine& m, const AttackPlan& plan) {
  AttackOutcome out;
  const Cycles t0 = m.now();
  const AttackerView calibration_view{true};
  out.scan = scan_vulnerable_pairs(m, calibration_view, plan.regions, plan.scan_budget);
  out.scan_time = m.now() - t0;
  if (out.scan.hits.empty()) {
    out.no_target = true;
    out.total_time = m.now() - t0;
    return out;
  }

  const std::uint64_t queries_before = m.pages().query_count();
  AttackConfig cfg = plan.attack;
  Cycles remaining = cfg.budget;
  const auto wall0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < out.scan.hits.size() && remaining > 0; ++i) {
    const HammerPair& pair = out.scan.hits[i].pair;
    Gadget gadget(m, make_victim_layout(m, pair.addr_a, plan.array_size), plan.gadget);
    if (!cfg.train_k) cfg.train_k = gadget.calibrate_min_training(pair.addr_a);
    if (!cfg.drain_len) cfg.drain_len = gadget.calibrate_drain_loop(*cfg.train_k, pair.addr_a);
    if (i == 0) {
      HammerRoundOptions opts;
      opts.partner = pair.addr_b;
      opts.padding = cfg.padding;
      out.calibration = {*cfg.train_k, *cfg.drain_len,
                         gadget.measure_round_cost(pair.addr_a, *cfg.train_k, *cfg.drain_len,
                                                   opts)};
    }
    const Cycles budget =
        cfg.pair_budget > 0 ? std::min(cfg.pair_budget, remaining) : remaining;
    FlipReport rep = speculative_hammer(m, gadget, pair, cfg, budget);
    out.report.iterations += rep.iterations;
    out.report.virtual_time += rep.virtual_time;
    out.report.per_iteration_cost = rep.per_iteration_cost;
    out.report.fast_forwarded = out.report.fast_forwarded || rep.fast_forwarded;
    remaining -= std::min(remaining, rep.virtual_time);
    if (rep.success()) {
      out.report.flips = std::move(rep.flips);
      out.pair_index = i;
      break;
    }
  }
  out.report.wall_time = seconds_since(wall0);
  out.page_queries_during_attack = m.pages().query_count() - queries_before;
  out.total_time = m.now() - t0;
  return out;
}

}  // namespace simhammer

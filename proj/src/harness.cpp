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

#include "simhammer/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace simhammer {

namespace {

using json = nlohmann::ordered_json;

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::uint64_t flat_bank(const DramGeometry& g, const DramAddress& a) {
  return ((std::uint64_t{a.channel} * g.dimms_per_channel + a.dimm) * g.ranks + a.rank) *
             g.banks_per_rank +
         a.bank;
}

json location_json(const DramAddress& a) {
  return json{{"channel", a.channel}, {"dimm", a.dimm}, {"rank", a.rank},
              {"bank", a.bank},       {"row", a.row},   {"col", a.col}};
}

json flip_json(const FlipEvent& f) {
  json j = location_json(f.cell);
  j["bit"] = f.bit;
  j["direction"] = to_string(f.direction);
  j = json{{"cycle", f.cycle}, {"location", j}};
  return j;
}

json pair_json(const DramGeometry& g, const HammerPair& p) {
  return json{{"addr_a", p.addr_a.value},
              {"addr_b", p.addr_b.value},
              {"bank", flat_bank(g, p.row_a)},
              {"row_a", p.row_a.row},
              {"row_b", p.row_b.row},
              {"victim_row", p.victim_row()}};
}

struct Calibrated {
  unsigned k;
  std::uint64_t drain;
};

Calibrated calibrated(const ExperimentConfig& cfg, const Gadget& g, VirtAddr vul) {
  const unsigned k = cfg.attack.train_k ? *cfg.attack.train_k : g.calibrate_min_training(vul);
  const std::uint64_t drain =
      cfg.attack.drain_len ? *cfg.attack.drain_len : g.calibrate_drain_loop(k, vul);
  return {k, drain};
}

void write_file(const std::filesystem::path& p, const std::string& text,
                std::vector<std::filesystem::path>& written) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw SimError("cannot write " + p.string());
  out << text;
  if (!out) throw SimError("write failed for " + p.string());
  written.push_back(p);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

HammerPair target_pair(const Machine& m, const ExperimentConfig& cfg) {
  HammerPair p;
  p.row_a = cfg.target.with_row(cfg.target.row - 1);
  p.row_b = cfg.target.with_row(cfg.target.row + 1);
  p.row_a.col = p.row_b.col = 0;
  p.addr_a = m.virt_of(p.row_a);
  p.addr_b = m.virt_of(p.row_b);
  return p;
}

CalibrateResult run_calibrate(const ExperimentConfig& cfg) {
  Machine m(cfg.machine);
  const HammerPair pair = target_pair(m, cfg);
  Gadget g(m, make_victim_layout(m, pair.addr_a, cfg.array_size), cfg.gadget);
  CalibrateResult r;
  r.counter_bits = cfg.machine.cpu.counter_bits;
  r.report.min_training = g.calibrate_min_training(pair.addr_a);
  r.report.drain_len = g.calibrate_drain_loop(r.report.min_training, pair.addr_a);
  HammerRoundOptions opts;
  opts.partner = pair.addr_b;
  opts.padding = cfg.attack.padding;
  r.report.round_cost =
      g.measure_round_cost(pair.addr_a, r.report.min_training, r.report.drain_len, opts);
  return r;
}

std::uint64_t Fig2Result::successes(bool drain_on) const {
  return static_cast<std::uint64_t>(std::count_if(rows.begin(), rows.end(), [&](const auto& r) {
    return r.drain_on == drain_on && r.success;
  }));
}

Fig2Result run_fig2(const ExperimentConfig& cfg) {
  Machine m(cfg.machine);
  const HammerPair pair = target_pair(m, cfg);
  Gadget g(m, make_victim_layout(m, pair.addr_a, cfg.array_size), cfg.gadget);
  const Calibrated c = calibrated(cfg, g, pair.addr_a);
  Fig2Result r;
  r.train_k = c.k;
  r.drain_len = c.drain;
  r.rows.reserve(2 * cfg.fig2_trials);
  for (int on = 0; on < 2; ++on) {
    for (std::uint64_t t = 0; t < cfg.fig2_trials; ++t) {
      const RoundResult rr = g.verify_round(c.k, on ? c.drain : 0, pair.addr_a);
      r.rows.push_back({t, on == 1, rr.success, rr.probe_latency});
    }
  }
  return r;
}

std::vector<Fig3aRow> run_fig3a(const ExperimentConfig& cfg) {
  const auto& pads = cfg.fig3a_padding;
  std::vector<Fig3aRow> rows(pads.size());
  auto one = [&](std::size_t i) {
    Machine m(cfg.machine);
    m.memory().set_jitter_max(cfg.fig3a_jitter_max);
    const HammerPair pair = target_pair(m, cfg);
    Fig3aRow row;
    row.padding = pads[i];
    row.per_hammer_cost = direct_iteration_cost(m.timing(), pads[i]);
    if (cfg.fig3a_jitter_max == 0) {
      const DramAddress aggressors[] = {pair.row_a, pair.row_b};
      const auto threshold = m.dram().min_armed_threshold_near(aggressors);
      if (!threshold || !flip_reachable(m.dram().config().refresh_interval, row.per_hammer_cost,
                                        *threshold)) {
        row.short_circuited = true;
        rows[i] = row;
        return;
      }
    }
    const Cycles start = m.now();
    const FlipReport rep = direct_hammer(m, pair, pads[i], cfg.fig3a_budget);
    if (rep.success()) row.first_flip = rep.flips.front().cycle - start;
    row.short_circuited = rep.fast_forwarded;
    rows[i] = row;
  };

  unsigned threads = cfg.fig3a_threads ? cfg.fig3a_threads : std::thread::hardware_concurrency();
  threads = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(pads.size())));
  if (threads <= 1) {
    for (std::size_t i = 0; i < pads.size(); ++i) one(i);
    return rows;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < pads.size(); i = next++) {
        try {
          one(i);
        } catch (...) {
          const std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return rows;
}

Fig3bResult run_fig3b(const ExperimentConfig& cfg) {
  Machine m(cfg.machine);
  const HammerPair pair = target_pair(m, cfg);
  Gadget g(m, make_victim_layout(m, pair.addr_a, cfg.array_size), cfg.gadget);
  const Calibrated c = calibrated(cfg, g, pair.addr_a);
  HammerRoundOptions opts;
  opts.partner = pair.addr_b;
  opts.padding = cfg.attack.padding;
  Fig3bResult r;
  r.train_k = c.k;
  r.drain_len = c.drain;
  r.samples = g.sample_round_costs(pair.addr_a, c.k, c.drain, cfg.fig3b_samples, opts);
  if (r.samples.empty()) return r;

  const auto [mn, mx] = std::minmax_element(r.samples.begin(), r.samples.end());
  r.min = *mn;
  r.max = *mx;
  const Cycles w = cfg.fig3b_bin_width;
  const Cycles first = r.min / w * w;
  r.bins.resize((r.max - first) / w + 1);
  for (std::size_t i = 0; i < r.bins.size(); ++i) {
    r.bins[i].lo = first + i * w;
    r.bins[i].hi = r.bins[i].lo + w;
  }
  double sum = 0;
  std::uint64_t in_band = 0, below = 0;
  for (Cycles s : r.samples) {
    ++r.bins[(s - first) / w].count;
    sum += static_cast<double>(s);
    if (s >= 1200 && s <= 1400) ++in_band;
    if (s < 1500) ++below;
  }
  const double n = static_cast<double>(r.samples.size());
  r.mean = sum / n;
  r.fraction_1200_1400 = static_cast<double>(in_band) / n;
  r.fraction_below_1500 = static_cast<double>(below) / n;
  return r;
}

ScanResult run_scan(const ExperimentConfig& cfg) {
  Machine m(cfg.machine);
  const AttackerView calibration_view{true};
  return scan_vulnerable_pairs(m, calibration_view, cfg.scan_regions, cfg.scan_budget,
                               cfg.scan_padding);
}

AttackPlan attack_plan(const ExperimentConfig& cfg) {
  AttackPlan plan;
  plan.regions = cfg.scan_regions;
  plan.scan_budget = cfg.scan_budget;
  plan.attack = cfg.attack;
  plan.gadget = cfg.gadget;
  plan.array_size = cfg.array_size;
  plan.attacker = AttackerView{cfg.attacker_knows_physical};
  return plan;
}

AttackRun run_attack(const ExperimentConfig& cfg) {
  Machine m(cfg.machine);
  AttackRun run;
  run.outcome = full_attack(m, attack_plan(cfg));
  run.template_cells = cfg.machine.flip_template.cells.size();
  return run;
}

std::string calibration_json(const ExperimentConfig& cfg, const CalibrateResult& r) {
  json j;
  j["status"] = "ok";
  j["min_training"] = r.report.min_training;
  j["drain_len"] = r.report.drain_len;
  j["round_cost"] = r.report.round_cost;
  j["counter_bits"] = r.counter_bits;
  j["backlog_accrual"] = cfg.machine.cpu.backlog_accrual;
  j["seed"] = cfg.seed;
  return j.dump(2) + "\n";
}

std::string fig2_csv(const Fig2Result& r) {
  std::ostringstream os;
  os << "trial,drain_on,success\n";
  for (const auto& row : r.rows) {
    os << row.trial << ',' << (row.drain_on ? 1 : 0) << ',' << (row.success ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string fig3a_csv(const ExperimentConfig& cfg, const std::vector<Fig3aRow>& rows) {
  std::ostringstream os;
  os << "padding,per_hammer_cost,first_flip_cycles,first_flip_seconds\n";
  for (const auto& r : rows) {
    os << r.padding << ',' << r.per_hammer_cost << ',';
    if (r.first_flip) {
      os << *r.first_flip << ',' << fixed(cfg.seconds(*r.first_flip), 6);
    } else {
      os << "none,none";
    }
    os << '\n';
  }
  return os.str();
}

std::string fig3b_csv(const Fig3bResult& r) {
  std::ostringstream os;
  os << "bin_lo,bin_hi,count\n";
  for (const auto& b : r.bins) os << b.lo << ',' << b.hi << ',' << b.count << '\n';
  return os.str();
}

std::string fig3b_json(const Fig3bResult& r) {
  json j;
  j["samples"] = r.samples.size();
  j["train_k"] = r.train_k;
  j["drain_len"] = r.drain_len;
  j["min"] = r.min;
  j["max"] = r.max;
  j["mean"] = r.mean;
  j["fraction_1200_1400"] = r.fraction_1200_1400;
  j["fraction_below_1500"] = r.fraction_below_1500;
  return j.dump(2) + "\n";
}

std::string pairs_csv(const DramGeometry& g, const ScanResult& scan) {
  std::ostringstream os;
  os << "addr_a,addr_b,bank,row_a,row_b,victim_row\n";
  for (const auto& h : scan.hits) {
    const auto& p = h.pair;
    os << p.addr_a.value << ',' << p.addr_b.value << ',' << flat_bank(g, p.row_a)
       << ',' << p.row_a.row << ',' << p.row_b.row << ',' << p.victim_row() << '\n';
  }
  return os.str();
}

std::string flips_csv(const std::vector<FlipEvent>& flips) {
  std::ostringstream os;
  os << "cycle,channel,dimm,rank,bank,row,col,bit,direction\n";
  for (const auto& f : flips) {
    const auto& a = f.cell;
    os << f.cycle << ',' << a.channel << ',' << a.dimm << ',' << a.rank << ',' << a.bank << ','
       << a.row << ',' << a.col << ',' << f.bit << ',' << to_string(f.direction) << '\n';
  }
  return os.str();
}

namespace {

json scan_summary(const ExperimentConfig& cfg, const ScanResult& scan) {
  json hits = json::array();
  for (const auto& h : scan.hits) {
    json flips = json::array();
    for (const auto& f : h.flips) flips.push_back(flip_json(f));
    json hj = pair_json(cfg.machine.dram.geometry, h.pair);
    hj["flips"] = flips;
    hits.push_back(hj);
  }
  return json{{"pairs_scanned", scan.pairs_scanned},
              {"partial", scan.partial},
              {"per_iteration_cost", scan.per_iteration_cost},
              {"elapsed_cycles", scan.elapsed},
              {"elapsed_seconds", cfg.seconds(scan.elapsed)},
              {"hits", hits}};
}

std::vector<FlipEvent> all_scan_flips(const ScanResult& scan) {
  std::vector<FlipEvent> out;
  for (const auto& h : scan.hits) out.insert(out.end(), h.flips.begin(), h.flips.end());
  return out;
}

}  // namespace

std::string scan_json(const ExperimentConfig& cfg, const ScanResult& scan) {
  return scan_summary(cfg, scan).dump(2) + "\n";
}

std::string attack_json(const ExperimentConfig& cfg, const AttackRun& run, double wall_seconds) {
  const AttackOutcome& o = run.outcome;
  json j;
  j["status"] = o.no_target ? "no_target" : (o.report.success() ? "success" : "no_flip");
  j["seed"] = cfg.seed;
  j["template_cells"] = run.template_cells;
  j["scan"] = scan_summary(cfg, o.scan);
  j["calibration"] = json{{"min_training", o.calibration.min_training},
                          {"drain_len", o.calibration.drain_len},
                          {"round_cost", o.calibration.round_cost}};
  j["pair"] = o.pair_index ? pair_json(cfg.machine.dram.geometry, o.scan.hits[*o.pair_index].pair) : json(nullptr);
  json flips = json::array();
  for (const auto& f : o.report.flips) flips.push_back(flip_json(f));
  j["hammer"] = json{{"mode", cfg.attack.mode == HammerMode::Hybrid ? "hybrid" : "pure"},
                     {"flush", cfg.attack.flush_mode == FlushMode::Clflush ? "clflush"
                                                                           : "eviction"},
                     {"iterations", o.report.iterations},
                     {"per_iteration_cost", o.report.per_iteration_cost},
                     {"virtual_time_cycles", o.report.virtual_time},
                     {"virtual_time_seconds", cfg.seconds(o.report.virtual_time)},
                     {"fast_forwarded", o.report.fast_forwarded},
                     {"flips", flips}};
  if (o.report.success()) {
    j["first_flip_cycles"] = o.report.flips.front().cycle;
    j["first_flip_seconds"] = cfg.seconds(o.report.flips.front().cycle);
  } else {
    j["first_flip_cycles"] = nullptr;
    j["first_flip_seconds"] = nullptr;
  }
  j["total_time_cycles"] = o.total_time;
  j["total_time_seconds"] = cfg.seconds(o.total_time);
  j["page_queries_during_attack"] = o.page_queries_during_attack;
  if (cfg.output_wall_time) j["wall_time_seconds"] = wall_seconds;
  return j.dump(2) + "\n";
}

std::vector<std::filesystem::path> run_command(const std::string& command,
                                               const ExperimentConfig& cfg,
                                               const std::filesystem::path& out_dir,
                                               std::ostream& log) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  const auto t0 = std::chrono::steady_clock::now();

  if (command == "calibrate") {
    CalibrateResult r;
    try {
      r = run_calibrate(cfg);
    } catch (const CalibrationError& e) {
      json j{{"status", "failed"}, {"error", e.what()}, {"seed", cfg.seed}};
      write_file(out_dir / "calibration.json", j.dump(2) + "\n", written);
      throw;
    }
    write_file(out_dir / "calibration.json", calibration_json(cfg, r), written);
    log << "min_training " << r.report.min_training << ", drain_len " << r.report.drain_len
        << ", round_cost " << r.report.round_cost << '\n';
  } else if (command == "fig2") {
    const Fig2Result r = run_fig2(cfg);
    write_file(out_dir / "fig2.csv", fig2_csv(r), written);
    log << "drain off: " << r.successes(false) << '/' << cfg.fig2_trials
        << ", drain on (" << r.drain_len << "): " << r.successes(true) << '/' << cfg.fig2_trials
        << '\n';
  } else if (command == "fig3a") {
    const auto rows = run_fig3a(cfg);
    write_file(out_dir / "fig3a.csv", fig3a_csv(cfg, rows), written);
    Cycles boundary = 0;
    for (const auto& r : rows) {
      if (r.first_flip) boundary = std::max(boundary, r.per_hammer_cost);
    }
    log << rows.size() << " costs, largest cost with a flip: " << boundary << '\n';
  } else if (command == "fig3b") {
    const Fig3bResult r = run_fig3b(cfg);
    write_file(out_dir / "fig3b.csv", fig3b_csv(r), written);
    write_file(out_dir / "fig3b.json", fig3b_json(r), written);
    log << r.samples.size() << " samples, max " << r.max << ", in [1200,1400]: "
        << fixed(100.0 * r.fraction_1200_1400, 2) << "%\n";
  } else if (command == "scan") {
    const ScanResult r = run_scan(cfg);
    write_file(out_dir / "pairs.csv", pairs_csv(cfg.machine.dram.geometry, r), written);
    write_file(out_dir / "scan_flips.csv", flips_csv(all_scan_flips(r)), written);
    write_file(out_dir / "scan.json", scan_json(cfg, r), written);
    log << r.hits.size() << " vulnerable pairs out of " << r.pairs_scanned
        << (r.partial ? " (budget exhausted, partial)" : "") << '\n';
  } else if (command == "attack") {
    const AttackRun run = run_attack(cfg);
    const double wall = seconds_since(t0);
    write_file(out_dir / "attack.json", attack_json(cfg, run, wall), written);
    write_file(out_dir / "attack_flips.csv", flips_csv(run.outcome.report.flips), written);
    write_file(out_dir / "pairs.csv", pairs_csv(cfg.machine.dram.geometry, run.outcome.scan), written);
    const auto& o = run.outcome;
    if (o.no_target) {
      log << "no vulnerable pairs found\n";
    } else if (o.report.success()) {
      const auto& f = o.report.flips.front();
      log << "flip at " << to_string(f.cell) << " bit " << f.bit << " after "
          << fixed(cfg.seconds(o.total_time), 3) << " s virtual\n";
    } else {
      log << "no flip within the budget\n";
    }
  } else {
    throw MisuseError("unknown command '" + command + "'");
  }
  log << command << " wall time " << fixed(seconds_since(t0), 3) << " s\n";
  return written;
}

}  // namespace simhammer

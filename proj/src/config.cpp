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

#include "simhammer/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace simhammer {

namespace {

#include "simhammer_presets.inc"

constexpr int kMaxIncludeDepth = 16;

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::uint64_t parse_u64(const std::string& raw, const std::string& what) {
  std::string s;
  for (char c : trim(raw)) {
    if (c != '_' && c != '\'') s.push_back(c);
  }
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ConfigError(what + ": expected a non-negative integer, got '" + raw + "'");
  }
  return v;
}

double parse_double(const std::string& raw, const std::string& what) {
  const std::string s = trim(raw);
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size() || !std::isfinite(v)) {
    throw ConfigError(what + ": expected a number, got '" + raw + "'");
  }
  return v;
}

bool parse_bool(const std::string& raw, const std::string& what) {
  std::string s = trim(raw);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(what + ": expected true or false, got '" + raw + "'");
}

std::uint32_t parse_u32(const std::string& raw, const std::string& what) {
  const std::uint64_t v = parse_u64(raw, what);
  if (v > 0xffffffffULL) throw ConfigError(what + ": value too large");
  return static_cast<std::uint32_t>(v);
}

std::vector<std::string> fields(const std::string& value, std::size_t n, const std::string& what,
                                const std::string& shape) {
  auto parts = split(value, ':');
  if (parts.size() != n) {
    throw ConfigError(what + ": expected " + shape + ", got '" + value + "'");
  }
  return parts;
}

DramAddress parse_bank_prefix(const std::vector<std::string>& p, const std::string& what) {
  DramAddress a;
  a.channel = parse_u32(p[0], what);
  a.dimm = parse_u32(p[1], what);
  a.rank = parse_u32(p[2], what);
  a.bank = parse_u32(p[3], what);
  return a;
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& p : kPresets) names.emplace_back(p.name);
  return names;
}

const std::string& preset_text(const std::string& name) {
  static const std::map<std::string, std::string> texts = [] {
    std::map<std::string, std::string> m;
    for (const auto& p : kPresets) m.emplace(p.name, p.text);
    return m;
  }();
  const auto it = texts.find(name);
  if (it == texts.end()) throw ConfigError("unknown preset '" + name + "'");
  return it->second;
}

ConfigSource ConfigSource::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  ConfigSource src;
  src.parse(ss.str(), path.string(), path.parent_path(), 0);
  return src;
}

ConfigSource ConfigSource::from_string(const std::string& text, const std::string& origin,
                                       const std::filesystem::path& base_dir) {
  ConfigSource src;
  src.parse(text, origin, base_dir, 0);
  return src;
}

ConfigSource ConfigSource::preset(const std::string& name) {
  ConfigSource src;
  src.parse(preset_text(name), "preset:" + name, {}, 0);
  return src;
}

void ConfigSource::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void ConfigSource::set(const std::string& key, const std::string& value) {
  if (key == "include") {
    parse("include = " + value, "<override>", std::filesystem::current_path(), 0);
    return;
  }
  entries_.push_back({key, value, "<override>"});
}

void ConfigSource::parse(const std::string& text, const std::string& origin,
                         const std::filesystem::path& base_dir, int depth) {
  if (depth > kMaxIncludeDepth) throw ConfigError(origin + ": includes nested too deeply");
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (key != "include") {
      entries_.push_back({key, value, where});
      continue;
    }
    const auto names = preset_names();
    if (std::find(names.begin(), names.end(), value) != names.end()) {
      parse(preset_text(value), "preset:" + value, {}, depth + 1);
      continue;
    }
    std::filesystem::path p(value);
    if (p.is_relative()) p = base_dir / p;
    std::ifstream f(p);
    if (!f) throw ConfigError(where + ": cannot include '" + value + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    parse(ss.str(), p.string(), p.parent_path(), depth + 1);
  }
}

std::vector<Cycles> parse_cycle_list(const std::string& text) {
  std::set<Cycles> values;
  for (const auto& item : split(text, ',')) {
    if (item.empty()) continue;
    const auto parts = split(item, ':');
    if (parts.size() == 1) {
      values.insert(parse_u64(parts[0], "cycle list"));
      continue;
    }
    if (parts.size() > 3) throw ConfigError("cycle list: bad range '" + item + "'");
    const Cycles lo = parse_u64(parts[0], "cycle list");
    const Cycles hi = parse_u64(parts[1], "cycle list");
    const Cycles step = parts.size() == 3 ? parse_u64(parts[2], "cycle list") : 1;
    if (step == 0 || lo > hi) throw ConfigError("cycle list: bad range '" + item + "'");
    for (Cycles v = lo; v <= hi; v += step) values.insert(v);
  }
  return {values.begin(), values.end()};
}

Cycles parse_cycles(const std::string& raw, double frequency_hz) {
  const std::string s = trim(raw);
  static const std::pair<const char*, double> units[] = {
      {"min", 60.0}, {"ms", 1e-3}, {"us", 1e-6}, {"ns", 1e-9}, {"h", 3600.0}, {"s", 1.0}};
  for (const auto& [suffix, scale] : units) {
    const std::string_view sv(suffix);
    if (s.size() > sv.size() && s.compare(s.size() - sv.size(), sv.size(), sv) == 0) {
      const double amount = parse_double(s.substr(0, s.size() - sv.size()), "duration");
      if (amount < 0) throw ConfigError("duration must be non-negative: '" + raw + "'");
      return static_cast<Cycles>(std::llround(amount * scale * frequency_hz));
    }
  }
  return parse_u64(s, "cycles");
}

ExperimentConfig build_config(const ConfigSource& source) {
  ExperimentConfig cfg;
  auto& dram = cfg.machine.dram;
  auto& g = dram.geometry;
  auto& t = dram.timing;
  auto& cache = cfg.machine.cache;
  auto& cpu = cfg.machine.cpu;
  auto& gadget = cfg.gadget;
  auto& attack = cfg.attack;

  double freq = cpu.frequency_hz;
  for (const auto& e : source.entries()) {
    if (e.key == "cpu.frequency_hz") freq = parse_double(e.value, e.origin);
  }
  if (freq <= 0) throw ConfigError("cpu.frequency_hz must be positive");

  std::optional<DramAddress> target;
  std::optional<std::uint64_t> jitter_seed;
  std::uint64_t pair_windows = 8;
  std::string fig3a_padding = "0:2000:100";
  cfg.scan_budget = parse_cycles("10s", freq);
  cfg.fig3a_budget = parse_cycles("2h", freq);
  attack.budget = parse_cycles("2h", freq);

  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto u32 = [](std::uint32_t& f) {
    return Setter([&f](const std::string& v, const std::string& w) { f = parse_u32(v, w); });
  };
  auto u64 = [](std::uint64_t& f) {
    return Setter([&f](const std::string& v, const std::string& w) { f = parse_u64(v, w); });
  };
  auto cyc = [freq](Cycles& f) {
    return Setter([&f, freq](const std::string& v, const std::string&) {
      f = parse_cycles(v, freq);
    });
  };
  auto flag = [](bool& f) {
    return Setter([&f](const std::string& v, const std::string& w) { f = parse_bool(v, w); });
  };
  auto size = [](std::size_t& f) {
    return Setter([&f](const std::string& v, const std::string& w) { f = parse_u64(v, w); });
  };
  auto uns = [](unsigned& f) {
    return Setter([&f](const std::string& v, const std::string& w) { f = parse_u32(v, w); });
  };

  const std::map<std::string, Setter> setters = {
      {"seed", u64(cfg.seed)},
      {"dram.channels", u32(g.channels)},
      {"dram.dimms", u32(g.dimms_per_channel)},
      {"dram.ranks", u32(g.ranks)},
      {"dram.banks", u32(g.banks_per_rank)},
      {"dram.rows", u32(g.rows_per_bank)},
      {"dram.cols", u32(g.cols_per_row)},
      {"dram.refresh_interval", cyc(dram.refresh_interval)},
      {"dram.closed_page", flag(dram.closed_page)},
      {"timing.cache_hit", cyc(t.cache_hit)},
      {"timing.rowbuf_hit", cyc(t.rowbuf_hit)},
      {"timing.rowbuf_miss", cyc(t.rowbuf_miss)},
      {"timing.clflush", cyc(t.clflush)},
      {"timing.alu_op", cyc(t.alu_op)},
      {"timing.jitter_max", cyc(t.jitter_max)},
      {"timing.jitter_seed",
       [&](const std::string& v, const std::string& w) { jitter_seed = parse_u64(v, w); }},
      {"cache.sets", u32(cache.sets)},
      {"cache.ways", u32(cache.ways)},
      {"cache.line_size", u32(cache.line_size)},
      {"cpu.counter_bits", uns(cpu.counter_bits)},
      {"cpu.pht_entries", size(cpu.pht_entries)},
      {"cpu.backlog_accrual", cyc(cpu.backlog_accrual)},
      {"cpu.fence_drains", flag(cpu.fence_drains)},
      {"cpu.fence_cost", cyc(cpu.fence_cost)},
      {"cpu.syscall_cost", cyc(cpu.syscall_cost)},
      {"cpu.frequency_hz",
       [&](const std::string& v, const std::string& w) { cpu.frequency_hz = parse_double(v, w); }},
      {"gadget.threshold", cyc(gadget.threshold)},
      {"gadget.trials", u64(gadget.trials)},
      {"gadget.drain_max", u64(gadget.drain_max)},
      {"gadget.baseline_training", uns(gadget.baseline_training)},
      {"gadget.calibration_rounds", uns(gadget.calibration_rounds)},
      {"gadget.reset_predictor", flag(gadget.reset_predictor)},
      {"gadget.branch_id", u64(gadget.branch_id)},
      {"gadget.array_size", u64(cfg.array_size)},
      {"template.clear",
       [&](const std::string& v, const std::string& w) {
         if (parse_bool(v, w)) cfg.machine.flip_template.cells.clear();
       }},
      {"template.cell",
       [&](const std::string& v, const std::string& w) {
         const auto p = fields(v, 9, w, "ch:dimm:rank:bank:row:col:bit:dir:threshold");
         TemplateCell c;
         c.cell = parse_bank_prefix(p, w);
         c.cell.row = parse_u32(p[4], w);
         c.cell.col = parse_u32(p[5], w);
         c.bit = parse_u32(p[6], w);
         c.direction = parse_flip_direction(p[7]);
         c.threshold = parse_u64(p[8], w);
         cfg.machine.flip_template.cells.push_back(c);
       }},
      {"target",
       [&](const std::string& v, const std::string& w) {
         const auto p = fields(v, 5, w, "ch:dimm:rank:bank:row");
         DramAddress a = parse_bank_prefix(p, w);
         a.row = parse_u32(p[4], w);
         target = a;
       }},
      {"scan.clear",
       [&](const std::string& v, const std::string& w) {
         if (parse_bool(v, w)) cfg.scan_regions.clear();
       }},
      {"scan.region",
       [&](const std::string& v, const std::string& w) {
         const auto p = fields(v, 6, w, "ch:dimm:rank:bank:row_lo:row_hi");
         ScanRegion r;
         r.bank = parse_bank_prefix(p, w);
         r.row_lo = parse_u32(p[4], w);
         r.row_hi = parse_u32(p[5], w);
         cfg.scan_regions.push_back(r);
       }},
      {"scan.budget", cyc(cfg.scan_budget)},
      {"scan.padding", cyc(cfg.scan_padding)},
      {"attack.mode",
       [&](const std::string& v, const std::string& w) {
         if (v == "hybrid") {
           attack.mode = HammerMode::Hybrid;
         } else if (v == "pure" || v == "pure_speculative") {
           attack.mode = HammerMode::PureSpeculative;
         } else {
           throw ConfigError(w + ": attack.mode must be hybrid or pure");
         }
       }},
      {"attack.flush",
       [&](const std::string& v, const std::string& w) {
         if (v == "clflush") {
           attack.flush_mode = FlushMode::Clflush;
         } else if (v == "eviction") {
           attack.flush_mode = FlushMode::Eviction;
         } else {
           throw ConfigError(w + ": attack.flush must be clflush or eviction");
         }
       }},
      {"attack.eviction_set_size", size(attack.eviction_set_size)},
      {"attack.train_k",
       [&](const std::string& v, const std::string& w) {
         if (v == "auto") {
           attack.train_k.reset();
         } else {
           attack.train_k = parse_u32(v, w);
         }
       }},
      {"attack.drain_len",
       [&](const std::string& v, const std::string& w) {
         if (v == "auto") {
           attack.drain_len.reset();
         } else {
           attack.drain_len = parse_u64(v, w);
         }
       }},
      {"attack.padding", cyc(attack.padding)},
      {"attack.pair_windows", u64(pair_windows)},
      {"attack.budget", cyc(attack.budget)},
      {"attacker.mapping",
       [&](const std::string& v, const std::string& w) {
         if (v == "identity") {
           cfg.machine.mapping = MappingMode::Identity;
         } else if (v == "randomized") {
           cfg.machine.mapping = MappingMode::RandomizedPages;
         } else {
           throw ConfigError(w + ": attacker.mapping must be identity or randomized");
         }
       }},
      {"attacker.knows_physical", flag(cfg.attacker_knows_physical)},
      {"fig2.trials", u64(cfg.fig2_trials)},
      {"fig3a.padding", [&](const std::string& v, const std::string&) { fig3a_padding = v; }},
      {"fig3a.budget", cyc(cfg.fig3a_budget)},
      {"fig3a.jitter_max", cyc(cfg.fig3a_jitter_max)},
      {"fig3a.threads", uns(cfg.fig3a_threads)},
      {"fig3b.samples", size(cfg.fig3b_samples)},
      {"fig3b.bin_width", cyc(cfg.fig3b_bin_width)},
      {"output.dir", [&](const std::string& v, const std::string&) { cfg.output_dir = v; }},
      {"output.wall_time", flag(cfg.output_wall_time)},
  };

  for (const auto& e : source.entries()) {
    const auto it = setters.find(e.key);
    if (it == setters.end()) throw ConfigError(e.origin + ": unknown key '" + e.key + "'");
    it->second(e.value, e.origin + " (" + e.key + ")");
  }

  g.validate();
  t.validate();
  cache.validate();
  cpu.validate();
  cfg.machine.flip_template.validate(g);
  t.jitter_seed = jitter_seed.value_or(cfg.seed);
  cfg.machine.seed = cfg.seed;
  attack.pair_budget = pair_windows * dram.refresh_interval;
  cfg.fig3a_padding = parse_cycle_list(fig3a_padding);
  if (cfg.fig3b_bin_width == 0) throw ConfigError("fig3b.bin_width must be > 0");

  auto in_geometry = [&](const DramAddress& a) {
    return a.channel < g.channels && a.dimm < g.dimms_per_channel && a.rank < g.ranks &&
           a.bank < g.banks_per_rank && a.row < g.rows_per_bank;
  };
  for (const auto& r : cfg.scan_regions) {
    if (!in_geometry(r.bank) || r.row_hi >= g.rows_per_bank || r.row_lo > r.row_hi) {
      throw ConfigError("scan.region outside geometry: " + to_string(r.bank) + " rows " +
                        std::to_string(r.row_lo) + ".." + std::to_string(r.row_hi));
    }
  }
  if (target) {
    cfg.target = *target;
  } else if (!cfg.machine.flip_template.cells.empty()) {
    cfg.target = cfg.machine.flip_template.cells.front().cell;
  } else {
    cfg.target.row = g.rows_per_bank / 2;
  }
  cfg.target.col = 0;
  if (!in_geometry(cfg.target) || cfg.target.row == 0 ||
      cfg.target.row + 1 >= g.rows_per_bank) {
    throw ConfigError("target row needs a neighbour on both sides inside the geometry");
  }
  return cfg;
}

}  // namespace simhammer

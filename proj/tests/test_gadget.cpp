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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "simhammer/gadget.hpp"
#include "test_support.hpp"

using namespace simhammer;
using namespace simhammer::testing;

namespace {

// Exhaustive counter walk: taken updates from a reset counter until the
// prediction flips to taken.
unsigned trainings_until_taken(unsigned bits) {
  unsigned counter = 0, n = 0;
  const unsigned top = (1U << bits) - 1;
  while (!(counter >= (top + 1) / 2)) {
    counter = std::min(counter + 1, top);
    ++n;
  }
  return n;
}

struct Bench {
  Machine m;
  HammerPair pair;
  Gadget g;

  explicit Bench(MachineConfig mc, GadgetConfig gc = {})
      : m(mc), pair(pair_around(m, 0, 20)), g(m, make_victim_layout(m, pair.addr_a), gc) {}
};

}  // namespace

TEST_CASE("victim layout: array_size shares the target's bank on a quiet row") {
  MachineConfig mc = small_machine({cell_at(0, 20, 0, 0, 100)});
  Machine m(mc);
  const HammerPair p = pair_around(m, 0, 20);
  const VictimArray v = make_victim_layout(m, p.addr_a);
  const DramAddress size_loc = m.dram_of(v.array_size_location);
  CHECK(size_loc.same_bank(p.row_a));
  CHECK(size_loc.row != p.row_a.row);
  CHECK(std::abs(int(size_loc.row) - 20) > 1);
  CHECK(m.memory().cache().line_of(m.pages().translate(v.base)) !=
        m.memory().cache().line_of(m.pages().translate(v.array_size_location)));
  CHECK(v.array_size == 16);
}

TEST_CASE("in-bounds calls load architecturally and never speculate") {
  Bench b(small_machine());
  const auto out = b.g.victim_function(3);
  CHECK_FALSE(out.transient_executed);
  CHECK_FALSE(out.mispredicted_taken);
  CHECK(b.m.memory().cache().contains(b.m.pages().translate(VirtAddr{b.g.victim().base.value + 3})));
  CHECK(b.m.cpu().predictor().counter(b.g.config().branch_id) == 1);
}

TEST_CASE("verify round outcomes for training and drain") {
  Bench b(small_machine());
  const VirtAddr vul = b.pair.addr_a;
  b.g.verify_round(4, 280, vul);  // cold first call: training misses open the array row
  SUBCASE("no training: predicted not taken, no transient access") {
    const RoundResult r = b.g.verify_round(0, 280, vul);
    CHECK_FALSE(r.success);
    CHECK_FALSE(r.transient_executed);
    CHECK(r.mispredict_count_delta == 0);
  }
  SUBCASE("trained, no drain: the backlog closes the window") {
    const RoundResult r = b.g.verify_round(4, 0, vul);
    CHECK_FALSE(r.success);
    CHECK_FALSE(r.transient_executed);
    CHECK(r.mispredict_count_delta == 1);
    CHECK(r.probe_latency >= 180);
  }
  SUBCASE("trained and drained: probe hits the cache") {
    const RoundResult r = b.g.verify_round(4, 280, vul);
    CHECK(r.success);
    CHECK(r.transient_executed);
    CHECK(r.probe_latency == b.m.timing().cache_hit);
    CHECK(r.mispredict_count_delta == 1);
  }
  SUBCASE("one drain iteration short fails") {
    CHECK_FALSE(b.g.verify_round(4, 279, vul).success);
  }
  SUBCASE("vul inside the array is a misuse") {
    CHECK_THROWS_AS(b.g.verify_round(4, 280, b.g.victim().base), MisuseError);
  }
}

TEST_CASE("serializers: fences keep the backlog, syscalls clear it") {
  Bench b(small_machine());
  VerifyOptions fence;
  fence.serializer = Serializer::Fence;
  CHECK_FALSE(b.g.verify_round(4, 0, b.pair.addr_a, fence).success);
  VerifyOptions sys;
  sys.serializer = Serializer::Syscall;
  const RoundResult r = b.g.verify_round(4, 0, b.pair.addr_a, sys);
  CHECK(r.success);
  CHECK(r.round_cost > 1500);
}

TEST_CASE("minimal training equals the counter oracle for k = 1..4") {
  for (unsigned bits = 1; bits <= 4; ++bits) {
    MachineConfig mc = small_machine();
    mc.cpu.counter_bits = bits;
    Bench b(mc);
    CAPTURE(bits);
    CHECK(b.g.calibrate_min_training(b.pair.addr_a) == trainings_until_taken(bits));
  }
}

TEST_CASE("drain calibration returns the backlog accrual") {
  for (Cycles accrual : {0, 1, 57, 200, 280}) {
    MachineConfig mc = small_machine();
    mc.cpu.backlog_accrual = accrual;
    GadgetConfig gc;
    gc.trials = 50;
    Bench b(mc, gc);
    CAPTURE(accrual);
    CHECK(b.g.calibrate_drain_loop(4, b.pair.addr_a) == accrual);
  }
}

TEST_CASE("drain calibration fails when no drain is allowed") {
  GadgetConfig gc;
  gc.drain_max = 0;
  Bench b(small_machine(), gc);
  CHECK_THROWS_AS(b.g.calibrate_drain_loop(4, b.pair.addr_a), CalibrationError);
}

TEST_CASE("hybrid round cost matches the composition oracle over random timings") {
  Rng rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    MachineConfig mc = small_machine();
    TimingModel& t = mc.dram.timing;
    t.cache_hit = 10 + rng.below(80);
    t.rowbuf_hit = 110 + rng.below(100);
    t.rowbuf_miss = t.rowbuf_hit + 1 + rng.below(200);
    t.clflush = 1 + rng.below(190);
    t.alu_op = 1 + rng.below(3);
    mc.cpu.backlog_accrual = t.rowbuf_miss;
    const unsigned k = 4;
    const std::uint64_t drain = t.rowbuf_miss;
    const Cycles padding = rng.below(50);
    Bench b(mc);
    HammerRoundOptions opts;
    opts.partner = b.pair.addr_b;
    opts.padding = padding;
    // padding, flush a, flush b, k cached training calls, flush array_size,
    // drain, attack call (array_size from DRAM), direct load of b.
    const Cycles oracle = padding * t.alu_op + 3 * t.clflush +
                          k * (2 * t.cache_hit + 2 * t.alu_op) + drain * t.alu_op +
                          t.rowbuf_miss + 2 * t.alu_op + t.rowbuf_miss;
    CAPTURE(trial);
    CHECK(b.g.measure_round_cost(b.pair.addr_a, k, drain, opts) == oracle);
  }
}

TEST_CASE("default hybrid round costs 1320 and activates both aggressors") {
  Bench b(small_machine());
  HammerRoundOptions opts;
  opts.partner = b.pair.addr_b;
  CHECK(b.g.measure_round_cost(b.pair.addr_a, 4, 280, opts) == 1320);
  b.g.hammer_round(b.pair.addr_a, 4, 280, opts);
  const auto a0 = b.m.dram().activations(b.pair.row_a);
  const auto b0 = b.m.dram().activations(b.pair.row_b);
  for (int i = 0; i < 10; ++i) {
    const RoundResult r = b.g.hammer_round(b.pair.addr_a, 4, 280, opts);
    CHECK(r.transient_executed);
  }
  CHECK(b.m.dram().activations(b.pair.row_a) - a0 == 10);
  CHECK(b.m.dram().activations(b.pair.row_b) - b0 == 10);
}

TEST_CASE("the very first round runs cold and misses its window") {
  Bench b(small_machine());
  HammerRoundOptions opts;
  opts.partner = b.pair.addr_b;
  CHECK_FALSE(b.g.hammer_round(b.pair.addr_a, 4, 280, opts).transient_executed);
  CHECK(b.g.hammer_round(b.pair.addr_a, 4, 280, opts).transient_executed);
}

TEST_CASE("jittered round costs stay within two noisy accesses of nominal") {
  MachineConfig mc = small_machine();
  mc.dram.timing.jitter_max = 50;
  mc.dram.timing.jitter_seed = 4;
  Bench b(mc);
  HammerRoundOptions opts;
  opts.partner = b.pair.addr_b;
  const auto costs = b.g.sample_round_costs(b.pair.addr_a, 4, 280, 3000, opts);
  REQUIRE(costs.size() == 3000);
  for (Cycles c : costs) {
    CHECK(c >= 1320);
    CHECK(c <= 1420);
  }
}

TEST_CASE("timing classifier agrees with the ground truth on random traces") {
  Rng rng(1234);
  MachineConfig mc = small_machine();
  Machine m(mc);
  const HammerPair p = pair_around(m, 0, 20);
  Gadget g(m, make_victim_layout(m, p.addr_a));
  const Cache& cache = m.memory().cache();
  const auto base_line = cache.line_of(m.pages().translate(g.victim().base));
  const auto size_line = cache.line_of(m.pages().translate(g.victim().array_size_location));
  const std::uint64_t cap = mc.dram.geometry.capacity();
  std::uint64_t errors = 0;
  for (int i = 0; i < 20000; ++i) {
    VirtAddr vul{rng.below(cap)};
    const auto line = cache.line_of(m.pages().translate(vul));
    if (line == base_line || line == size_line || g.in_bounds(vul)) continue;
    for (int j = 0; j < static_cast<int>(rng.below(3)); ++j) m.load(VirtAddr{rng.below(cap)});
    VerifyOptions o;
    o.serializer = static_cast<Serializer>(rng.below(3));
    const RoundResult r =
        g.verify_round(static_cast<unsigned>(rng.below(7)), rng.below(400), vul, o);
    errors += r.success != r.transient_executed;
  }
  CHECK(errors == 0);
}

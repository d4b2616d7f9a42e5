# Copyright 2026 The simhammer Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import math

import pytest

import simhammer


def desk(**overrides):
    return simhammer.config("desk", **overrides)


def test_presets_and_commands():
    assert {"t420", "desk"} <= set(simhammer.preset_names())
    assert "attack" in simhammer.command_names()


def test_calibrate():
    r = simhammer.calibrate(desk())
    assert r["min_training"] == 4
    assert r["drain_len"] == 280
    assert simhammer.calibrate(desk(cpu__counter_bits=2))["min_training"] == 2


def test_fig2_counts():
    r = simhammer.fig2(desk(fig2__trials=100))
    assert r["successes_drain_off"] == 0
    assert r["successes_drain_on"] == 100
    assert r["csv"].startswith("trial,drain_on,success\n")


def test_fig3a_ceiling_law():
    window, threshold = 1_500_000, 1000
    for row in simhammer.fig3a(desk(fig3a__padding="0, 840:843, 1500")):
        reachable = math.ceil(window / row["per_hammer_cost"]) >= threshold
        assert (row["first_flip_cycles"] is not None) == reachable


def test_fig3b_bounds():
    r = simhammer.fig3b(desk(fig3b__samples=1000))
    assert len(r["samples"]) == 1000
    assert max(r["samples"]) < 1500
    assert min(r["samples"]) >= 1320


def test_attack_and_scan():
    a = simhammer.attack(desk())
    assert a["status"] == "success"
    assert a["page_queries_during_attack"] == 0
    s = simhammer.scan(desk())
    assert len(s["hits"]) >= 1
    assert not s["partial"]


def test_run_is_deterministic(tmp_path):
    cfg = desk(fig2__trials=50)
    a = simhammer.run("fig2", cfg, tmp_path / "a")
    b = simhammer.run("fig2", cfg, tmp_path / "b")
    assert [p.read_bytes() for p in a] == [p.read_bytes() for p in b]


def test_errors():
    with pytest.raises(simhammer.ConfigError):
        desk(dram__rowz=3).validate()
    with pytest.raises(simhammer.CalibrationError):
        simhammer.calibrate(desk(gadget__drain_max=0))
    assert issubclass(simhammer.ConfigError, simhammer.SimError)

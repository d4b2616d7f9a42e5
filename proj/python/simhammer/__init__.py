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

"""Python front end for the simhammer simulator."""

import json

from ._core import (
    AddressError,
    CalibrationError,
    Config,
    ConfigError,
    MisuseError,
    SimError,
    command_names,
    fig2,
    fig3a,
    preset_names,
    run,
)
from . import _core

__all__ = [
    "AddressError",
    "CalibrationError",
    "Config",
    "ConfigError",
    "MisuseError",
    "SimError",
    "attack",
    "calibrate",
    "command_names",
    "config",
    "fig2",
    "fig3a",
    "fig3b",
    "preset_names",
    "run",
    "scan",
]


def config(preset="t420", **overrides):
    """Preset plus overrides; dotted keys use double underscores (dram__rows=64)."""
    cfg = Config.preset(preset)
    for key, value in overrides.items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        cfg.set(key.replace("__", "."), str(value))
    return cfg


def calibrate(cfg):
    return json.loads(_core.calibrate_json(cfg))


def fig3b(cfg):
    r = _core.fig3b(cfg)
    out = json.loads(r["json"])
    out["samples"] = r["samples"]
    return out


def scan(cfg):
    return json.loads(_core.scan_json(cfg))


def attack(cfg):
    return json.loads(_core.attack_json(cfg))

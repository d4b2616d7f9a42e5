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

// Python bindings. Configs are passed as ConfigSource objects and built
// fresh for every call; results come back as plain Python values or the
// same JSON/CSV text the CLI writes.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "simhammer/harness.hpp"

namespace py = pybind11;
using namespace simhammer;

namespace {

py::dict fig3a_row(const Fig3aRow& r) {
  py::dict d;
  d["padding"] = r.padding;
  d["per_hammer_cost"] = r.per_hammer_cost;
  d["first_flip_cycles"] = r.first_flip ? py::cast(*r.first_flip) : py::none();
  d["short_circuited"] = r.short_circuited;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Speculative rowhammer simulator core";

  auto sim_error = py::register_exception<SimError>(m, "SimError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", sim_error.ptr());
  py::register_exception<AddressError>(m, "AddressError", sim_error.ptr());
  py::register_exception<MisuseError>(m, "MisuseError", sim_error.ptr());
  py::register_exception<CalibrationError>(m, "CalibrationError", sim_error.ptr());

  py::class_<ConfigSource>(m, "Config")
      .def_static("preset", &ConfigSource::preset, py::arg("name"))
      .def_static("from_file", &ConfigSource::from_file, py::arg("path"))
      .def_static(
          "from_string",
          [](const std::string& text) { return ConfigSource::from_string(text); },
          py::arg("text"))
      .def(
          "set",
          [](ConfigSource& s, const std::string& key, const std::string& value) {
            s.set(key, value);
            return s;
          },
          py::arg("key"), py::arg("value"), "Appends key = value and returns the config.")
      .def("entries",
           [](const ConfigSource& s) {
             py::list out;
             for (const auto& e : s.entries()) out.append(py::make_tuple(e.key, e.value));
             return out;
           })
      .def("validate", [](const ConfigSource& s) { build_config(s); });

  m.def("preset_names", &preset_names);
  m.def("command_names", &command_names);

  m.def("calibrate_json", [](const ConfigSource& s) {
    const ExperimentConfig cfg = build_config(s);
    return calibration_json(cfg, run_calibrate(cfg));
  });
  m.def("fig2", [](const ConfigSource& s) {
    const Fig2Result r = run_fig2(build_config(s));
    py::dict d;
    d["train_k"] = r.train_k;
    d["drain_len"] = r.drain_len;
    d["successes_drain_off"] = r.successes(false);
    d["successes_drain_on"] = r.successes(true);
    d["csv"] = fig2_csv(r);
    return d;
  });
  m.def("fig3a", [](const ConfigSource& s) {
    py::list out;
    for (const auto& r : run_fig3a(build_config(s))) out.append(fig3a_row(r));
    return out;
  });
  m.def("fig3b", [](const ConfigSource& s) {
    const Fig3bResult r = run_fig3b(build_config(s));
    py::dict d;
    d["samples"] = r.samples;
    d["json"] = fig3b_json(r);
    d["csv"] = fig3b_csv(r);
    return d;
  });
  m.def("scan_json", [](const ConfigSource& s) {
    const ExperimentConfig cfg = build_config(s);
    return scan_json(cfg, run_scan(cfg));
  });
  m.def("attack_json", [](const ConfigSource& s) {
    const ExperimentConfig cfg = build_config(s);
    return attack_json(cfg, run_attack(cfg), 0.0);
  });
  m.def(
      "run",
      [](const std::string& command, const ConfigSource& s, const std::filesystem::path& out) {
        std::ostringstream log;
        return run_command(command, build_config(s), out, log);
      },
      py::arg("command"), py::arg("config"), py::arg("out_dir"),
      "Runs a CLI command and returns the paths of the files written.");
}

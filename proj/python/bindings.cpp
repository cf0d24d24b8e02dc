// Copyright 2026 The EnclaveFL Authors
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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "efl/demo.hpp"
#include "efl/fl_core.hpp"
#include "efl/policy.hpp"
#include "efl/sim_tee.hpp"

namespace py = pybind11;

namespace {

std::string AsStr(const py::bytes& b) { return std::string(b); }

py::dict VerdictDict(const efl::audit::AuditVerdict& v) {
  py::dict d;
  d["ok"] = v.ok;
  d["entries"] = v.entries;
  d["first_bad"] = v.ok ? py::object(py::none()) : py::cast(v.first_bad);
  d["reason"] = std::string(efl::audit::BreakName(v.reason));
  d["detail"] = v.detail;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Attested federated learning: simulated enclaves, policy, audit.";

  static py::exception<efl::Error> error(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const efl::Error& e) {
      py::object exc = py::handle(error.ptr())(e.what());
      exc.attr("code") = std::string(efl::ErrorCodeName(e.code()));
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  m.def("measure", [](const py::bytes& code, const py::bytes& config) {
    std::string c = AsStr(code), f = AsStr(config);
    return efl::tee::Measure(efl::AsBytes(c), efl::AsBytes(f)).Hex();
  }, py::arg("code"), py::arg("config"));

  m.def("role_measurement", [](const std::string& role) {
    return efl::demo::RoleMeasurement(role).Hex();
  }, py::arg("role"));

  m.def("policy_hash", [](const std::string& document) {
    return efl::HexEncode(efl::policy::Policy::Parse(document).Hash());
  }, py::arg("document"));

  m.def("canonical_policy", [](const std::string& document) {
    return efl::policy::Policy::Parse(document).Canonical();
  }, py::arg("document"));

  m.def("render_template", &efl::policy::RenderTemplate, py::arg("text"), py::arg("secrets"));

  m.def("verify_audit", [](const std::string& text) {
    return VerdictDict(efl::audit::VerifyAudit(text));
  }, py::arg("text"));

  m.def("aggregate", [](const std::vector<std::tuple<std::string, std::vector<double>, std::uint64_t>>& updates,
                        std::uint64_t round) {
    std::vector<efl::fl::ModelUpdate> us;
    for (const auto& [id, w, n] : updates) {
      us.push_back(efl::fl::ModelUpdate::Make(id, round, efl::fl::ParameterVector(w), n));
    }
    auto out = efl::fl::Aggregate(us);
    return std::vector<double>(out.weights().begin(), out.weights().end());
  }, py::arg("updates"), py::arg("round") = 0,
     "Weighted mean of (client_id, weights, num_examples) updates.");

  m.def("run_demo", [](const std::filesystem::path& work_dir, std::size_t clients,
                       std::size_t rows, std::size_t features, std::uint64_t seed, bool use_tcp) {
    efl::demo::Options o;
    o.work_dir = work_dir;
    o.clients = clients;
    o.rows_per_client = rows;
    o.features = features;
    o.data_seed = seed;
    o.use_tcp = use_tcp;
    efl::demo::Report r;
    {
      py::gil_scoped_release release;
      r = efl::demo::Run(o);
    }
    py::dict d;
    d["policy_hash"] = r.policy_hash;
    d["rounds"] = r.session.model.round;
    d["convergence"] = std::string(efl::fl::ConvergenceName(r.session.convergence));
    d["admitted"] = r.session.admitted;
    d["test_accuracy"] = r.test_accuracy;
    d["centralized_test_accuracy"] = r.centralized_test_accuracy;
    d["coordinator_audit"] = VerdictDict(r.coordinator_audit);
    d["manager_audit"] = VerdictDict(r.manager_audit);
    return d;
  }, py::arg("work_dir"), py::arg("clients") = 3, py::arg("rows") = 200, py::arg("features") = 8,
     py::arg("seed") = 1, py::arg("use_tcp") = false);
}

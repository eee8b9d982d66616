// SPDX-License-Identifier: Apache-2.0
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "qgen/agreement.hpp"
#include "qgen/error.hpp"
#include "qgen/judge.hpp"
#include "qgen/pipeline.hpp"
#include "qgen/syntactic_filter.hpp"

namespace py = pybind11;
using namespace qgen;

namespace {

PipelineConfig load_config(const std::string& path) {
  auto c = PipelineConfig::from_file(path);
  c.apply_env();
  return c;
}

}  // namespace

PYBIND11_MODULE(_qgen, m) {
  m.doc() = "Question generation and validation core";

  static py::exception<Error> qgen_error(m, "QgenError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = qgen_error;
      py::object inst = exc(e.what());
      inst.attr("code") = std::string(to_string(e.code()));
      inst.attr("category") = [&] {
        switch (classify(e.code())) {
          case ErrorClass::usage: return "usage";
          case ErrorClass::backend: return "backend";
          case ErrorClass::data: return "data";
        }
        return "data";
      }();
      PyErr_SetObject(exc.ptr(), inst.ptr());
    }
  });

  m.def("cohen_kappa", &agreement::cohen_kappa, py::arg("a"), py::arg("b"), py::arg("labels"));
  m.def("fleiss_kappa", &agreement::fleiss_kappa, py::arg("counts"), py::arg("raters_per_item"));

  m.def(
      "screen",
      [](const std::string& stem, const std::vector<std::string>& choices, std::size_t answer_index,
         const std::string& explanation) {
        Question q;
        q.id = "q";
        q.stem = stem;
        q.choices = choices;
        q.answer_index = answer_index;
        q.explanation = explanation;
        return screening::screen(q).reasons;
      },
      py::arg("stem"), py::arg("choices"), py::arg("answer_index"), py::arg("explanation"),
      "Reason codes the question violates; empty when it passes.");

  m.def(
      "run_pipeline",
      [](const std::string& config, const std::string& objectives, const std::string& out_bank) {
        py::gil_scoped_release release;
        return summary_json(run_pipeline(load_config(config), objectives, out_bank));
      },
      py::arg("config"), py::arg("objectives"), py::arg("out_bank"),
      "Runs every stage and returns the stage summary as JSON text.");

  m.def(
      "summarize_bank",
      [](const std::string& bank) { return summary_json(summarize(read_bank(bank))); },
      py::arg("bank"));

  m.def(
      "build_eval_set",
      [](const std::string& bank, const std::string& out, std::size_t n_los, std::size_t per_lo,
         std::uint64_t seed) {
        const auto set = judge::build_eval_set(read_bank(bank), n_los, per_lo, seed);
        judge::write_eval_set(set, out);
        return set.items.size();
      },
      py::arg("bank"), py::arg("out"), py::arg("n_los") = 8, py::arg("per_lo") = 8,
      py::arg("seed") = 0);

  m.def(
      "agreement_report",
      [](const std::vector<std::string>& record_files, const std::vector<std::string>& machines,
         const std::string& field) {
        std::vector<judge::JudgmentRecord> all;
        for (const auto& f : record_files) {
          auto r = judge::read_records(f);
          all.insert(all.end(), r.begin(), r.end());
        }
        const auto fld = agreement::parse_field(field);
        return agreement::report_json(
            agreement::report(agreement::RatingTable::from_records(all, fld), machines, fld));
      },
      py::arg("records"), py::arg("machines") = std::vector<std::string>{},
      py::arg("field") = "answer", "Agreement report as JSON text.");

  m.def(
      "ablate",
      [](const std::string& config, const std::string& bank, std::vector<double> thresholds,
         std::size_t repeats) {
        py::gil_scoped_release release;
        const auto cfg = load_config(config);
        const Gateway gw = make_gateway(cfg);
        AblationOptions opt;
        if (!thresholds.empty()) opt.thresholds = std::move(thresholds);
        opt.repeats = repeats;
        return ablation_csv(ablate(gw, cfg, read_bank(bank), opt));
      },
      py::arg("config"), py::arg("bank"), py::arg("thresholds") = std::vector<double>{},
      py::arg("repeats") = 10, "Per-run ablation table as CSV text.");
}

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "tabgrpo/cli.hpp"
#include "tabgrpo/evaluation.hpp"
#include "tabgrpo/grpo.hpp"
#include "tabgrpo/policy.hpp"
#include "tabgrpo/rewards.hpp"

namespace py = pybind11;
using namespace tabgrpo;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Core operations of the tabgrpo library.";

  static py::exception<Error> error(m, "TabgrpoError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      error(e.what());
    }
  });

  py::class_<ParsedResponse>(m, "ParsedResponse")
      .def_readonly("reasoning", &ParsedResponse::reasoning)
      .def_readonly("answer", &ParsedResponse::answer)
      .def_readonly("well_formed", &ParsedResponse::well_formed);

  py::class_<RewardBreakdown>(m, "RewardBreakdown")
      .def_readonly("format", &RewardBreakdown::format)
      .def_readonly("validity", &RewardBreakdown::validity)
      .def_readonly("correctness", &RewardBreakdown::correctness)
      .def_readonly("total", &RewardBreakdown::total);

  m.def("parse_response", &parse_response, py::arg("text"));
  m.def(
      "score",
      [](const std::string& text, const std::vector<std::string>& allowed, const std::string& gold) {
        return score(text, allowed, gold);
      },
      py::arg("text"), py::arg("allowed_labels"), py::arg("gold"));

  m.def(
      "group_stats",
      [](const std::vector<double>& rewards) {
        const auto s = group_stats(rewards);
        return py::make_tuple(s.mean, s.std);
      },
      py::arg("rewards"), "Mean and population standard deviation.");
  m.def(
      "relative_advantages",
      [](const std::vector<double>& rewards, double std_floor) { return relative_advantages(rewards, std_floor); },
      py::arg("rewards"), py::arg("std_floor") = 1e-8);
  m.def("clipped_term", &clipped_term, py::arg("ratio"), py::arg("advantage"), py::arg("clip_eps") = 0.2);
  m.def("kl_term", &kl_term, py::arg("logp_ref"), py::arg("logp_new"));

  m.def(
      "weighted_f1",
      [](const std::vector<std::optional<std::string>>& preds, const std::vector<std::string>& golds,
         const std::vector<std::string>& labels) { return weighted_f1(preds, golds, labels); },
      py::arg("predictions"), py::arg("golds"), py::arg("labels"));

  py::class_<Architecture>(m, "Architecture")
      .def(py::init<>())
      .def_readwrite("vocab_size", &Architecture::vocab_size)
      .def_readwrite("embed_dim", &Architecture::embed_dim)
      .def_readwrite("prompt_window", &Architecture::prompt_window)
      .def_readwrite("output_window", &Architecture::output_window)
      .def_readwrite("hidden_dim", &Architecture::hidden_dim)
      .def_readwrite("max_positions", &Architecture::max_positions)
      .def_readwrite("eos_id", &Architecture::eos_id)
      .def("param_count", &Architecture::param_count);

  m.def(
      "init_params",
      [](const Architecture& arch, std::uint64_t seed) { return init_params(arch, seed).theta; },
      py::arg("arch"), py::arg("seed"), "Flat parameter vector.");
  m.def(
      "logprobs",
      [](const Architecture& arch, const std::vector<double>& theta, const std::vector<TokenId>& prompt,
         const std::vector<TokenId>& output) {
        PolicyParams p;
        p.arch = arch;
        p.theta = theta;
        require(theta.size() == arch.param_count(), "theta length does not match the architecture");
        return logprobs(p, prompt, output);
      },
      py::arg("arch"), py::arg("theta"), py::arg("prompt"), py::arg("output"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int status = 0;
        {
          py::gil_scoped_release release;
          status = cli::run(args, out, err);
        }
        return py::make_tuple(status, out.str(), err.str());
      },
      py::arg("args"), "Runs a tabgrpo command; returns (status, stdout, stderr).");
}

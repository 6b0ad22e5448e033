#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <tuple>
#include <vector>

#include "qanno/error.hpp"
#include "qanno/harness.hpp"
#include "qanno/huffman.hpp"
#include "qanno/label_model.hpp"
#include "qanno/questioner.hpp"
#include "qanno/synthetic.hpp"

namespace py = pybind11;
using namespace qanno;

namespace {

SearchConfig parse_config(const std::string& text) {
  SearchConfig c;
  from_json(nlohmann::json::parse(text), c);
  c.validate();
  return c;
}

Method parse_method(const std::string& m) {
  if (m == "ia") return Method::ia;
  if (m == "huffman") return Method::huffman;
  throw std::invalid_argument("method must be \"ia\" or \"huffman\"");
}

py::dict generate_py(const std::string& problem, std::uint64_t seed, std::size_t size) {
  const SyntheticInstance inst = generate(parse_problem(problem), seed, size);
  std::vector<std::tuple<double, double>> points;
  for (const Point2D& p : inst.points) points.emplace_back(p.x1, p.x2);
  py::dict out;
  out["problem"] = problem;
  out["seed"] = seed;
  out["points"] = points;
  out["labels"] = std::vector<int>(inst.labels.bits.begin(), inst.labels.bits.end());
  out["probs"] = std::vector<double>(inst.probs.values().begin(), inst.probs.values().end());
  out["noisy_label_count"] = inst.noisy_label_count;
  return out;
}

py::dict simulate_py(const std::vector<double>& probs, const std::vector<std::uint8_t>& labels,
                     const std::string& method, const std::string& config, std::size_t max_questions) {
  RunOptions o;
  o.method = parse_method(method);
  o.search = parse_config(config);
  o.max_questions = max_questions;
  RunRecord r;
  {
    py::gil_scoped_release release;
    r = simulate_run(ItemProbabilities(probs), Labeling(labels), o);
  }
  std::vector<std::size_t> sizes;
  std::vector<bool> correct;
  for (const QuestionRecord& q : r.question_log) {
    sizes.push_back(q.size);
    correct.push_back(q.correct);
  }
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> curve;
  for (const CurvePoint& p : r.curve) curve.emplace_back(p.questions, p.labeled, p.incorrect);
  py::dict out;
  out["method"] = to_string(r.method);
  out["questions"] = r.total_questions;
  out["entropy"] = r.entropy;
  out["truncated"] = r.truncated;
  out["sizes"] = sizes;
  out["correct"] = correct;
  out["curve"] = curve;
  if (r.final_labels) {
    out["labels"] = std::vector<int>(r.final_labels->bits.begin(), r.final_labels->bits.end());
  } else {
    out["labels"] = py::none();
  }
  return out;
}

std::tuple<std::vector<std::size_t>, std::vector<int>> best_action_py(const std::vector<double>& probs,
                                                                      const std::string& config) {
  SearchTree tree{AnnotationState(probs.size())};
  const Guess g = best_action(tree, ItemProbabilities(probs), parse_config(config));
  return {g.indices, std::vector<int>(g.labels.begin(), g.labels.end())};
}

py::list table1_py(const std::vector<std::string>& problems, const std::vector<std::uint64_t>& seeds,
                   const std::string& config, std::size_t jobs) {
  SuiteOptions o;
  o.problems.clear();
  for (const auto& p : problems) o.problems.push_back(parse_problem(p));
  o.seeds = seeds;
  o.search = parse_config(config);
  o.jobs = jobs;
  SuiteResult r;
  {
    py::gil_scoped_release release;
    r = run_table1_suite(o);
  }
  py::list rows;
  for (const SummaryRow& s : r.summary) {
    py::dict d;
    d["problem"] = to_string(s.problem);
    d["method"] = s.method;
    d["runs"] = s.runs;
    d["mean_q"] = s.mean_q;
    d["mean_q_minus_h"] = s.mean_q_minus_h;
    d["mean_q_over_h"] = s.mean_q_over_h;
    rows.append(d);
  }
  return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Binary-question annotation engine";

  py::register_exception<CapacityError>(m, "CapacityError", PyExc_ValueError);

  m.def(
      "joint_entropy", [](const std::vector<double>& p) { return joint_entropy(ItemProbabilities(p)); },
      py::arg("probs"), "Entropy in bits of independent Bernoulli labels.");
  m.def(
      "huffman_expected_questions",
      [](const std::vector<double>& p) { return expected_questions(build_huffman(ItemProbabilities(p))); },
      py::arg("probs"), "Expected questions of the Huffman code over all labelings (at most 20 items).");
  m.def(
      "optimal_expected_questions",
      [](const std::vector<double>& symbols) { return optimal_expected_questions_dp(symbols); }, py::arg("symbol_probs"),
      "Exhaustive optimum over arbitrary yes/no questions (small symbol sets only).");
  m.def("generate", &generate_py, py::arg("problem"), py::arg("seed"), py::arg("size") = kSyntheticSize);
  m.def("simulate", &simulate_py, py::arg("probs"), py::arg("labels"), py::arg("method") = "ia",
        py::arg("config") = "{}", py::arg("max_questions") = kDefaultMaxQuestions);
  m.def("best_action", &best_action_py, py::arg("probs"), py::arg("config") = "{}",
        "First guess for a fresh state: (indices, pseudo_labels).");
  m.def("table1", &table1_py, py::arg("problems"), py::arg("seeds"), py::arg("config") = "{}", py::arg("jobs") = 1);
}

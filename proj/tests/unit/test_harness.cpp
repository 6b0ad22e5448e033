#include <doctest.h>

#include <filesystem>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "qanno/harness.hpp"
#include "qanno/synthetic.hpp"

using namespace qanno;

namespace {

void check_record(const RunRecord& r, std::size_t n, std::size_t max_n) {
  CHECK(r.total_questions == r.question_log.size());
  REQUIRE(r.curve.size() == r.total_questions + 1);
  for (std::size_t q = 1; q < r.curve.size(); ++q) {
    CHECK(r.curve[q].questions == q);
    CHECK(r.curve[q].labeled >= r.curve[q - 1].labeled);
    if (r.method == Method::ia) CHECK(r.curve[q].labeled - r.curve[q - 1].labeled <= max_n + 1);
  }
  if (!r.truncated) CHECK(r.curve.back().labeled == n);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("retrain cadence") {
  CHECK_FALSE(retrain_due(0));
  for (std::size_t q = 1; q <= 100; ++q) CHECK(retrain_due(q));
  CHECK(retrain_due(102));
  CHECK_FALSE(retrain_due(101));
  CHECK(retrain_due(201));
  CHECK_FALSE(retrain_due(202));
}

TEST_CASE("near-perfect predictor needs few questions") {
  std::vector<std::uint8_t> bits(16);
  std::vector<double> probs(16);
  for (std::size_t i = 0; i < 16; ++i) {
    bits[i] = i % 3 == 0;
    probs[i] = bits[i] ? 1.0 : 0.0;
  }
  RunOptions o;
  o.search.cost_fn = CostFn::length;
  const RunRecord r = simulate_run(ItemProbabilities(probs), Labeling(bits), o);
  CHECK(r.total_questions <= 4);
  check_record(r, 16, 8);
  CHECK(*r.final_labels == Labeling(bits));
}

TEST_CASE("uniform probabilities take one question per item") {
  RunOptions o;
  const RunRecord r = simulate_run(ItemProbabilities(std::vector<double>(10, 0.5)), Labeling::from_mask(0x2B5, 10), o);
  CHECK(r.total_questions == 10);
  for (const auto& q : r.question_log) CHECK(q.size == 1);
  CHECK(*r.final_labels == Labeling::from_mask(0x2B5, 10));
}

TEST_CASE("huffman runs record the decode path") {
  const SyntheticInstance inst = gen_problem_a(5);
  RunOptions o;
  o.method = Method::huffman;
  const RunRecord r = simulate_run(inst.probs, inst.labels, o);
  check_record(r, 10, 8);
  CHECK(*r.final_labels == inst.labels);
  CHECK(r.curve.back().labeled == 10);
  for (std::size_t q = 1; q + 1 < r.curve.size(); ++q) CHECK(r.curve[q].labeled == 0);
}

TEST_CASE("question cap truncates") {
  RunOptions o;
  o.max_questions = 3;
  const RunRecord r = simulate_run(ItemProbabilities(std::vector<double>(10, 0.5)), Labeling::from_mask(0, 10), o);
  CHECK(r.truncated);
  CHECK(r.total_questions == 3);
  CHECK_FALSE(r.final_labels);
  const CurveMetrics m = curve_metrics(r, 10);
  CHECK(m.q_at_l == 3);
  CHECK(m.l_at_max_q == 3);
}

TEST_CASE("from-scratch runs retrain and stay lossless") {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SyntheticInstance inst = generate(Problem::a, seed, 30);
    RunOptions o;
    o.from_scratch = FromScratchSetup{inst.points, LogisticModel{}};
    const RunRecord r = simulate_run(inst.probs, inst.labels, o, seed);
    CHECK(r.curve.front().labeled == 1);
    REQUIRE(r.final_labels);
    CHECK(*r.final_labels == inst.labels);
    total += static_cast<double>(r.total_questions);
  }
  // Learning from scratch still beats one question per item on average.
  CHECK(total / 20 < 30.0);
}

TEST_CASE("curve metrics") {
  RunRecord r;
  r.curve = {{0, 0, 0}};
  CHECK_THROWS_WITH_AS(curve_metrics(r, 5), "no questions logged", std::invalid_argument);
  for (std::size_t q = 1; q <= 5; ++q) {
    r.question_log.push_back({1, true});
    r.curve.push_back({q, q, 0});
  }
  r.total_questions = 5;
  const CurveMetrics m = curve_metrics(r, 5);
  CHECK(m.q_at_l == 5);
  CHECK(m.ratio == 1.0);
  CHECK(m.max_q == 5);
  CHECK(m.l_at_max_q == 5);

  // 2500 labels reached at question 348.
  RunRecord big;
  big.curve = {{0, 0, 0}, {347, 2400, 3}, {348, 2500, 3}, {400, 2600, 4}};
  big.question_log.resize(400);
  const CurveMetrics b = curve_metrics(big, 2500);
  CHECK(b.q_at_l == 348);
  CHECK(b.ratio == doctest::Approx(0.1392));
  CHECK(b.incorrect_at_max_q == 4);
}

TEST_CASE("seed list parsing") {
  CHECK(parse_seed_list("0..3") == std::vector<std::uint64_t>{0, 1, 2, 3});
  CHECK(parse_seed_list("4,9") == std::vector<std::uint64_t>{4, 9});
  CHECK(parse_seed_list("7") == std::vector<std::uint64_t>{7});
  CHECK_THROWS(parse_seed_list("3..1"));
  CHECK_THROWS(parse_seed_list("x"));
}

TEST_CASE("suite output is independent of the worker count") {
  SuiteOptions o;
  o.seeds = parse_seed_list("0..19");
  o.jobs = 1;
  const SuiteResult one = run_table1_suite(o);
  o.jobs = 4;
  const SuiteResult four = run_table1_suite(o);
  CHECK(one.failures == 0);
  REQUIRE(one.rows.size() == 3 * 20 * 3);
  const auto d1 = std::filesystem::temp_directory_path() / "qanno_suite_1";
  const auto d4 = std::filesystem::temp_directory_path() / "qanno_suite_4";
  write_suite_csv(one, d1);
  write_suite_csv(four, d4);
  for (const char* f : {"table1_runs.csv", "table1_summary.csv", "curves.csv"}) {
    CHECK(slurp(d1 / f) == slurp(d4 / f));
    CHECK_FALSE(slurp(d1 / f).empty());
  }
  const SummaryRow& h = one.find(Problem::a, "entropy");
  CHECK(h.runs == 20);
  CHECK(h.mean_q_minus_h == doctest::Approx(0.0));
  CHECK(h.mean_q_over_h == doctest::Approx(1.0));
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d4);
}

TEST_CASE("lookahead does not materially hurt the one-step heuristic") {
  double deep = 0.0, shallow = 0.0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const SyntheticInstance inst = gen_problem_a(s);
    RunOptions o;
    deep += static_cast<double>(simulate_run(inst.probs, inst.labels, o).total_questions);
    o.search.max_expansions = 1;
    shallow += static_cast<double>(simulate_run(inst.probs, inst.labels, o).total_questions);
  }
  CHECK(deep / 200 <= shallow / 200 + 0.05);
}

TEST_CASE("property: IA >= Huffman >= entropy on average where the predictor is the posterior") {
  SuiteOptions o;
  o.problems = {Problem::a, Problem::b};
  const SuiteResult r = run_table1_suite(o);
  for (Problem p : o.problems) {
    // Paired per-seed differences; allow three standard errors of noise.
    auto paired = [&](const std::string& hi, const std::string& lo) {
      std::map<std::uint64_t, double> q_hi;
      for (const SuiteRow& row : r.rows) {
        if (row.problem == p && row.method == hi) q_hi[row.seed] = row.questions;
      }
      double sum = 0.0, sq = 0.0;
      std::size_t n = 0;
      for (const SuiteRow& row : r.rows) {
        if (row.problem != p || row.method != lo) continue;
        const double d = q_hi.at(row.seed) - row.questions;
        sum += d;
        sq += d * d;
        ++n;
      }
      const double mean = sum / n;
      const double se = std::sqrt((sq / n - mean * mean) / (n - 1));
      return mean + 3.0 * se;
    };
    CHECK(paired("ia", "huffman") >= 0.0);
    CHECK(paired("huffman", "entropy") >= 0.0);
  }
}

// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "qanno/annotation_state.hpp"
#include "qanno/harness.hpp"
#include "qanno/huffman.hpp"
#include "qanno/predictors.hpp"
#include "qanno/questioner.hpp"
#include "qanno/session.hpp"
#include "qanno/synthetic.hpp"

using namespace qanno;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

bool within(double value, double target, double tol) { return std::abs(value - target) <= tol; }

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Outcome huffman_optimality() {
  std::mt19937_64 gen(1001);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = 1 + static_cast<std::size_t>(t % 10);
    std::vector<double> w(k);
    double total = 0.0;
    for (double& x : w) {
      x = -std::log(1.0 - u(gen));  // exponential draws give a flat Dirichlet
      total += x;
    }
    for (double& x : w) x /= total;
    const double q = expected_questions(build_huffman_from_symbols(w));
    worst = std::max({worst, std::abs(q - optimal_expected_questions_dp(w)), std::abs(q - oracle::huffman_cost(w))});
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 10.0, "max |Q - DP| = " + fmt("%.2e", worst) + ", " + fmt("%.2f s", secs)};
}

Outcome entropy_sandwich() {
  std::mt19937_64 gen(1002);
  int violations = 0;
  double min_gap = std::numeric_limits<double>::infinity(), max_gap = -min_gap;
  for (int t = 0; t < 200; ++t) {
    const ItemProbabilities p = oracle::random_probs(gen, 1 + static_cast<std::size_t>(t % 10));
    const double h = oracle::shannon_bits(oracle::explicit_distribution(p));
    const double q = expected_questions(build_huffman(p));
    if (!(h <= q && q <= h + 1.0)) ++violations;
    min_gap = std::min(min_gap, q - h);
    max_gap = std::max(max_gap, q - h);
  }
  return {violations == 0, std::to_string(violations) + " violations, Q - H in [" + fmt("%.4f", min_gap) + ", " +
                               fmt("%.4f", max_gap) + "]"};
}

struct Table1 {
  SuiteResult result;
  double seconds = 0.0;
};

const Table1& table1() {
  static const Table1 t = [] {
    SuiteOptions o;  // problems a, b, c; seeds 0..999; default search config
    const auto t0 = Clock::now();
    Table1 out{run_table1_suite(o), 0.0};
    out.seconds = seconds_since(t0);
    return out;
  }();
  return t;
}

std::string row_text(Problem p) {
  const SuiteResult& r = table1().result;
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(3);
  s << "H " << r.find(p, "entropy").mean_q << ", Huffman " << r.find(p, "huffman").mean_q << " (Q-H "
    << r.find(p, "huffman").mean_q_minus_h << ", Q/H " << r.find(p, "huffman").mean_q_over_h << "), IA "
    << r.find(p, "ia").mean_q;
  return s.str();
}

Outcome table1_a() {
  const SuiteResult& r = table1().result;
  const bool ok = r.failures == 0 && within(r.find(Problem::a, "entropy").mean_q, 2.77, 0.15) &&
                  within(r.find(Problem::a, "huffman").mean_q, 2.80, 0.15) &&
                  r.find(Problem::a, "huffman").mean_q_minus_h <= 0.1 &&
                  within(r.find(Problem::a, "ia").mean_q, 3.46, 0.4) && table1().seconds < 600.0;
  return {ok, row_text(Problem::a) + "; suite " + fmt("%.1f s", table1().seconds)};
}

Outcome table1_b() {
  const SuiteResult& r = table1().result;
  const bool ok = r.failures == 0 && within(r.find(Problem::b, "entropy").mean_q, 6.03, 0.2) &&
                  within(r.find(Problem::b, "huffman").mean_q, 6.11, 0.25) &&
                  within(r.find(Problem::b, "ia").mean_q, 6.31, 0.4);
  return {ok, row_text(Problem::b)};
}

Outcome table1_c() {
  const SummaryRow& h = table1().result.find(Problem::c, "huffman");
  const bool ok = table1().result.failures == 0 && h.mean_q_minus_h < 0.0 && within(h.mean_q_minus_h, -2.25, 0.8) &&
                  within(h.mean_q_over_h, 0.67, 0.15);
  return {ok, row_text(Problem::c)};
}

Outcome state_formulas() {
  std::mt19937_64 gen(1003);
  int checked = 0;
  double worst = 0.0;
  for (int trial = 0; checked < 600; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial % 14);
    const ItemProbabilities p = oracle::random_probs(gen, n);
    const AnnotationState s = oracle::random_state(gen, n, trial % 2 == 0);
    if (s.unlabeled_count() > 12) continue;
    const oracle::StateView v = oracle::consistent(s, p);
    worst = std::max(worst, std::abs(state_entropy(s, p) - oracle::shannon_bits(v.probs)));
    worst = std::max(worst, std::abs(state_log_size(s) - std::log2(static_cast<double>(v.masks.size()))));
    if (!s.is_terminal()) {
      const Guess g = oracle::random_guess(gen, s);
      worst = std::max(worst, std::abs(guess_probability(s, p, g) - oracle::guess_mass(v, g)));
    }
    ++checked;
  }
  return {worst <= 1e-9, std::to_string(checked) + " states, max error " + fmt("%.2e", worst)};
}

// Expected question count of the policy encoded by a fully expanded tree,
// following the first minimum-cost action at every state.
double policy_questions(const SearchTree::StateNode& node, const Labeling& truth) {
  if (node.terminal()) return 0.0;
  const auto& action = *node.actions[node.best_action_index()];
  bool ok = true;
  for (std::size_t k = 0; k < action.guess.size(); ++k) ok = ok && truth[action.guess.indices[k]] == action.guess.labels[k];
  return 1.0 + policy_questions(ok ? *action.if_correct : *action.if_incorrect, truth);
}

Outcome exact_lookahead() {
  std::mt19937_64 gen(1004);
  double worst = 0.0;
  int cases = 0;
  for (int t = 0; t < 60; ++t) {
    const std::size_t n = 1 + static_cast<std::size_t>(t % 4);
    const ItemProbabilities p = t % 3 == 0 ? oracle::random_grid_probs(gen, n) : oracle::random_probs(gen, n);
    SearchConfig c;
    c.max_expansions = std::numeric_limits<std::size_t>::max();
    c.reduce_certainty_factor = 0.0;
    c.cost_fn = t % 2 ? CostFn::length : CostFn::entropy;
    SearchTree tree{AnnotationState(n)};
    best_action(tree, p, c);
    if (select_node(tree, c) != nullptr) return {false, "tree not fully expanded for N = " + std::to_string(n)};

    double via_tree = 0.0, via_engine = 0.0;
    for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
      const Labeling truth = Labeling::from_mask(mask, n);
      const double w = labeling_probability(p, truth);
      via_tree += w * policy_questions(tree.root(), truth);
      RunOptions o;
      o.search = c;
      via_engine += w * static_cast<double>(simulate_run(p, truth, o).total_questions);
    }
    worst = std::max({worst, std::abs(tree.root().cost - via_tree), std::abs(tree.root().cost - via_engine)});
    ++cases;
  }
  return {worst <= 1e-9, std::to_string(cases) + " instances with N <= 4, max |root cost - E[Q]| = " + fmt("%.2e", worst)};
}

Outcome high_confidence() {
  const std::size_t n = 1000;
  Rng rng(1005);
  std::vector<std::uint8_t> bits(n);
  std::vector<double> probs(n);
  for (std::size_t i = 0; i < n; ++i) {
    bits[i] = rng.bernoulli(0.5) ? 1 : 0;
    probs[i] = bits[i] ? 0.999 : 0.001;
  }
  RunOptions o;
  o.search.max_n = 8;
  o.search.cost_fn = CostFn::length;
  const auto t0 = Clock::now();
  const RunRecord r = simulate_run(ItemProbabilities(probs), Labeling(bits), o);
  const bool exact = r.final_labels && *r.final_labels == Labeling(bits);
  return {exact && r.total_questions <= n / 4,
          "Q = " + std::to_string(r.total_questions) + " for N = 1000 (gain " +
              fmt("%.1f%%", 100.0 * (1.0 - static_cast<double>(r.total_questions) / n)) + "), " +
              fmt("%.2f s", seconds_since(t0))};
}

Outcome uniform() {
  std::string detail;
  bool ok = true;
  for (std::size_t n : {1, 5, 10, 40}) {
    for (CostFn fn : {CostFn::entropy, CostFn::length}) {
      RunOptions o;
      o.search.cost_fn = fn;
      const Labeling truth = Labeling::from_mask(0x5A5A5A5A5AULL & ((1ULL << n) - 1), n);
      const RunRecord r = simulate_run(ItemProbabilities(std::vector<double>(n, 0.5)), truth, o);
      ok = ok && r.total_questions == n && r.final_labels && *r.final_labels == truth;
      if (n <= 10) {
        RunOptions h;
        h.method = Method::huffman;
        ok = ok && simulate_run(ItemProbabilities(std::vector<double>(n, 0.5)), truth, h).total_questions == n;
      }
    }
    detail += (detail.empty() ? "N = " : ", ") + std::to_string(n);
  }
  return {ok, detail + ": Q = N for IA (both costs) and Huffman"};
}

Outcome gradient_check() {
  std::mt19937_64 gen(1006);
  std::normal_distribution<double> nd(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    std::vector<Point2D> pts;
    std::vector<std::uint8_t> labels;
    for (int i = 0; i < t % 7; ++i) {
      pts.push_back({nd(gen) * 2, nd(gen) * 2});
      labels.push_back(gen() % 2);
    }
    IncorrectGuessExample pend;
    for (int i = 0; i < 1 + t % 5; ++i) {
      pend.points.push_back({nd(gen), nd(gen)});
      pend.pseudo_labels.push_back(gen() % 2);
    }
    LogisticModel m;
    m.w1 = nd(gen);
    m.w2 = nd(gen);
    m.bias = nd(gen);
    const auto obj = logistic_objective(m, pts, labels, &pend);
    for (int c = 0; c < 3; ++c) {
      const double h = 1e-6;
      LogisticModel plus = m, minus = m;
      (c == 0 ? plus.w1 : c == 1 ? plus.w2 : plus.bias) += h;
      (c == 0 ? minus.w1 : c == 1 ? minus.w2 : minus.bias) -= h;
      const double fd =
          (logistic_objective(plus, pts, labels, &pend).loss - logistic_objective(minus, pts, labels, &pend).loss) /
          (2 * h);
      worst = std::max(worst, std::abs(obj.gradient[c] - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  return {worst <= 1e-5, "100 instances, max relative error " + fmt("%.2e", worst)};
}

// Drives a session with truthful answers, returning each question document.
std::vector<nlohmann::json> drive(Session& s, const Labeling& truth, std::size_t limit) {
  std::vector<nlohmann::json> asked;
  while (asked.size() < limit) {
    const nlohmann::json q = s.next_question();
    asked.push_back(q);
    if (q.at("status") == "complete") break;
    bool ok = true;
    for (const auto& item : q.at("items")) ok = ok && truth[item.at("id").get<std::size_t>()] == item.at("pseudo_label");
    s.answer(q.at("question_id"), ok);
  }
  return asked;
}

Outcome determinism_and_recovery() {
  const auto root = std::filesystem::temp_directory_path() / "qanno_acceptance_sessions";
  std::filesystem::remove_all(root);
  bool ok = true;
  std::string detail;
  for (bool reset : {false, true}) {
    const SyntheticInstance inst = generate(Problem::b, 17, 40);
    nlohmann::json body{{"synthetic", {{"problem", "b"}, {"seed", 17}, {"size", 40}}},
                        {"config", {{"reset_tree", reset}, {"seed", 5}}}};
    SessionStore store(root);
    auto a = store.get(store.create(body));
    auto b = store.get(store.create(body));
    const auto full_a = drive(*a, inst.labels, 1000);
    const auto full_b = drive(*b, inst.labels, 1000);
    ok = ok && full_a == full_b && full_a.back().at("status") == "complete";

    // Interrupt a third session halfway, with a question outstanding, and reopen it.
    const std::string id = store.create(body);
    const std::size_t half = full_a.size() / 2;
    auto first = drive(*store.get(id), inst.labels, half);
    first.push_back(store.get(id)->next_question());
    SessionStore restarted(root);
    auto reopened = restarted.get(id);
    const nlohmann::json outstanding = reopened->describe().at("outstanding");
    const Labeling& truth = inst.labels;
    bool right = true;
    for (const auto& item : outstanding.at("items")) {
      right = right && truth[item.at("id").get<std::size_t>()] == item.at("pseudo_label");
    }
    reopened->answer(outstanding.at("question_id"), right);
    auto rest = drive(*reopened, truth, 1000);
    first.insert(first.end(), rest.begin(), rest.end());
    ok = ok && first == full_a;

    // The same questions come out of the offline engine.
    RunOptions o;
    o.search.reset_tree = reset;
    o.search.seed = 5;
    const RunRecord r = simulate_run(inst.probs, inst.labels, o);
    ok = ok && r.total_questions + 1 == full_a.size() && simulate_run(inst.probs, inst.labels, o).question_log == r.question_log;
    detail += std::string(detail.empty() ? "" : "; ") + (reset ? "reset_tree" : "kept tree") + ": " +
              std::to_string(full_a.size() - 1) + " questions, restart at " + std::to_string(half);
  }
  std::filesystem::remove_all(root);
  return {ok, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"huffman-optimality", huffman_optimality},
      {"entropy-sandwich", entropy_sandwich},
      {"table1-a", table1_a},
      {"table1-b", table1_b},
      {"table1-c", table1_c},
      {"state-formula-oracle", state_formulas},
      {"exact-lookahead", exact_lookahead},
      {"high-confidence-gain", high_confidence},
      {"uniform-degeneration", uniform},
      {"gradient-check", gradient_check},
      {"determinism-and-recovery", determinism_and_recovery},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

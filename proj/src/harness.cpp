#include "qanno/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "qanno/annotation_state.hpp"
#include "qanno/error.hpp"
#include "qanno/huffman.hpp"

namespace qanno {

std::string to_string(Method m) { return m == Method::ia ? "ia" : "huffman"; }

bool retrain_due(std::size_t questions) {
  if (questions == 0) return false;
  const std::size_t every = (questions + 99) / 100;
  return questions % every == 0;
}

namespace {

RunRecord run_huffman(const ItemProbabilities& probs, const Labeling& truth, const RunOptions& options,
                      RunRecord record) {
  const HuffmanTree tree = build_huffman(probs);
  const auto truth_symbol = static_cast<std::uint32_t>(truth.to_mask());
  const MembershipOracle base = symbol_oracle(truth_symbol);
  // Wrap the oracle to log every question it answers, minus the final check.
  std::vector<QuestionRecord> asked;
  const MembershipOracle logging = [&](std::span<const std::uint32_t> q) {
    const bool yes = base(q);
    asked.push_back({q.size(), yes});
    return yes;
  };
  const DecodeResult result = decode_session(tree, logging);
  asked.pop_back();
  const std::size_t n = probs.size();
  const std::size_t used = std::min(result.questions, options.max_questions);
  record.truncated = result.questions > options.max_questions;
  record.question_log.assign(asked.begin(), asked.begin() + static_cast<std::ptrdiff_t>(used));
  record.total_questions = used;
  for (std::size_t q = 1; q <= used; ++q) {
    record.curve.push_back({q, (q == result.questions) ? n : 0, 0});
  }
  if (!record.truncated) record.final_labels = result.labeling;
  return record;
}

IncorrectGuessExample incorrect_example(const AnnotationState& state, const std::vector<Point2D>& points) {
  IncorrectGuessExample ex;
  if (const auto& pending = state.pending_incorrect()) {
    for (std::size_t k = 0; k < pending->size(); ++k) {
      ex.points.push_back(points[pending->indices[k]]);
      ex.pseudo_labels.push_back(pending->labels[k]);
    }
  }
  return ex;
}

LogisticModel retrain(const AnnotationState& state, const FromScratchSetup& setup, const LogisticModel& model) {
  std::vector<Point2D> pts;
  std::vector<std::uint8_t> labels;
  for (const auto& [i, label] : state.labeled()) {
    pts.push_back(setup.points[i]);
    labels.push_back(label);
  }
  IncorrectGuessExample ex = incorrect_example(state, setup.points);
  std::optional<IncorrectGuessExample> pending;
  if (!ex.points.empty()) pending = std::move(ex);
  return train_logistic(pts, labels, pending, model);
}

}  // namespace

RunRecord simulate_run(const ItemProbabilities& probs, const Labeling& truth, const RunOptions& options,
                       std::uint64_t seed) {
  if (truth.size() != probs.size()) throw LengthMismatch("ground truth and probabilities differ in length");
  RunRecord record;
  record.seed = seed;
  record.method = options.method;
  record.item_count = probs.size();
  record.entropy = joint_entropy(probs);
  record.max_questions = options.max_questions;
  record.curve.push_back({0, 0, 0});
  if (options.method == Method::huffman) return run_huffman(probs, truth, options, std::move(record));

  const std::size_t n = probs.size();
  AnnotationState state(n);
  ItemProbabilities current = probs;
  LogisticModel model;
  if (options.from_scratch) {
    const FromScratchSetup& setup = *options.from_scratch;
    if (setup.points.size() != n) throw LengthMismatch("from-scratch points do not match the dataset size");
    Rng rng(seed);
    const std::size_t first = rng.below(n);
    state.commit(first, truth[first]);
    model = retrain(state, setup, setup.model);
    current = model.predict_all(setup.points);
    record.curve.front().labeled = state.labeled_count();
  }

  SearchTree tree(state);
  std::size_t incorrect = 0;
  while (!state.is_terminal() && record.total_questions < options.max_questions) {
    const Guess g = best_action(tree, current, options.search);
    bool correct = true;
    for (std::size_t k = 0; k < g.size(); ++k) correct = correct && truth[g.indices[k]] == g.labels[k];
    state = apply_answer(state, g, correct);
    tree = advance(std::move(tree), g, correct, options.search);
    ++record.total_questions;
    if (!correct) ++incorrect;
    record.question_log.push_back({g.size(), correct});
    record.curve.push_back({record.total_questions, state.labeled_count(), incorrect});
    if (options.from_scratch && !state.is_terminal() && retrain_due(record.total_questions)) {
      model = retrain(state, *options.from_scratch, model);
      current = model.predict_all(options.from_scratch->points);
    }
  }
  record.truncated = !state.is_terminal();
  if (!record.truncated) {
    std::vector<std::uint8_t> bits(n);
    for (const auto& [i, label] : state.labeled()) bits[i] = label;
    record.final_labels = Labeling(std::move(bits));
  }
  return record;
}

CurveMetrics curve_metrics(const RunRecord& record, std::size_t target) {
  if (record.question_log.empty() || record.curve.size() < 2) throw std::invalid_argument("no questions logged");
  if (target == 0) throw std::invalid_argument("target label count must be positive");
  CurveMetrics m;
  m.q_at_l = record.max_questions;
  for (const CurvePoint& p : record.curve) {
    if (p.labeled >= target) {
      m.q_at_l = p.questions;
      break;
    }
  }
  const CurvePoint& last = record.curve.back();
  m.max_q = last.questions;
  m.l_at_max_q = last.labeled;
  m.incorrect_at_max_q = last.incorrect;
  m.ratio = static_cast<double>(m.q_at_l) / static_cast<double>(target);
  return m;
}

void to_json(nlohmann::json& j, const CurveMetrics& m) {
  j = nlohmann::json{{"q_at_l", m.q_at_l},
                     {"max_q", m.max_q},
                     {"l_at_max_q", m.l_at_max_q},
                     {"incorrect_at_max_q", m.incorrect_at_max_q},
                     {"ratio", m.ratio}};
}

const SummaryRow& SuiteResult::find(Problem p, const std::string& method) const {
  for (const auto& row : summary) {
    if (row.problem == p && row.method == method) return row;
  }
  throw std::out_of_range("no summary row for problem " + to_string(p) + " / " + method);
}

namespace {

struct SeedOutcome {
  std::vector<SuiteRow> rows;
  std::vector<CurveRow> curves;
  bool failed = false;
};

SeedOutcome run_one(Problem problem, std::uint64_t seed, const SuiteOptions& options) {
  SeedOutcome out;
  const SyntheticInstance inst = generate(problem, seed);
  const double h = joint_entropy(inst.probs);
  out.rows.push_back({problem, "entropy", seed, h, h, false});
  for (const Method method : {Method::huffman, Method::ia}) {
    RunOptions run;
    run.method = method;
    run.search = options.search;
    run.search.seed = options.search.seed + seed;
    run.max_questions = options.max_questions;
    const RunRecord rec = simulate_run(inst.probs, inst.labels, run, seed);
    if (!rec.truncated && rec.final_labels != inst.labels) out.failed = true;
    out.rows.push_back({problem, to_string(method), seed, static_cast<double>(rec.total_questions), h, rec.truncated});
    for (const CurvePoint& p : rec.curve) out.curves.push_back({problem, to_string(method), seed, p});
  }
  return out;
}

struct Moments {
  double sum = 0.0, sum_sq = 0.0;
  std::size_t n = 0;
  void add(double x) {
    sum += x;
    sum_sq += x * x;
    ++n;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
  double sem() const {
    if (n < 2) return 0.0;
    const double m = mean();
    const double var = std::max(0.0, (sum_sq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1));
    return std::sqrt(var / static_cast<double>(n));
  }
};

}  // namespace

SuiteResult run_table1_suite(const SuiteOptions& options) {
  options.search.validate();
  std::vector<std::uint64_t> seeds = options.seeds;
  if (seeds.empty()) {
    for (std::uint64_t s = 0; s < 1000; ++s) seeds.push_back(s);
  }
  const std::size_t tasks = options.problems.size() * seeds.size();
  std::vector<SeedOutcome> outcomes(tasks);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto worker = [&]() {
    for (std::size_t t = next++; t < tasks; t = next++) {
      try {
        outcomes[t] = run_one(options.problems[t / seeds.size()], seeds[t % seeds.size()], options);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        outcomes[t].failed = true;
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, tasks));
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  SuiteResult result;
  for (auto& o : outcomes) {
    if (o.failed) ++result.failures;
    result.rows.insert(result.rows.end(), o.rows.begin(), o.rows.end());
    result.curves.insert(result.curves.end(), o.curves.begin(), o.curves.end());
  }
  for (const Problem p : options.problems) {
    for (const std::string method : {"entropy", "huffman", "ia"}) {
      Moments q, diff, ratio;
      for (const SuiteRow& r : result.rows) {
        if (r.problem != p || r.method != method) continue;
        q.add(r.questions);
        diff.add(r.questions - r.entropy);
        ratio.add(r.questions / r.entropy);
      }
      result.summary.push_back(
          {p, method, q.n, q.mean(), q.sem(), diff.mean(), diff.sem(), ratio.mean(), ratio.sem()});
    }
  }
  if (first_error && result.rows.empty()) std::rethrow_exception(first_error);
  return result;
}

void write_suite_csv(const SuiteResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    out << std::setprecision(10);
    return out;
  };
  {
    auto out = open("table1_runs.csv");
    out << "problem,method,seed,questions,entropy,truncated\n";
    for (const auto& r : result.rows) {
      out << to_string(r.problem) << ',' << r.method << ',' << r.seed << ',' << r.questions << ',' << r.entropy << ','
          << (r.truncated ? 1 : 0) << '\n';
    }
  }
  {
    auto out = open("table1_summary.csv");
    out << "problem,method,runs,mean_q,sem_q,mean_q_minus_h,sem_q_minus_h,mean_q_over_h,sem_q_over_h\n";
    for (const auto& s : result.summary) {
      out << to_string(s.problem) << ',' << s.method << ',' << s.runs << ',' << s.mean_q << ',' << s.sem_q << ','
          << s.mean_q_minus_h << ',' << s.sem_q_minus_h << ',' << s.mean_q_over_h << ',' << s.sem_q_over_h << '\n';
    }
  }
  {
    auto out = open("curves.csv");
    out << "problem,method,seed,q,labeled,incorrect\n";
    for (const auto& c : result.curves) {
      out << to_string(c.problem) << ',' << c.method << ',' << c.seed << ',' << c.point.questions << ','
          << c.point.labeled << ',' << c.point.incorrect << '\n';
    }
  }
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  auto to_u64 = [&](const std::string& s) -> std::uint64_t {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      throw std::invalid_argument("invalid seed '" + s + "' in '" + text + "'");
    }
    return std::stoull(s);
  };
  std::vector<std::uint64_t> out;
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const std::uint64_t lo = to_u64(text.substr(0, dots));
    const std::uint64_t hi = to_u64(text.substr(dots + 2));
    if (hi < lo) throw std::invalid_argument("empty seed range '" + text + "'");
    for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
    return out;
  }
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(to_u64(part));
  if (out.empty()) throw std::invalid_argument("empty seed list");
  return out;
}

}  // namespace qanno

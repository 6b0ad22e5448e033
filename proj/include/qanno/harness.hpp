#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qanno/label_model.hpp"
#include "qanno/predictors.hpp"
#include "qanno/questioner.hpp"
#include "qanno/synthetic.hpp"

namespace qanno {

enum class Method { ia, huffman };

std::string to_string(Method m);

inline constexpr std::size_t kDefaultMaxQuestions = 2500;

struct QuestionRecord {
  std::size_t size = 0;  // guess size; for Huffman, number of labelings in the question set
  bool correct = false;

  bool operator==(const QuestionRecord&) const = default;
};

struct CurvePoint {
  std::size_t questions = 0;
  std::size_t labeled = 0;
  std::size_t incorrect = 0;

  bool operator==(const CurvePoint&) const = default;
};

struct RunRecord {
  std::uint64_t seed = 0;
  Method method = Method::ia;
  std::size_t item_count = 0;
  std::vector<QuestionRecord> question_log;
  std::size_t total_questions = 0;
  double entropy = 0.0;                // joint entropy of the starting probabilities
  std::vector<CurvePoint> curve;       // starts at question 0
  bool truncated = false;              // question cap reached first
  std::size_t max_questions = kDefaultMaxQuestions;
  std::optional<Labeling> final_labels;  // set on completed runs
};

/// Predictor trained from scratch on the answers gathered so far.
struct FromScratchSetup {
  std::vector<Point2D> points;
  LogisticModel model;
};

struct RunOptions {
  Method method = Method::ia;
  SearchConfig search;
  std::size_t max_questions = kDefaultMaxQuestions;
  /// When set, one random item is labeled for free, the logistic model is
  /// fit on it and retrained on the retrain_due cadence; `probs` then only
  /// supplies the reported entropy.
  std::optional<FromScratchSetup> from_scratch;
};

/// Retrain after question q when q is a multiple of ceil(q / 100): every
/// question up to 100, every second one up to 200, and so on.
bool retrain_due(std::size_t questions);

/// Answers every emitted question from `truth` until all items are labeled
/// or the question cap is hit.
RunRecord simulate_run(const ItemProbabilities& probs, const Labeling& truth, const RunOptions& options,
                       std::uint64_t seed = 0);

struct CurveMetrics {
  std::size_t q_at_l = 0;  // first question count reaching the target, or the cap
  std::size_t max_q = 0;
  std::size_t l_at_max_q = 0;
  std::size_t incorrect_at_max_q = 0;
  double ratio = 0.0;  // q_at_l / target
};

/// Throws std::invalid_argument("no questions logged") on an empty record.
CurveMetrics curve_metrics(const RunRecord& record, std::size_t target);

void to_json(nlohmann::json& j, const CurveMetrics& m);

struct SuiteOptions {
  std::vector<Problem> problems{Problem::a, Problem::b, Problem::c};
  std::vector<std::uint64_t> seeds;  // defaults to 0..999 when empty
  SearchConfig search;
  std::size_t max_questions = kDefaultMaxQuestions;
  std::size_t jobs = 1;
};

struct SuiteRow {
  Problem problem = Problem::a;
  std::string method;  // "entropy", "huffman" or "ia"
  std::uint64_t seed = 0;
  double questions = 0.0;
  double entropy = 0.0;
  bool truncated = false;
};

struct SummaryRow {
  Problem problem = Problem::a;
  std::string method;
  std::size_t runs = 0;
  double mean_q = 0.0, sem_q = 0.0;
  double mean_q_minus_h = 0.0, sem_q_minus_h = 0.0;
  double mean_q_over_h = 0.0, sem_q_over_h = 0.0;
};

struct CurveRow {
  Problem problem = Problem::a;
  std::string method;
  std::uint64_t seed = 0;
  CurvePoint point;
};

struct SuiteResult {
  std::vector<SuiteRow> rows;        // ordered by problem, seed, method
  std::vector<SummaryRow> summary;   // ordered by problem, method
  std::vector<CurveRow> curves;
  std::size_t failures = 0;

  const SummaryRow& find(Problem p, const std::string& method) const;
};

/// Entropy bound, Huffman and IA over every (problem, seed), fixed predictors,
/// no initial labels. Runs on `jobs` worker threads; the result does not
/// depend on the thread count.
SuiteResult run_table1_suite(const SuiteOptions& options);

/// Writes table1_runs.csv, table1_summary.csv and curves.csv.
void write_suite_csv(const SuiteResult& result, const std::filesystem::path& dir);

/// Parses "A..B" (inclusive), "A,B,C" or a single integer.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

}  // namespace qanno

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include "qanno/annotation_state.hpp"
#include "qanno/error.hpp"
#include "qanno/harness.hpp"
#include "qanno/huffman.hpp"
#include "qanno/predictors.hpp"
#include "qanno/questioner.hpp"
#include "qanno/server.hpp"
#include "qanno/session.hpp"
#include "qanno/synthetic.hpp"

namespace {

using namespace qanno;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Raised for invalid flag values found after parsing; exits with status 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SearchFlags {
  SearchConfig config;
  std::string al_method = "uncertainty";
  std::string cost_fn = "entropy";
  double reduce_certainty_factor = -1.0;
  std::string config_path;

  void add_to(CLI::App& app) {
    app.add_option("--max-n", config.max_n, "largest guess size");
    app.add_option("--max-expansions", config.max_expansions, "search expansions per question");
    app.add_option("--temperature", config.temperature, "softmax temperature for node selection");
    app.add_option("--max-depth", config.max_depth, "deepest state node the search expands");
    app.add_option("--al-method", al_method, "single-item choice: random|uncertainty")
        ->check(CLI::IsMember({"random", "uncertainty"}));
    app.add_option("--cost-fn", cost_fn, "proxy cost: entropy|length")->check(CLI::IsMember({"entropy", "length"}));
    app.add_option("--reduce-certainty-factor", reduce_certainty_factor,
                   "certainty reduction in [0,1]; negative picks 0.05 (length) or 0.01 (entropy)");
    app.add_flag("--reset-tree", config.reset_tree, "rebuild the search tree after every answer");
    app.add_option("--search-seed", config.seed, "seed for random al-method picks");
    app.add_option("--config", config_path, "search config JSON; its keys override the flags");
  }

  SearchConfig resolve() const {
    SearchConfig c = config;
    c.al_method = parse_al_method(al_method);
    c.cost_fn = parse_cost_fn(cost_fn);
    if (reduce_certainty_factor >= 0.0) c.reduce_certainty_factor = reduce_certainty_factor;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ParseError(config_path + ": cannot open config file");
      try {
        from_json(json::parse(in), c);
      } catch (const json::exception& e) {
        throw ParseError(config_path + ": " + e.what());
      }
    }
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return c;
  }
};

std::size_t default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

std::vector<Problem> parse_problems(const std::string& s) {
  if (s == "all") return {Problem::a, Problem::b, Problem::c};
  std::vector<Problem> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(parse_problem(part));
  return out;
}

void print_summary(const SuiteResult& result) {
  std::cout << std::left << std::setw(8) << "problem" << std::setw(9) << "method" << std::right << std::setw(9)
            << "Q" << std::setw(9) << "Q-H" << std::setw(9) << "Q/H" << "\n";
  std::cout << std::fixed << std::setprecision(3);
  for (const SummaryRow& s : result.summary) {
    std::cout << std::left << std::setw(8) << to_string(s.problem) << std::setw(9) << s.method << std::right
              << std::setw(9) << s.mean_q << std::setw(9) << s.mean_q_minus_h << std::setw(9) << s.mean_q_over_h
              << "\n";
  }
}

int run_synth(const SearchFlags& flags, const std::string& problems, const std::string& seeds,
              const std::string& out, std::size_t jobs, std::size_t max_questions) {
  SuiteOptions options;
  options.search = flags.resolve();
  try {
    options.problems = parse_problems(problems);
    options.seeds = parse_seed_list(seeds);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  options.jobs = jobs;
  options.max_questions = max_questions;
  const SuiteResult result = run_table1_suite(options);
  write_suite_csv(result, out);
  json summary = json::array();
  for (const SummaryRow& s : result.summary) {
    summary.push_back({{"problem", to_string(s.problem)},
                       {"method", s.method},
                       {"runs", s.runs},
                       {"mean_q", s.mean_q},
                       {"sem_q", s.sem_q},
                       {"mean_q_minus_h", s.mean_q_minus_h},
                       {"sem_q_minus_h", s.sem_q_minus_h},
                       {"mean_q_over_h", s.mean_q_over_h},
                       {"sem_q_over_h", s.sem_q_over_h}});
  }
  std::ofstream(std::filesystem::path(out) / "table1_summary.json")
      << json{{"config", options.search}, {"failures", result.failures}, {"summary", summary}}.dump(2) << "\n";
  print_summary(result);
  std::cout << "wrote " << out << "/table1_runs.csv, table1_summary.csv, table1_summary.json, curves.csv\n";
  if (result.failures > 0) {
    std::cerr << "error: " << result.failures << " run(s) failed\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int interactive_session(const ProbabilityFile& file, const SearchConfig& config) {
  AnnotationState state(file.probs.size());
  SearchTree tree(state);
  std::size_t questions = 0;
  while (!state.is_terminal()) {
    const Guess g = best_action(tree, file.probs, config);
    std::cout << "\nQuestion " << (questions + 1) << ": are all of these labels correct?\n";
    for (std::size_t k = 0; k < g.size(); ++k) {
      const std::size_t i = g.indices[k];
      std::cout << "  item " << i;
      if (i < file.payloads.size() && !file.payloads[i].empty()) std::cout << " [" << file.payloads[i] << "]";
      std::cout << " -> " << int{g.labels[k]} << "\n";
    }
    std::string reply;
    bool correct = false;
    for (;;) {
      std::cout << "[y/n/q] " << std::flush;
      if (!std::getline(std::cin, reply) || reply == "q") {
        std::cout << "\nstopped after " << questions << " questions, " << state.labeled_count() << " of "
                  << state.item_count() << " labeled\n";
        return kExitOk;
      }
      if (reply == "y" || reply == "n") break;
    }
    correct = reply == "y";
    state = apply_answer(state, g, correct);
    tree = advance(std::move(tree), g, correct, config);
    ++questions;
  }
  std::cout << "\nall " << state.item_count() << " items labeled with " << questions << " questions\nlabels:";
  for (const auto& [i, label] : state.labeled()) std::cout << ' ' << int{label};
  std::cout << "\n";
  return kExitOk;
}

int run_annotate(const SearchFlags& flags, const std::string& file, const std::string& method,
                 std::size_t max_questions, std::size_t target_l, const std::string& out, std::uint64_t seed) {
  const SearchConfig config = flags.resolve();
  const ProbabilityFile data = load_probability_file(file);
  if (!data.labels) return interactive_session(data, config);

  RunOptions options;
  options.method = method == "huffman" ? Method::huffman : Method::ia;
  options.search = config;
  options.max_questions = max_questions;
  if (options.method == Method::huffman && data.probs.size() > kMaxHuffmanItems) {
    throw UsageError("huffman method supports at most 20 items, file has " + std::to_string(data.probs.size()));
  }
  const RunRecord rec = simulate_run(data.probs, *data.labels, options, seed);
  const std::size_t target = target_l > 0 ? target_l : data.probs.size();
  const CurveMetrics m = curve_metrics(rec, target);
  json doc{{"method", to_string(rec.method)},
           {"items", rec.item_count},
           {"entropy", rec.entropy},
           {"questions", rec.total_questions},
           {"truncated", rec.truncated},
           {"correct_labels", rec.final_labels && *rec.final_labels == *data.labels},
           {"metrics", m}};
  std::cout << doc.dump(2) << "\n";
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    std::ofstream(std::filesystem::path(out) / "run.json") << doc.dump(2) << "\n";
    std::ofstream curve(std::filesystem::path(out) / "curve.csv");
    curve << "q,labeled,incorrect\n";
    for (const CurvePoint& p : rec.curve) curve << p.questions << ',' << p.labeled << ',' << p.incorrect << '\n';
  }
  return kExitOk;
}

int run_huffman_demo(std::size_t n, std::uint64_t seed, const std::string& file) {
  ItemProbabilities probs;
  if (!file.empty()) {
    probs = load_probability_file(file).probs;
  } else {
    if (n == 0) throw UsageError("--n must be at least 1");
    if (n > kMaxHuffmanItems) {
      throw UsageError("--n " + std::to_string(n) + " exceeds the Huffman capacity of 20 items (2^20 labelings)");
    }
    Rng rng(seed);
    std::vector<double> p(n);
    for (double& x : p) x = rng.uniform();
    probs = ItemProbabilities(std::move(p));
  }
  if (probs.size() > kMaxHuffmanItems) {
    throw UsageError("dataset has " + std::to_string(probs.size()) + " items; Huffman capacity is 20");
  }
  const HuffmanTree tree = build_huffman(probs);
  const double h = joint_entropy(probs);
  const double q = expected_questions(tree);
  std::cout << std::setprecision(6) << std::fixed;
  std::cout << "items              " << probs.size() << "\n";
  std::cout << "labelings          " << tree.symbol_count() << "\n";
  std::cout << "entropy H          " << h << "\n";
  std::cout << "expected questions " << q << "\n";
  std::cout << "Q - H              " << q - h << "\n";
  std::cout << "max depth          " << tree.max_depth() << "\n";
  if (tree.symbol_count() <= kMaxDpSymbols) {
    std::cout << "DP optimum         " << optimal_expected_questions_dp(labeling_distribution(probs)) << "\n";
  }
  if (probs.size() <= 4) {
    std::cout << "codewords:\n";
    for (std::uint32_t s = 0; s < tree.symbol_count(); ++s) {
      std::string code;
      for (auto id = static_cast<HuffmanTree::NodeId>(s); tree.node(id).parent != HuffmanTree::kNone;
           id = tree.node(id).parent) {
        code.insert(code.begin(), tree.node(tree.node(id).parent).right == id ? '1' : '0');
      }
      std::cout << "  ";
      for (const auto b : tree.labeling_of(s).bits) std::cout << int{b};
      std::cout << "  p=" << tree.node(s).probability << "  " << code << "\n";
    }
  }
  return kExitOk;
}

int run_export(const std::string& problems, const std::string& seeds, const std::string& out, std::size_t size) {
  std::vector<Problem> ps;
  std::vector<std::uint64_t> ss;
  try {
    ps = parse_problems(problems);
    ss = parse_seed_list(seeds);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  for (const Problem p : ps) {
    for (const std::uint64_t s : ss) export_instance(generate(p, s, size), out);
  }
  std::cout << "exported " << ps.size() * ss.size() << " instance(s) to " << out << "\n";
  return kExitOk;
}

int run(int argc, char** argv) {
  CLI::App app{"qanno: annotation by binary questioning"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  SearchFlags synth_flags, annotate_flags;
  std::string problems = "all", seeds = "0..999", out = "out";
  std::size_t jobs = default_jobs();
  std::size_t max_questions = kDefaultMaxQuestions;

  auto* synth = app.add_subcommand("synth", "run the synthetic benchmark suite and write CSV results");
  synth->add_option("--problem", problems, "a, b, c, a comma list, or all");
  synth->add_option("--seeds", seeds, "seed range A..B or list A,B,C");
  synth->add_option("--out", out, "output directory");
  synth->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  synth->add_option("--max-questions", max_questions, "question cap per run");
  synth_flags.add_to(*synth);

  std::string file, method = "ia", annotate_out;
  std::size_t annotate_cap = kDefaultMaxQuestions, target_l = 0;
  std::uint64_t run_seed = 0;
  auto* annotate = app.add_subcommand("annotate", "annotate a probability file (simulated if it has labels)");
  annotate->add_option("--file", file, "probability JSON file")->required();
  annotate->add_option("--method", method, "ia|huffman")->check(CLI::IsMember({"ia", "huffman"}));
  annotate->add_option("--max-questions", annotate_cap, "question cap");
  annotate->add_option("--target-l", target_l, "label count for Q_at_L; 0 means all items");
  annotate->add_option("--out", annotate_out, "directory for run.json and curve.csv");
  annotate->add_option("--seed", run_seed, "run seed");
  annotate_flags.add_to(*annotate);

  std::size_t demo_n = 4;
  std::uint64_t demo_seed = 0;
  std::string demo_file;
  auto* demo = app.add_subcommand("huffman-demo", "print Huffman tree statistics for a small dataset");
  demo->add_option("--n", demo_n, "number of items with random probabilities (at most 20)");
  demo->add_option("--seed", demo_seed, "seed for the random probabilities");
  demo->add_option("--file", demo_file, "probability JSON file instead of random probabilities");

  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir = SessionStore::default_root().string();
  auto* serve_cmd = app.add_subcommand("serve", "start the HTTP session service");
  serve_cmd->add_option("--host", host, "bind address");
  serve_cmd->add_option("--port", port, "TCP port")->check(CLI::Range(1, 65535));
  serve_cmd->add_option("--data-dir", data_dir, std::string("session directory (env ") + kDataDirEnv + ")");

  std::string export_problems = "all", export_seeds = "0", export_out = "instances";
  std::size_t export_size = kSyntheticSize;
  auto* export_cmd = app.add_subcommand("export", "write synthetic instances as probability files");
  export_cmd->add_option("--problem", export_problems, "a, b, c, a comma list, or all");
  export_cmd->add_option("--seeds", export_seeds, "seed range A..B or list A,B,C");
  export_cmd->add_option("--out", export_out, "output directory");
  export_cmd->add_option("--size", export_size, "items per instance (even)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth) return run_synth(synth_flags, problems, seeds, out, jobs, max_questions);
    if (*annotate) return run_annotate(annotate_flags, file, method, annotate_cap, target_l, annotate_out, run_seed);
    if (*demo) return run_huffman_demo(demo_n, demo_seed, demo_file);
    if (*serve_cmd) {
      SessionStore store(data_dir);
      return serve(store, host, port) ? kExitOk : kExitRuntime;
    }
    if (*export_cmd) {
      if (export_size == 0 || export_size % 2 != 0) throw UsageError("--size must be even and positive");
      return run_export(export_problems, export_seeds, export_out, export_size);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CapacityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }

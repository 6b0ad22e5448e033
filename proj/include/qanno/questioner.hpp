#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "qanno/annotation_state.hpp"
#include "qanno/label_model.hpp"

namespace qanno {

enum class AlMethod { random, uncertainty };
enum class CostFn { entropy, length };

std::string to_string(AlMethod m);
std::string to_string(CostFn c);
AlMethod parse_al_method(const std::string& s);
CostFn parse_cost_fn(const std::string& s);

/// Knobs of the lookahead search. Field names double as JSON keys and CLI flags.
struct SearchConfig {
  std::size_t max_n = 8;
  std::size_t max_expansions = 8;
  double temperature = 10.0;
  std::size_t max_depth = 20;
  AlMethod al_method = AlMethod::uncertainty;
  CostFn cost_fn = CostFn::entropy;
  /// Unset means 0.05 for the length cost and 0.01 for entropy.
  std::optional<double> reduce_certainty_factor;
  bool reset_tree = false;
  std::uint64_t seed = 0;

  double effective_reduce_certainty() const;
  /// Throws std::invalid_argument on violated invariants.
  void validate() const;

  bool operator==(const SearchConfig&) const = default;
};

void to_json(nlohmann::json& j, const SearchConfig& c);
/// Overlays the keys present in `j` onto `c`; unknown keys are rejected.
void from_json(const nlohmann::json& j, SearchConfig& c);

class SearchContext;

/// Alternating state/action lookahead tree.
///
/// State node cost: 0 when terminal, the proxy cost while unexpanded, the
/// minimum action cost once expanded. Action node cost: 1 for the question
/// plus the probability-weighted costs of its two successor states.
class SearchTree {
 public:
  struct ActionNode;

  struct StateNode {
    AnnotationState state;
    double cost = 0.0;
    bool expanded = false;
    ActionNode* parent = nullptr;
    std::vector<std::unique_ptr<ActionNode>> actions;
    double priority = 0.0;  // scratch, written by select_node

    bool terminal() const { return state.is_terminal(); }
    /// Index of the first minimum-cost action; requires actions.
    std::size_t best_action_index() const;
  };

  struct ActionNode {
    Guess guess;
    double cost = 0.0;
    double p_correct = 0.0;
    StateNode* parent = nullptr;
    std::unique_ptr<StateNode> if_correct;
    std::unique_ptr<StateNode> if_incorrect;
    double priority = 0.0;  // scratch, written by select_node
  };

  explicit SearchTree(AnnotationState root_state);
  SearchTree(SearchTree&&) noexcept = default;
  SearchTree& operator=(SearchTree&&) noexcept = default;

  StateNode& root() { return *root_; }
  const StateNode& root() const { return *root_; }

  /// Probabilities (after certainty reduction) the node costs were computed
  /// with; empty until the first search.
  const std::vector<double>& bound_probabilities() const { return bound_probs_; }

  /// Makes the tree consistent with the context's probabilities: when they
  /// differ from the bound ones the tree restarts from the root state.
  void bind(const SearchContext& ctx);

  std::size_t state_node_count() const;

 private:
  friend SearchTree advance(SearchTree&& tree, const Guess& taken, bool correct, const SearchConfig& config);

  std::unique_ptr<StateNode> root_;
  std::vector<double> bound_probs_;
};

/// Per-search precomputation shared by node expansions.
class SearchContext {
 public:
  SearchContext(const ItemProbabilities& probs, const SearchConfig& config);

  const ItemProbabilities& probs() const { return probs_; }
  const SearchConfig& config() const { return config_; }

  /// Proxy estimate of the remaining questions from `state`.
  double proxy_cost(const AnnotationState& state) const;
  /// Items sorted by decreasing certainty |p - 0.5|, lower index first on ties.
  const std::vector<std::size_t>& certainty_order() const { return certainty_order_; }

 private:
  ItemProbabilities probs_;
  SearchConfig config_;
  std::vector<double> item_entropy_;
  std::vector<std::size_t> certainty_order_;
};

/// Softmax of -cost / temperature.
std::vector<double> softmax_priorities(std::span<const double> costs, double temperature);

/// Recomputes all priorities top-down and returns the highest-priority
/// unexpanded non-terminal state node shallower than max_depth, or nullptr
/// once every such node is expanded.
SearchTree::StateNode* select_node(SearchTree& tree, const SearchConfig& config);

/// Creates the action children of `node`. With a pending incorrect guess the
/// only action is the don't-give-up guess. Otherwise n = 1 picks an item by the
/// active-learning rule and n >= 2 takes the n most certain unlabeled items;
/// n grows until the cost rises, n reaches max_n, or items run out.
void expand_node(SearchTree::StateNode& node, const SearchContext& ctx);
void expand_node(SearchTree::StateNode& node, const ItemProbabilities& probs, const SearchConfig& config);

/// Propagates a changed state cost toward the root.
void update_parents(SearchTree::StateNode& node);

/// Runs up to max_expansions select/expand/update rounds on certainty-reduced
/// probabilities and returns the root's cheapest action. Throws TerminalState
/// when everything is labeled.
Guess best_action(SearchTree& tree, const ItemProbabilities& probs, const SearchConfig& config);

/// Moves the root to the successor reached by answering `taken`. Keeps the
/// matching subtree unless config.reset_tree. Throws InvalidGuess when
/// `taken` is not an action of the root.
SearchTree advance(SearchTree&& tree, const Guess& taken, bool correct, const SearchConfig& config);

}  // namespace qanno

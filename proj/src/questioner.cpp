#include "qanno/questioner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "qanno/error.hpp"
#include "qanno/json_util.hpp"

namespace qanno {

std::string to_string(AlMethod m) { return m == AlMethod::random ? "random" : "uncertainty"; }
std::string to_string(CostFn c) { return c == CostFn::entropy ? "entropy" : "length"; }

AlMethod parse_al_method(const std::string& s) {
  if (s == "random") return AlMethod::random;
  if (s == "uncertainty") return AlMethod::uncertainty;
  throw std::invalid_argument("al_method must be 'random' or 'uncertainty', got '" + s + "'");
}

CostFn parse_cost_fn(const std::string& s) {
  if (s == "entropy") return CostFn::entropy;
  if (s == "length") return CostFn::length;
  throw std::invalid_argument("cost_fn must be 'entropy' or 'length', got '" + s + "'");
}

double SearchConfig::effective_reduce_certainty() const {
  if (reduce_certainty_factor) return *reduce_certainty_factor;
  return cost_fn == CostFn::length ? 0.05 : 0.01;
}

void SearchConfig::validate() const {
  if (max_n < 1) throw std::invalid_argument("max_n must be at least 1");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw std::invalid_argument("temperature must be > 0");
  if (max_depth < 1) throw std::invalid_argument("max_depth must be at least 1");
  const double f = effective_reduce_certainty();
  if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("reduce_certainty_factor must lie in [0, 1]");
}

void to_json(nlohmann::json& j, const SearchConfig& c) {
  j = nlohmann::json{{"max_n", c.max_n},
                     {"max_expansions", c.max_expansions},
                     {"temperature", c.temperature},
                     {"max_depth", c.max_depth},
                     {"al_method", to_string(c.al_method)},
                     {"cost_fn", to_string(c.cost_fn)},
                     {"reduce_certainty_factor", c.reduce_certainty_factor ? nlohmann::json(*c.reduce_certainty_factor) : nlohmann::json(nullptr)},
                     {"reset_tree", c.reset_tree},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, SearchConfig& c) {
  if (!j.is_object()) throw std::invalid_argument("search config must be a JSON object");
  SearchConfig out = c;
  auto count = [](const std::string& key, const nlohmann::json& v) {
    if (!is_non_negative_integer(v)) throw std::invalid_argument(key + ": expected a non-negative integer");
    return v.get<std::size_t>();
  };
  for (const auto& [key, value] : j.items()) {
    if (key == "max_n") {
      out.max_n = count(key, value);
    } else if (key == "max_expansions") {
      out.max_expansions = count(key, value);
    } else if (key == "temperature") {
      out.temperature = value.get<double>();
    } else if (key == "max_depth") {
      out.max_depth = count(key, value);
    } else if (key == "al_method") {
      out.al_method = parse_al_method(value.get<std::string>());
    } else if (key == "cost_fn") {
      out.cost_fn = parse_cost_fn(value.get<std::string>());
    } else if (key == "reduce_certainty_factor") {
      if (!value.is_null()) out.reduce_certainty_factor = value.get<double>();
    } else if (key == "reset_tree") {
      out.reset_tree = value.get<bool>();
    } else if (key == "seed") {
      out.seed = count(key, value);
    } else {
      throw std::invalid_argument("unknown search config field '" + key + "'");
    }
  }
  out.validate();
  c = out;
}

std::size_t SearchTree::StateNode::best_action_index() const {
  std::size_t best = 0;
  for (std::size_t a = 1; a < actions.size(); ++a) {
    if (actions[a]->cost < actions[best]->cost) best = a;
  }
  return best;
}

SearchTree::SearchTree(AnnotationState root_state) : root_(std::make_unique<StateNode>()) {
  root_->state = std::move(root_state);
}

void SearchTree::bind(const SearchContext& ctx) {
  const auto values = ctx.probs().values();
  if (ctx.probs().size() != root_->state.item_count()) {
    throw LengthMismatch("probabilities do not match the dataset size of the search tree");
  }
  if (bound_probs_.size() == values.size() && std::equal(values.begin(), values.end(), bound_probs_.begin())) {
    return;
  }
  auto fresh = std::make_unique<StateNode>();
  fresh->state = std::move(root_->state);
  fresh->cost = ctx.proxy_cost(fresh->state);
  root_ = std::move(fresh);
  bound_probs_.assign(values.begin(), values.end());
}

std::size_t SearchTree::state_node_count() const {
  std::size_t count = 0;
  std::vector<const StateNode*> stack{root_.get()};
  while (!stack.empty()) {
    const StateNode* s = stack.back();
    stack.pop_back();
    ++count;
    for (const auto& a : s->actions) {
      stack.push_back(a->if_correct.get());
      stack.push_back(a->if_incorrect.get());
    }
  }
  return count;
}

SearchContext::SearchContext(const ItemProbabilities& probs, const SearchConfig& config)
    : probs_(probs), config_(config), item_entropy_(probs.size()), certainty_order_(probs.size()) {
  config_.validate();
  for (std::size_t i = 0; i < probs_.size(); ++i) item_entropy_[i] = binary_entropy(probs_[i]);
  std::iota(certainty_order_.begin(), certainty_order_.end(), std::size_t{0});
  std::stable_sort(certainty_order_.begin(), certainty_order_.end(), [this](std::size_t a, std::size_t b) {
    return std::abs(probs_[a] - 0.5) > std::abs(probs_[b] - 0.5);
  });
}

double SearchContext::proxy_cost(const AnnotationState& state) const {
  if (state.is_terminal()) return 0.0;
  if (config_.cost_fn == CostFn::length) return state_log_size(state);
  double h = 0.0;
  for (std::size_t i = 0; i < state.item_count(); ++i) {
    if (!state.is_labeled(i)) h += item_entropy_[i];
  }
  if (const auto& pending = state.pending_incorrect()) {
    for (std::size_t i : pending->indices) h -= item_entropy_[i];
    h += pending_block_entropy(*pending, probs_);
  }
  return h;
}

std::vector<double> softmax_priorities(std::span<const double> costs, double temperature) {
  std::vector<double> w(costs.size());
  if (costs.empty()) return w;
  const double lowest = *std::min_element(costs.begin(), costs.end());
  double total = 0.0;
  for (std::size_t a = 0; a < costs.size(); ++a) {
    w[a] = std::exp(-(costs[a] - lowest) / temperature);
    total += w[a];
  }
  for (double& x : w) x /= total;
  return w;
}

SearchTree::StateNode* select_node(SearchTree& tree, const SearchConfig& config) {
  struct Frame {
    SearchTree::StateNode* node;
    std::size_t depth;
  };
  SearchTree::StateNode* best = nullptr;
  tree.root().priority = 1.0;
  std::vector<Frame> stack{{&tree.root(), 0}};
  std::vector<double> costs;
  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    SearchTree::StateNode& s = *f.node;
    if (!s.expanded) {
      if (!s.terminal() && f.depth < config.max_depth && (best == nullptr || s.priority > best->priority)) {
        best = &s;
      }
      continue;
    }
    costs.clear();
    for (const auto& a : s.actions) costs.push_back(a->cost);
    const std::vector<double> w = softmax_priorities(costs, config.temperature);
    // Pushed in reverse so that the walk visits actions in creation order,
    // correct branch first; the first node reaching the top priority wins.
    for (std::size_t k = s.actions.size(); k-- > 0;) {
      auto& a = *s.actions[k];
      a.priority = s.priority * w[k];
      a.if_incorrect->priority = a.priority * (1.0 - a.p_correct);
      a.if_correct->priority = a.priority * a.p_correct;
      stack.push_back({a.if_incorrect.get(), f.depth + 1});
      stack.push_back({a.if_correct.get(), f.depth + 1});
    }
  }
  return best;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Random active-learning pick as a pure function of (seed, state).
std::size_t random_unlabeled(const AnnotationState& state, std::uint64_t seed) {
  std::uint64_t h = splitmix64(seed);
  for (std::size_t i = 0; i < state.item_count(); ++i) {
    const auto l = state.label(i);
    h = splitmix64(h ^ (l ? *l + 1U : 0U) ^ (static_cast<std::uint64_t>(i) << 2));
  }
  if (const auto& pending = state.pending_incorrect()) {
    for (std::size_t k = 0; k < pending->size(); ++k) {
      h = splitmix64(h ^ (pending->indices[k] << 1 | pending->labels[k]));
    }
  }
  std::size_t target = static_cast<std::size_t>(h % state.unlabeled_count());
  for (std::size_t i = 0; i < state.item_count(); ++i) {
    if (state.is_labeled(i)) continue;
    if (target == 0) return i;
    --target;
  }
  throw std::logic_error("random_unlabeled: no unlabeled item");
}

std::size_t most_uncertain_unlabeled(const AnnotationState& state, const ItemProbabilities& probs) {
  std::size_t best = state.item_count();
  double best_u = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < state.item_count(); ++i) {
    if (state.is_labeled(i)) continue;
    const double u = std::abs(probs[i] - 0.5);
    if (u < best_u) {
      best_u = u;
      best = i;
    }
  }
  return best;
}

Guess make_guess(std::vector<std::size_t> indices, const ItemProbabilities& probs) {
  std::sort(indices.begin(), indices.end());
  Guess g;
  g.labels.reserve(indices.size());
  for (std::size_t i : indices) g.labels.push_back(probs.argmax_label(i));
  g.indices = std::move(indices);
  return g;
}

SearchTree::ActionNode& add_action(SearchTree::StateNode& node, Guess g, const SearchContext& ctx) {
  auto action = std::make_unique<SearchTree::ActionNode>();
  action->parent = &node;
  action->p_correct = guess_probability(node.state, ctx.probs(), g);
  for (const bool correct : {true, false}) {
    auto child = std::make_unique<SearchTree::StateNode>();
    child->state = apply_answer(node.state, g, correct);
    child->cost = ctx.proxy_cost(child->state);
    child->parent = action.get();
    (correct ? action->if_correct : action->if_incorrect) = std::move(child);
  }
  action->cost =
      1.0 + action->p_correct * action->if_correct->cost + (1.0 - action->p_correct) * action->if_incorrect->cost;
  action->guess = std::move(g);
  node.actions.push_back(std::move(action));
  return *node.actions.back();
}

}  // namespace

void expand_node(SearchTree::StateNode& node, const SearchContext& ctx) {
  if (node.expanded) throw std::logic_error("expand_node: node already expanded");
  if (node.terminal()) throw TerminalState("expand_node: state is terminal");
  const AnnotationState& state = node.state;
  const ItemProbabilities& probs = ctx.probs();
  const SearchConfig& config = ctx.config();

  if (state.pending_incorrect()) {
    add_action(node, next_dont_give_up_guess(state, probs), ctx);
  } else {
    const std::size_t first = config.al_method == AlMethod::random ? random_unlabeled(state, config.seed)
                                                                   : most_uncertain_unlabeled(state, probs);
    add_action(node, make_guess({first}, probs), ctx);

    const std::size_t limit = std::min(config.max_n, state.unlabeled_count());
    std::vector<std::size_t> certain;
    certain.reserve(limit);
    for (std::size_t i : ctx.certainty_order()) {
      if (certain.size() == limit) break;
      if (!state.is_labeled(i)) certain.push_back(i);
    }
    // The size-1 action is picked by a different rule, so the stop test only
    // compares consecutive most-certain guesses.
    double previous = std::numeric_limits<double>::infinity();
    for (std::size_t n = 2; n <= limit; ++n) {
      const double cost =
          add_action(node, make_guess({certain.begin(), certain.begin() + static_cast<std::ptrdiff_t>(n)}, probs), ctx)
              .cost;
      if (cost > previous) break;
      previous = cost;
    }
  }
  node.cost = node.actions[node.best_action_index()]->cost;
  node.expanded = true;
}

void expand_node(SearchTree::StateNode& node, const ItemProbabilities& probs, const SearchConfig& config) {
  expand_node(node, SearchContext(probs, config));
}

void update_parents(SearchTree::StateNode& node) {
  SearchTree::StateNode* current = &node;
  while (current->parent != nullptr) {
    SearchTree::ActionNode& action = *current->parent;
    action.cost = 1.0 + action.p_correct * action.if_correct->cost +
                  (1.0 - action.p_correct) * action.if_incorrect->cost;
    SearchTree::StateNode& owner = *action.parent;
    const double before = owner.cost;
    owner.cost = owner.actions[owner.best_action_index()]->cost;
    if (owner.cost == before) break;
    current = &owner;
  }
}

Guess best_action(SearchTree& tree, const ItemProbabilities& probs, const SearchConfig& config) {
  config.validate();
  const SearchContext ctx(reduce_certainty(probs, config.effective_reduce_certainty()), config);
  tree.bind(ctx);
  if (tree.root().terminal()) throw TerminalState("best_action: every item is labeled");
  for (std::size_t i = 0; i < config.max_expansions; ++i) {
    SearchTree::StateNode* node = select_node(tree, config);
    if (node == nullptr) break;
    expand_node(*node, ctx);
    update_parents(*node);
  }
  if (!tree.root().expanded) {
    expand_node(tree.root(), ctx);
  }
  const auto& root = tree.root();
  return root.actions[root.best_action_index()]->guess;
}

SearchTree advance(SearchTree&& tree, const Guess& taken, bool correct, const SearchConfig& config) {
  SearchTree::StateNode& root = tree.root();
  auto it = std::find_if(root.actions.begin(), root.actions.end(),
                         [&](const auto& a) { return a->guess == taken; });
  if (it == root.actions.end()) throw InvalidGuess("advance: guess is not an action of the root");
  if (config.reset_tree) {
    return SearchTree(apply_answer(root.state, taken, correct));
  }
  SearchTree next(AnnotationState{});
  next.root_ = std::move(correct ? (*it)->if_correct : (*it)->if_incorrect);
  next.root_->parent = nullptr;
  next.bound_probs_ = std::move(tree.bound_probs_);
  return next;
}

}  // namespace qanno

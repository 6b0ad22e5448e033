#include "qanno/annotation_state.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>
#include <string>

#include "qanno/error.hpp"

namespace qanno {

AnnotationState::AnnotationState(std::size_t item_count)
    : labels_(item_count, -1), unlabeled_count_(item_count) {}

AnnotationState AnnotationState::from_parts(std::size_t item_count,
                                            const std::map<std::size_t, std::uint8_t>& labeled,
                                            std::optional<Guess> pending) {
  AnnotationState s(item_count);
  for (const auto& [i, label] : labeled) {
    if (i >= item_count) throw InvalidGuess("labeled index " + std::to_string(i) + " out of range");
    if (label > 1) throw RangeError("labels must be 0 or 1");
    s.set_label(i, label);
  }
  if (pending) {
    if (pending->size() < 2) throw InvalidGuess("a pending incorrect guess has at least two items");
    validate_guess(s, *pending);
    s.pending_ = std::move(pending);
  }
  return s;
}

std::optional<std::uint8_t> AnnotationState::label(std::size_t i) const {
  if (labels_[i] < 0) return std::nullopt;
  return static_cast<std::uint8_t>(labels_[i]);
}

std::map<std::size_t, std::uint8_t> AnnotationState::labeled() const {
  std::map<std::size_t, std::uint8_t> out;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] >= 0) out.emplace(i, static_cast<std::uint8_t>(labels_[i]));
  }
  return out;
}

std::vector<std::size_t> AnnotationState::unlabeled() const {
  std::vector<std::size_t> out;
  out.reserve(unlabeled_count_);
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] < 0) out.push_back(i);
  }
  return out;
}

void AnnotationState::set_label(std::size_t i, std::uint8_t label) {
  if (labels_[i] >= 0) throw InvalidGuess("item " + std::to_string(i) + " is already labeled");
  labels_[i] = static_cast<std::int8_t>(label);
  --unlabeled_count_;
}

void AnnotationState::commit(std::size_t i, std::uint8_t label) {
  if (i >= labels_.size()) throw InvalidGuess("item index " + std::to_string(i) + " out of range");
  if (label > 1) throw RangeError("labels must be 0 or 1");
  if (pending_ && std::find(pending_->indices.begin(), pending_->indices.end(), i) != pending_->indices.end()) {
    throw InvalidGuess("item " + std::to_string(i) + " belongs to the pending incorrect guess");
  }
  set_label(i, label);
}

void AnnotationState::resolve_pending_after(const std::vector<std::pair<std::size_t, std::uint8_t>>& commits) {
  if (!pending_) return;
  Guess remaining;
  for (std::size_t k = 0; k < pending_->size(); ++k) {
    const std::size_t idx = pending_->indices[k];
    const auto hit = std::find_if(commits.begin(), commits.end(), [idx](const auto& c) { return c.first == idx; });
    if (hit == commits.end()) {
      remaining.indices.push_back(idx);
      remaining.labels.push_back(pending_->labels[k]);
    } else if (hit->second != pending_->labels[k]) {
      // The wrong pseudo-label has been found; the constraint is satisfied.
      pending_.reset();
      return;
    }
  }
  pending_.reset();
  if (remaining.size() == 0) {
    throw std::logic_error("answers contradict the pending incorrect guess");
  }
  if (remaining.size() == 1) {
    set_label(remaining.indices[0], remaining.labels[0] ^ 1U);
    return;
  }
  pending_ = std::move(remaining);
}

void validate_guess(const AnnotationState& state, const Guess& g) {
  if (g.size() == 0) throw InvalidGuess("a guess needs at least one item");
  if (g.labels.size() != g.indices.size()) throw InvalidGuess("guess labels and indices differ in length");
  std::set<std::size_t> seen;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const std::size_t i = g.indices[k];
    if (i >= state.item_count()) throw InvalidGuess("guess index " + std::to_string(i) + " out of range");
    if (state.is_labeled(i)) throw InvalidGuess("guess references labeled item " + std::to_string(i));
    if (!seen.insert(i).second) throw InvalidGuess("guess repeats item " + std::to_string(i));
    if (g.labels[k] > 1) throw InvalidGuess("pseudo-labels must be 0 or 1");
  }
}

namespace {

double log_match(const ItemProbabilities& probs, const Guess& g) {
  double s = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) s += std::log(probs.match(g.indices[k], g.labels[k]));
  return s;
}

// 1 - exp(x) for x <= 0 without cancellation.
double one_minus_exp(double x) { return -std::expm1(x); }

}  // namespace

double guess_probability(const AnnotationState& state, const ItemProbabilities& probs, const Guess& g) {
  validate_guess(state, g);
  if (probs.size() != state.item_count()) throw LengthMismatch("probabilities do not match the state size");
  const double log_g = log_match(probs, g);
  const auto& pending = state.pending_incorrect();
  if (!pending) return std::exp(log_g);

  // P(g ok) - P(g ok and pending ok) = P(g ok) * (1 - P(pending \ g ok)) when
  // g agrees with the pending guess on shared items, and P(g ok) otherwise.
  double log_rest = 0.0;
  bool conflict = false;
  for (std::size_t k = 0; k < pending->size(); ++k) {
    const std::size_t idx = pending->indices[k];
    const auto it = std::find(g.indices.begin(), g.indices.end(), idx);
    if (it == g.indices.end()) {
      log_rest += std::log(probs.match(idx, pending->labels[k]));
    } else if (g.labels[static_cast<std::size_t>(it - g.indices.begin())] != pending->labels[k]) {
      conflict = true;
    }
  }
  const double denom = one_minus_exp(log_match(probs, *pending));
  const double numer = conflict ? std::exp(log_g) : std::exp(log_g) * one_minus_exp(log_rest);
  return std::clamp(numer / denom, 0.0, 1.0);
}

AnnotationState apply_answer(const AnnotationState& state, const Guess& g, bool correct) {
  validate_guess(state, g);
  AnnotationState next = state;
  if (correct || g.size() == 1) {
    std::vector<std::pair<std::size_t, std::uint8_t>> commits;
    commits.reserve(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
      const std::uint8_t label = correct ? g.labels[k] : static_cast<std::uint8_t>(g.labels[k] ^ 1U);
      next.set_label(g.indices[k], label);
      commits.emplace_back(g.indices[k], label);
    }
    next.resolve_pending_after(commits);
    return next;
  }
  if (state.pending_incorrect()) {
    const Guess& pending = *state.pending_incorrect();
    for (std::size_t k = 0; k < g.size(); ++k) {
      const auto it = std::find(pending.indices.begin(), pending.indices.end(), g.indices[k]);
      if (it == pending.indices.end() ||
          pending.labels[static_cast<std::size_t>(it - pending.indices.begin())] != g.labels[k]) {
        throw InvalidGuess("an incorrect guess must refine the pending incorrect guess");
      }
    }
  }
  next.pending_ = g;
  return next;
}

Guess next_dont_give_up_guess(const AnnotationState& state, const ItemProbabilities& probs) {
  const auto& pending = state.pending_incorrect();
  if (!pending) throw std::logic_error("no pending incorrect guess to refine");
  std::size_t drop = 0;
  for (std::size_t k = 1; k < pending->size(); ++k) {
    const double uk = std::abs(probs[pending->indices[k]] - 0.5);
    const double ud = std::abs(probs[pending->indices[drop]] - 0.5);
    if (uk < ud || (uk == ud && pending->indices[k] < pending->indices[drop])) drop = k;
  }
  Guess g;
  for (std::size_t k = 0; k < pending->size(); ++k) {
    if (k == drop) continue;
    g.indices.push_back(pending->indices[k]);
    g.labels.push_back(pending->labels[k]);
  }
  return g;
}

double pending_block_entropy(const Guess& pending, const ItemProbabilities& probs) {
  double block = 0.0;
  for (std::size_t i : pending.indices) block += binary_entropy(probs[i]);
  const double log_ok = log_match(probs, pending);  // natural log of p
  const double p = std::exp(log_ok);
  const double q = one_minus_exp(log_ok);
  // H = (H_g + p log2 p) / (1 - p) + log2(1 - p)
  return (block + p * log_ok / std::numbers::ln2) / q + std::log2(q);
}

double state_entropy(const AnnotationState& state, const ItemProbabilities& probs) {
  if (probs.size() != state.item_count()) throw LengthMismatch("probabilities do not match the state size");
  const auto& pending = state.pending_incorrect();
  double h = 0.0;
  for (std::size_t i = 0; i < state.item_count(); ++i) {
    if (state.is_labeled(i)) continue;
    if (pending && std::find(pending->indices.begin(), pending->indices.end(), i) != pending->indices.end()) {
      continue;
    }
    h += binary_entropy(probs[i]);
  }
  if (pending) h += pending_block_entropy(*pending, probs);
  return h;
}

double state_log_size(const AnnotationState& state) {
  const auto& pending = state.pending_incorrect();
  if (!pending) return static_cast<double>(state.unlabeled_count());
  const double k = static_cast<double>(pending->size());
  // log2(2^k - 1) = k + log2(1 - 2^-k)
  return static_cast<double>(state.unlabeled_count()) + std::log1p(-std::exp2(-k)) / std::numbers::ln2;
}

std::vector<ConsistentLabeling> enumerate_consistent_labelings(const AnnotationState& state,
                                                               const ItemProbabilities& probs) {
  const std::vector<std::size_t> free_items = state.unlabeled();
  if (free_items.size() > kMaxEnumeratedUnlabeled) {
    throw CapacityError("consistent-labeling enumeration limited to " + std::to_string(kMaxEnumeratedUnlabeled) +
                        " unlabeled items, got " + std::to_string(free_items.size()));
  }
  if (probs.size() != state.item_count()) throw LengthMismatch("probabilities do not match the state size");
  const auto& pending = state.pending_incorrect();
  std::vector<ConsistentLabeling> out;
  double total = 0.0;
  const std::uint64_t count = std::uint64_t{1} << free_items.size();
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    Labeling y = Labeling::from_mask(mask, free_items.size());
    if (pending) {
      bool all_match = true;
      for (std::size_t k = 0; k < pending->size() && all_match; ++k) {
        const auto pos = static_cast<std::size_t>(
            std::lower_bound(free_items.begin(), free_items.end(), pending->indices[k]) - free_items.begin());
        all_match = y[pos] == pending->labels[k];
      }
      if (all_match) continue;
    }
    double p = 1.0;
    for (std::size_t pos = 0; pos < free_items.size(); ++pos) p *= probs.match(free_items[pos], y[pos]);
    total += p;
    out.push_back({std::move(y), p});
  }
  for (auto& c : out) c.probability /= total;
  return out;
}

void to_json(nlohmann::json& j, const Guess& g) {
  j = nlohmann::json{{"indices", g.indices}, {"labels", g.labels}};
}

void from_json(const nlohmann::json& j, Guess& g) {
  j.at("indices").get_to(g.indices);
  j.at("labels").get_to(g.labels);
}

void to_json(nlohmann::json& j, const AnnotationState& s) {
  nlohmann::json labeled = nlohmann::json::array();
  for (const auto& [i, label] : s.labeled()) labeled.push_back({i, label});
  j = nlohmann::json{{"item_count", s.item_count()},
                     {"labeled", std::move(labeled)},
                     {"unlabeled", s.unlabeled()},
                     {"pending", s.pending_incorrect() ? nlohmann::json(*s.pending_incorrect()) : nlohmann::json()}};
}

void from_json(const nlohmann::json& j, AnnotationState& s) {
  const auto n = j.at("item_count").get<std::size_t>();
  std::map<std::size_t, std::uint8_t> labeled;
  for (const auto& entry : j.at("labeled")) {
    labeled.emplace(entry.at(0).get<std::size_t>(), entry.at(1).get<std::uint8_t>());
  }
  std::optional<Guess> pending;
  if (j.contains("pending") && !j.at("pending").is_null()) pending = j.at("pending").get<Guess>();
  s = AnnotationState::from_parts(n, labeled, std::move(pending));
}

}  // namespace qanno

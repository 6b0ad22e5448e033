#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include <json.hpp>

#include "qanno/label_model.hpp"

namespace qanno {

/// "Are all of these pseudo-labels correct?" over a set of item indices.
struct Guess {
  std::vector<std::size_t> indices;
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return indices.size(); }
  bool operator==(const Guess&) const = default;
};

/// Search state: labeled items, unlabeled items, and at most one pending
/// incorrect guess (a guess known to contain at least one wrong label).
///
/// A pending guess always has size >= 2 and only covers unlabeled items; a
/// size-1 incorrect guess resolves immediately to the flipped label.
class AnnotationState {
 public:
  AnnotationState() = default;
  explicit AnnotationState(std::size_t item_count);

  /// Validating constructor used by deserialization.
  static AnnotationState from_parts(std::size_t item_count, const std::map<std::size_t, std::uint8_t>& labeled,
                                    std::optional<Guess> pending);

  std::size_t item_count() const { return labels_.size(); }
  std::size_t labeled_count() const { return labels_.size() - unlabeled_count_; }
  std::size_t unlabeled_count() const { return unlabeled_count_; }
  bool is_terminal() const { return unlabeled_count_ == 0; }

  bool is_labeled(std::size_t i) const { return labels_[i] >= 0; }
  std::optional<std::uint8_t> label(std::size_t i) const;

  std::map<std::size_t, std::uint8_t> labeled() const;
  /// Unlabeled indices in ascending order (pending items included).
  std::vector<std::size_t> unlabeled() const;
  const std::optional<Guess>& pending_incorrect() const { return pending_; }

  /// Records a label obtained outside the questioning (e.g. a seed example).
  /// The item must be unlabeled and not part of the pending guess.
  void commit(std::size_t i, std::uint8_t label);

  bool operator==(const AnnotationState&) const = default;

 private:
  friend AnnotationState apply_answer(const AnnotationState&, const Guess&, bool);

  void set_label(std::size_t i, std::uint8_t label);
  void resolve_pending_after(const std::vector<std::pair<std::size_t, std::uint8_t>>& commits);

  std::vector<std::int8_t> labels_;  // -1 = unlabeled
  std::size_t unlabeled_count_ = 0;
  std::optional<Guess> pending_;
};

/// Throws InvalidGuess unless `g` is a well-formed guess over unlabeled items.
void validate_guess(const AnnotationState& state, const Guess& g);

/// P(every pseudo-label of g is right), conditioned on the pending incorrect
/// guess if there is one:
///   P(g ok | pending wrong) = [P(g ok) - P(g ok and pending ok)] / (1 - P(pending ok)).
double guess_probability(const AnnotationState& state, const ItemProbabilities& probs, const Guess& g);

/// Successor state after the annotator answers `g`.
///
///  - correct: g's labels are committed. If that leaves a single item of the
///    pending guess undecided, it must be the wrong one and is committed
///    flipped. A committed label that contradicts the pending guess clears it.
///  - incorrect, |g| == 1: the flipped label is committed, with the same
///    pending-guess bookkeeping as above.
///  - incorrect, |g| >= 2: g becomes the pending guess. With a pending guess
///    present, g must be a sub-guess of it (the old constraint is then
///    implied); anything else would need two pending guesses and throws.
AnnotationState apply_answer(const AnnotationState& state, const Guess& g, bool correct);

/// The pending guess with its most uncertain item (smallest |p - 0.5|, lowest
/// index on ties) removed. Throws std::logic_error without a pending guess.
Guess next_dont_give_up_guess(const AnnotationState& state, const ItemProbabilities& probs);

/// Entropy, in bits, of the labelings of a pending block conditioned on at
/// least one pseudo-label being wrong.
double pending_block_entropy(const Guess& pending, const ItemProbabilities& probs);

/// Entropy of the distribution over labelings consistent with the state.
double state_entropy(const AnnotationState& state, const ItemProbabilities& probs);

/// log2 of the number of labelings consistent with the state.
double state_log_size(const AnnotationState& state);

struct ConsistentLabeling {
  Labeling labeling;  // over state.unlabeled(), in that order
  double probability = 0.0;
};

inline constexpr std::size_t kMaxEnumeratedUnlabeled = 12;

/// Every labeling of the unlabeled items not excluded by the pending guess,
/// renormalized. Test oracle; throws CapacityError above 12 unlabeled items.
std::vector<ConsistentLabeling> enumerate_consistent_labelings(const AnnotationState& state,
                                                               const ItemProbabilities& probs);

void to_json(nlohmann::json& j, const Guess& g);
void from_json(const nlohmann::json& j, Guess& g);
void to_json(nlohmann::json& j, const AnnotationState& s);
void from_json(const nlohmann::json& j, AnnotationState& s);

}  // namespace qanno

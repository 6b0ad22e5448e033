#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace qanno {

/// Probabilities are kept inside [kProbEpsilon, 1 - kProbEpsilon] so every
/// entropy term stays finite.
inline constexpr double kProbEpsilon = 1e-6;

double clamp_probability(double p);

/// Binary entropy in bits.
double binary_entropy(double p);

/// Predictor output P(Y_i = 1 | x_i) for every item of a dataset.
///
/// Construction validates that every entry is a finite number in [0, 1] and
/// clamps it into [kProbEpsilon, 1 - kProbEpsilon]. Throws RangeError
/// otherwise, and std::invalid_argument for an empty vector.
class ItemProbabilities {
 public:
  ItemProbabilities() = default;
  explicit ItemProbabilities(std::vector<double> probs);

  std::size_t size() const { return probs_.size(); }
  bool empty() const { return probs_.empty(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> values() const { return probs_; }

  /// Probability that item i carries `label`.
  double match(std::size_t i, std::uint8_t label) const {
    return label != 0 ? probs_[i] : 1.0 - probs_[i];
  }
  /// Per-item most likely label; 0.5 maps to 1.
  std::uint8_t argmax_label(std::size_t i) const { return probs_[i] >= 0.5 ? 1 : 0; }

  bool operator==(const ItemProbabilities&) const = default;

 private:
  std::vector<double> probs_;
};

/// A full binary labeling of a dataset.
struct Labeling {
  std::vector<std::uint8_t> bits;

  Labeling() = default;
  explicit Labeling(std::vector<std::uint8_t> b);

  /// Bit i of `mask` becomes the label of item i.
  static Labeling from_mask(std::uint64_t mask, std::size_t n);
  std::uint64_t to_mask() const;

  std::size_t size() const { return bits.size(); }
  std::uint8_t operator[](std::size_t i) const { return bits[i]; }

  bool operator==(const Labeling&) const = default;
};

/// H(Y) in bits for independent items.
double joint_entropy(const ItemProbabilities& probs);

/// Product of per-item probabilities of `y`. Throws LengthMismatch.
double labeling_probability(const ItemProbabilities& probs, const Labeling& y);

struct RankedLabeling {
  Labeling labeling;
  double probability = 0.0;
};

inline constexpr std::size_t kMaxEnumeratedItems = 25;

/// The k most probable labelings in descending order of probability.
///
/// Best-first expansion over bit flips away from the per-item argmax labeling,
/// so only about k labelings are materialized. Equal probabilities are ordered
/// by ascending binary value of the labeling, item 0 being the most
/// significant bit. Throws CapacityError for more than kMaxEnumeratedItems
/// items and std::invalid_argument when k exceeds 2^N.
std::vector<RankedLabeling> enumerate_labelings_by_probability(const ItemProbabilities& probs,
                                                               std::size_t k);

/// Weighted average with 0.5: p -> (1 - alpha) p + alpha / 2, re-clamped.
ItemProbabilities reduce_certainty(const ItemProbabilities& probs, double alpha);

}  // namespace qanno

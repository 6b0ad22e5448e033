#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "qanno/label_model.hpp"
#include "qanno/predictors.hpp"

namespace qanno {

/// Seeded uniform/normal stream with a portable output sequence: uniforms
/// take the top 53 bits of mt19937_64, normals use Box-Muller.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();  // [0, 1)
  double normal();   // N(0, 1)
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

enum class Problem { a, b, c };

std::string to_string(Problem p);
Problem parse_problem(const std::string& s);

inline constexpr std::size_t kSyntheticSize = 10;

struct SyntheticInstance {
  Problem problem = Problem::a;
  std::uint64_t seed = 0;
  std::vector<Point2D> points;
  Labeling labels;
  ItemProbabilities probs;  // from the problem's designated predictor
  /// Problem (c): samples whose class was re-drawn at random.
  std::size_t noisy_label_count = 0;
};

/// Two unit-covariance blobs at (0,0) (label 0) and (2,2) (label 1), half of
/// the points each; probabilities are the exact Bayes posterior.
SyntheticInstance gen_problem_a(std::uint64_t seed, std::size_t size = kSyntheticSize);

/// Half of the points around each of (0,0) and (3,3) with covariance I/2; each label
/// drawn from the fixed sigmoid predictor, which also supplies the probabilities.
SyntheticInstance gen_problem_b(std::uint64_t seed, std::size_t size = kSyntheticSize);

/// Half of the points per class around -1 / +1 on the first axis, scaled by a random
/// per-class factor in (-1, 1); the second axis is N(0,1) noise. Each sample
/// has its class re-drawn uniformly with probability 0.2. Probabilities come
/// from a logistic model fit to this very sample.
SyntheticInstance gen_problem_c(std::uint64_t seed, std::size_t size = kSyntheticSize);

/// `size` is the total item count, split evenly between the two classes; it
/// must be even and positive (std::invalid_argument otherwise).
SyntheticInstance generate(Problem problem, std::uint64_t seed, std::size_t size = kSyntheticSize);

/// Writes <stem>.json (probability file with labels) and <stem>_points.csv.
void export_instance(const SyntheticInstance& inst, const std::filesystem::path& dir);

}  // namespace qanno

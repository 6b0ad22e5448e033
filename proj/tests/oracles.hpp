#pragma once
// Independent brute-force reference computations shared by unit and
// acceptance tests. Nothing here calls the library routine it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <utility>
#include <vector>

#include "qanno/annotation_state.hpp"
#include "qanno/label_model.hpp"

namespace oracle {

inline qanno::ItemProbabilities random_probs(std::mt19937_64& gen, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(n);
  for (double& x : p) {
    // Mix in near-certain values; they stress the clamping and the tails.
    const double r = u(gen);
    x = r < 0.1 ? 1e-4 * u(gen) : (r < 0.2 ? 1.0 - 1e-4 * u(gen) : u(gen));
  }
  return qanno::ItemProbabilities(std::move(p));
}

inline qanno::ItemProbabilities random_grid_probs(std::mt19937_64& gen, std::size_t n) {
  static constexpr double kGrid[] = {0.1, 0.25, 0.5, 0.75, 0.9};
  std::vector<double> p(n);
  for (double& x : p) x = kGrid[gen() % 5];
  return qanno::ItemProbabilities(std::move(p));
}

inline double item_prob(const qanno::ItemProbabilities& p, std::size_t i, int bit) {
  return bit ? p[i] : 1.0 - p[i];
}

/// P(labeling) for every mask, bit i of the mask being item i's label.
inline std::vector<double> explicit_distribution(const qanno::ItemProbabilities& p) {
  const std::size_t n = p.size();
  std::vector<double> out(std::size_t{1} << n);
  for (std::size_t m = 0; m < out.size(); ++m) {
    double prob = 1.0;
    for (std::size_t i = 0; i < n; ++i) prob *= item_prob(p, i, (m >> i) & 1);
    out[m] = prob;
  }
  return out;
}

inline double shannon_bits(const std::vector<double>& dist) {
  double h = 0.0;
  for (double x : dist) {
    if (x > 0.0) h -= x * std::log2(x);
  }
  return h;
}

/// Binary value with item 0 as the most significant bit.
inline std::uint64_t msb_first_value(std::uint64_t mask, std::size_t n) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < n; ++i) v = (v << 1) | ((mask >> i) & 1);
  return v;
}

/// All labelings sorted by probability (descending), ties by ascending binary
/// value with item 0 most significant. Probabilities are compared after
/// quantizing their logarithm so that mathematically equal products tie.
inline std::vector<std::pair<qanno::Labeling, double>> sorted_labelings(const qanno::ItemProbabilities& p) {
  const std::size_t n = p.size();
  const auto dist = explicit_distribution(p);
  std::vector<std::size_t> masks(dist.size());
  for (std::size_t m = 0; m < masks.size(); ++m) masks[m] = m;
  auto key = [&](std::size_t m) { return std::llround(std::log2(dist[m]) * 1e8); };
  std::sort(masks.begin(), masks.end(), [&](std::size_t a, std::size_t b) {
    const auto ka = key(a), kb = key(b);
    if (ka != kb) return ka > kb;
    return msb_first_value(a, n) < msb_first_value(b, n);
  });
  std::vector<std::pair<qanno::Labeling, double>> out;
  for (std::size_t m : masks) out.emplace_back(qanno::Labeling::from_mask(m, n), dist[m]);
  return out;
}

/// Optimal expected number of yes/no questions, straight from the recursion
/// cost(S) = 0 if |S| = 1, else 1 + min_A [P(A|S) cost(A) + P(S\A|S) cost(S\A)].
inline double optimal_questions(const std::vector<double>& probs) {
  const std::size_t m = probs.size();
  const std::uint32_t full = (1u << m) - 1;
  std::vector<double> mass(full + 1, 0.0), cost(full + 1, 0.0);
  for (std::uint32_t s = 1; s <= full; ++s) {
    for (std::size_t i = 0; i < m; ++i) {
      if (s >> i & 1) mass[s] += probs[i];
    }
  }
  for (std::uint32_t s = 1; s <= full; ++s) {
    if ((s & (s - 1)) == 0) continue;
    double best = INFINITY;
    for (std::uint32_t a = (s - 1) & s; a > 0; a = (a - 1) & s) {
      const std::uint32_t b = s ^ a;
      const double c = (mass[a] * cost[a] + mass[b] * cost[b]) / mass[s];
      best = std::min(best, c);
    }
    cost[s] = 1.0 + best;
  }
  return cost[full];
}

/// Expected Huffman codeword length as the sum of merged weights.
inline double huffman_cost(std::vector<double> probs) {
  if (probs.size() < 2) return 0.0;
  std::priority_queue<double, std::vector<double>, std::greater<>> q(probs.begin(), probs.end());
  double total = 0.0, sum = 0.0;
  for (double p : probs) sum += p;
  while (q.size() > 1) {
    const double a = q.top();
    q.pop();
    const double b = q.top();
    q.pop();
    total += a + b;
    q.push(a + b);
  }
  return total / sum;
}

/// Consistent-labeling view of a state, built from scratch.
struct StateView {
  std::vector<std::size_t> unlabeled;
  std::vector<std::uint64_t> masks;  // over `unlabeled`, bit k = unlabeled[k]
  std::vector<double> probs;         // renormalized
};

inline bool pending_all_match(const qanno::AnnotationState& s, const std::vector<std::size_t>& unlabeled,
                              std::uint64_t mask) {
  const auto& pending = s.pending_incorrect();
  if (!pending) return false;
  for (std::size_t k = 0; k < pending->size(); ++k) {
    const auto pos = std::find(unlabeled.begin(), unlabeled.end(), pending->indices[k]) - unlabeled.begin();
    if (static_cast<int>((mask >> pos) & 1) != pending->labels[k]) return false;
  }
  return true;
}

inline StateView consistent(const qanno::AnnotationState& s, const qanno::ItemProbabilities& p) {
  StateView v;
  for (std::size_t i = 0; i < s.item_count(); ++i) {
    if (!s.is_labeled(i)) v.unlabeled.push_back(i);
  }
  double total = 0.0;
  for (std::uint64_t m = 0; m < (std::uint64_t{1} << v.unlabeled.size()); ++m) {
    if (pending_all_match(s, v.unlabeled, m)) continue;
    double prob = 1.0;
    for (std::size_t k = 0; k < v.unlabeled.size(); ++k) prob *= item_prob(p, v.unlabeled[k], (m >> k) & 1);
    v.masks.push_back(m);
    v.probs.push_back(prob);
    total += prob;
  }
  for (double& x : v.probs) x /= total;
  return v;
}

inline double guess_mass(const StateView& v, const qanno::Guess& g) {
  double mass = 0.0;
  for (std::size_t j = 0; j < v.masks.size(); ++j) {
    bool ok = true;
    for (std::size_t k = 0; k < g.size() && ok; ++k) {
      const auto pos = std::find(v.unlabeled.begin(), v.unlabeled.end(), g.indices[k]) - v.unlabeled.begin();
      ok = static_cast<int>((v.masks[j] >> pos) & 1) == g.labels[k];
    }
    if (ok) mass += v.probs[j];
  }
  return mass;
}

/// Random reachable-looking state over n items: some labeled, optionally a
/// pending guess of size >= 2 over unlabeled items.
inline qanno::AnnotationState random_state(std::mt19937_64& gen, std::size_t n, bool with_pending) {
  std::map<std::size_t, std::uint8_t> labeled;
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < n; ++i) {
    if (gen() % 3 == 0) {
      labeled[i] = gen() % 2;
    } else {
      free.push_back(i);
    }
  }
  std::optional<qanno::Guess> pending;
  if (with_pending && free.size() >= 2) {
    std::shuffle(free.begin(), free.end(), gen);
    const std::size_t k = 2 + gen() % (free.size() - 1);
    qanno::Guess g;
    g.indices.assign(free.begin(), free.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(g.indices.begin(), g.indices.end());
    for (std::size_t j = 0; j < k; ++j) g.labels.push_back(gen() % 2);
    pending = g;
  }
  return qanno::AnnotationState::from_parts(n, labeled, pending);
}

/// Random guess over the unlabeled items of `s`, avoiding none.
inline qanno::Guess random_guess(std::mt19937_64& gen, const qanno::AnnotationState& s) {
  std::vector<std::size_t> free = s.unlabeled();
  std::shuffle(free.begin(), free.end(), gen);
  const std::size_t k = 1 + gen() % free.size();
  qanno::Guess g;
  g.indices.assign(free.begin(), free.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(g.indices.begin(), g.indices.end());
  for (std::size_t j = 0; j < k; ++j) g.labels.push_back(gen() % 2);
  return g;
}

}  // namespace oracle

#include "qanno/label_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <string>

#include "qanno/error.hpp"

namespace qanno {

double clamp_probability(double p) { return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon); }

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -(p * std::log2(p) + (1.0 - p) * std::log2(1.0 - p));
}

ItemProbabilities::ItemProbabilities(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw std::invalid_argument("ItemProbabilities: empty probability vector");
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    const double p = probs_[i];
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      throw RangeError("probability of item " + std::to_string(i) + " is " + std::to_string(p) +
                       ", outside [0, 1]");
    }
    probs_[i] = clamp_probability(p);
  }
}

Labeling::Labeling(std::vector<std::uint8_t> b) : bits(std::move(b)) {
  for (auto& v : bits) {
    if (v > 1) throw RangeError("labeling entries must be 0 or 1");
  }
}

Labeling Labeling::from_mask(std::uint64_t mask, std::size_t n) {
  Labeling y;
  y.bits.resize(n);
  for (std::size_t i = 0; i < n; ++i) y.bits[i] = static_cast<std::uint8_t>((mask >> i) & 1U);
  return y;
}

std::uint64_t Labeling::to_mask() const {
  if (bits.size() > 64) throw CapacityError("labeling longer than 64 items has no mask form");
  std::uint64_t mask = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] != 0) mask |= std::uint64_t{1} << i;
  }
  return mask;
}

double joint_entropy(const ItemProbabilities& probs) {
  double h = 0.0;
  for (double p : probs.values()) h += binary_entropy(p);
  return h;
}

double labeling_probability(const ItemProbabilities& probs, const Labeling& y) {
  if (y.size() != probs.size()) {
    throw LengthMismatch("labeling has " + std::to_string(y.size()) + " entries, expected " +
                         std::to_string(probs.size()));
  }
  double prob = 1.0;
  for (std::size_t i = 0; i < y.size(); ++i) prob *= probs.match(i, y[i]);
  return prob;
}

namespace {

// Reading order: item 0 is the most significant bit.
std::uint64_t binary_value(std::uint64_t mask, std::size_t n) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < n; ++i) v = (v << 1) | ((mask >> i) & 1U);
  return v;
}

struct FlipCandidate {
  double cost;           // log-probability lost relative to the argmax labeling
  std::size_t last;      // position (in cost order) of the last flipped item
  std::uint64_t flips;   // flipped items, as bits over the cost order
};

struct ByCost {
  bool operator()(const FlipCandidate& a, const FlipCandidate& b) const { return a.cost > b.cost; }
};

}  // namespace

std::vector<RankedLabeling> enumerate_labelings_by_probability(const ItemProbabilities& probs,
                                                               std::size_t k) {
  const std::size_t n = probs.size();
  if (n > kMaxEnumeratedItems) {
    throw CapacityError("enumerate_labelings_by_probability supports at most " +
                        std::to_string(kMaxEnumeratedItems) + " items, got " + std::to_string(n));
  }
  const std::uint64_t total = std::uint64_t{1} << n;
  if (k > total) throw std::invalid_argument("k exceeds the number of labelings 2^N");
  if (k == 0) return {};

  std::uint64_t top = 0;
  std::vector<double> flip_cost(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t best = probs.argmax_label(i);
    if (best) top |= std::uint64_t{1} << i;
    flip_cost[i] = std::log(probs.match(i, best)) - std::log(probs.match(i, best ^ 1U));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return flip_cost[a] < flip_cost[b]; });

  auto to_mask = [&](std::uint64_t flips) {
    std::uint64_t mask = top;
    for (std::size_t pos = 0; pos < n; ++pos) {
      if ((flips >> pos) & 1U) mask ^= std::uint64_t{1} << order[pos];
    }
    return mask;
  };

  // Every subset of flips is reached exactly once, in nondecreasing cost:
  // from a subset whose last flip sits at position j, either add j+1 or move
  // the flip at j to j+1.
  std::vector<std::pair<double, std::uint64_t>> found;  // (cost, mask)
  found.emplace_back(0.0, top);
  std::priority_queue<FlipCandidate, std::vector<FlipCandidate>, ByCost> heap;
  if (n > 0) heap.push({flip_cost[order[0]], 0, 1});

  // Keep popping past the k-th entry while costs tie with it, so that the tie
  // rule below sees the whole tied group.
  constexpr double kTieTol = 1e-12;
  while (!heap.empty()) {
    const FlipCandidate c = heap.top();
    if (found.size() >= k && c.cost > found[k - 1].first + kTieTol * (1.0 + found[k - 1].first)) break;
    heap.pop();
    found.emplace_back(c.cost, to_mask(c.flips));
    if (c.last + 1 < n) {
      const std::size_t next = c.last + 1;
      heap.push({c.cost + flip_cost[order[next]], next, c.flips | (std::uint64_t{1} << next)});
      heap.push({c.cost - flip_cost[order[c.last]] + flip_cost[order[next]], next,
                 (c.flips & ~(std::uint64_t{1} << c.last)) | (std::uint64_t{1} << next)});
    }
  }

  std::vector<RankedLabeling> out;
  out.reserve(found.size());
  for (const auto& [cost, mask] : found) {
    Labeling y = Labeling::from_mask(mask, n);
    const double p = labeling_probability(probs, y);
    out.push_back({std::move(y), p});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const RankedLabeling& a, const RankedLabeling& b) { return a.probability > b.probability; });
  for (std::size_t i = 0; i < out.size();) {
    std::size_t j = i + 1;
    while (j < out.size() && out[j].probability >= out[i].probability * (1.0 - kTieTol)) ++j;
    std::sort(out.begin() + static_cast<std::ptrdiff_t>(i), out.begin() + static_cast<std::ptrdiff_t>(j),
              [n](const RankedLabeling& a, const RankedLabeling& b) {
                return binary_value(a.labeling.to_mask(), n) < binary_value(b.labeling.to_mask(), n);
              });
    i = j;
  }
  out.resize(k);
  return out;
}

ItemProbabilities reduce_certainty(const ItemProbabilities& probs, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw RangeError("reduce_certainty factor must lie in [0, 1]");
  std::vector<double> out(probs.values().begin(), probs.values().end());
  for (double& p : out) p = (1.0 - alpha) * p + alpha * 0.5;
  return ItemProbabilities(std::move(out));
}

}  // namespace qanno

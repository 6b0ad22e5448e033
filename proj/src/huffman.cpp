#include "qanno/huffman.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "qanno/error.hpp"

namespace qanno {

std::size_t HuffmanTree::depth(NodeId id) const {
  std::size_t d = 0;
  while (nodes_[id].parent != kNone) {
    id = nodes_[id].parent;
    ++d;
  }
  return d;
}

std::size_t HuffmanTree::max_depth() const {
  std::vector<std::uint32_t> depths(nodes_.size(), 0);
  std::uint32_t best = 0;
  for (std::size_t id = nodes_.size(); id-- > 0;) {
    const Node& n = nodes_[id];
    if (n.left != kNone) {
      depths[n.left] = depths[id] + 1;
      depths[n.right] = depths[id] + 1;
    }
    best = std::max(best, depths[id]);
  }
  return best;
}

std::vector<std::uint32_t> HuffmanTree::leaves_under(NodeId id) const {
  std::vector<std::uint32_t> out;
  std::vector<NodeId> stack{id};
  while (!stack.empty()) {
    const NodeId cur = stack.back();
    stack.pop_back();
    if (is_leaf(cur)) {
      out.push_back(cur);
    } else {
      stack.push_back(nodes_[cur].left);
      stack.push_back(nodes_[cur].right);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> labeling_distribution(const ItemProbabilities& probs) {
  if (probs.size() > kMaxHuffmanItems) {
    throw CapacityError("labeling distribution limited to " + std::to_string(kMaxHuffmanItems) +
                        " items, got " + std::to_string(probs.size()));
  }
  std::vector<double> dist(std::size_t{1} << probs.size());
  dist[0] = 1.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const std::size_t half = std::size_t{1} << i;
    for (std::size_t m = 0; m < half; ++m) {
      dist[m | half] = dist[m] * probs[i];
      dist[m] *= 1.0 - probs[i];
    }
  }
  return dist;
}

HuffmanTree build_huffman_from_symbols(std::span<const double> symbol_probs) {
  const std::size_t m = symbol_probs.size();
  if (m == 0) throw std::invalid_argument("Huffman tree needs at least one symbol");
  if (m > (std::size_t{1} << 31)) throw CapacityError("too many symbols for a Huffman tree");

  HuffmanTree tree;
  tree.symbol_count_ = m;
  tree.nodes_.reserve(2 * m - 1);
  for (double p : symbol_probs) {
    if (!std::isfinite(p) || p < 0.0) throw RangeError("symbol probabilities must be finite and >= 0");
    tree.nodes_.push_back({std::max(p, kMinSymbolProbability)});
  }

  // Two-queue construction: sorted leaves, then internal nodes, whose
  // probabilities are created in nondecreasing order. Taking the leaf on ties
  // reproduces a FIFO priority queue.
  std::vector<HuffmanTree::NodeId> leaves(m);
  std::iota(leaves.begin(), leaves.end(), 0U);
  std::stable_sort(leaves.begin(), leaves.end(), [&](auto a, auto b) {
    return tree.nodes_[a].probability < tree.nodes_[b].probability;
  });
  std::size_t leaf_pos = 0;
  HuffmanTree::NodeId internal_pos = static_cast<HuffmanTree::NodeId>(m);

  auto take = [&]() -> HuffmanTree::NodeId {
    const bool have_leaf = leaf_pos < m;
    const bool have_internal = internal_pos < tree.nodes_.size();
    if (have_leaf && (!have_internal || tree.nodes_[leaves[leaf_pos]].probability <=
                                            tree.nodes_[internal_pos].probability)) {
      return leaves[leaf_pos++];
    }
    return internal_pos++;
  };

  for (std::size_t merges = 0; merges + 1 < m; ++merges) {
    const auto left = take();
    const auto right = take();
    const auto parent = static_cast<HuffmanTree::NodeId>(tree.nodes_.size());
    tree.nodes_.push_back({tree.nodes_[left].probability + tree.nodes_[right].probability, left, right});
    tree.nodes_[left].parent = parent;
    tree.nodes_[right].parent = parent;
  }
  return tree;
}

HuffmanTree build_huffman(const ItemProbabilities& probs) {
  if (probs.size() > kMaxHuffmanItems) {
    throw CapacityError("Huffman tree over labelings limited to N <= " + std::to_string(kMaxHuffmanItems) +
                        " items, got N = " + std::to_string(probs.size()));
  }
  const std::vector<double> dist = labeling_distribution(probs);
  HuffmanTree tree = build_huffman_from_symbols(dist);
  tree.item_count_ = probs.size();
  return tree;
}

double expected_questions(const HuffmanTree& tree) {
  std::vector<std::uint32_t> depths(tree.node_count(), 0);
  double total = 0.0;
  for (std::size_t id = tree.node_count(); id-- > 0;) {
    const auto& n = tree.node(static_cast<HuffmanTree::NodeId>(id));
    if (n.left != HuffmanTree::kNone) {
      depths[n.left] = depths[id] + 1;
      depths[n.right] = depths[id] + 1;
    } else {
      total += n.probability * depths[id];
    }
  }
  return total;
}

MembershipOracle symbol_oracle(std::uint32_t truth) {
  return [truth](std::span<const std::uint32_t> question) {
    return std::binary_search(question.begin(), question.end(), truth);
  };
}

DecodeResult decode_session(const HuffmanTree& tree, const MembershipOracle& oracle) {
  HuffmanTree::NodeId cur = tree.root();
  std::size_t asked = 0;
  while (!tree.is_leaf(cur)) {
    const auto& n = tree.node(cur);
    const std::vector<std::uint32_t> question = tree.leaves_under(n.right);
    cur = oracle(question) ? n.right : n.left;
    ++asked;
  }
  const std::uint32_t symbol = cur;
  if (!oracle(std::span<const std::uint32_t>(&symbol, 1))) {
    throw InconsistentOracle("oracle answers exclude every leaf of the Huffman tree");
  }
  return {symbol, tree.labeling_of(symbol), asked};
}

double optimal_expected_questions_dp(std::span<const double> symbol_probs) {
  const std::size_t m = symbol_probs.size();
  if (m == 0) throw std::invalid_argument("DP needs at least one symbol");
  if (m > kMaxDpSymbols) {
    throw CapacityError("exhaustive DP limited to " + std::to_string(kMaxDpSymbols) + " symbols, got " +
                        std::to_string(m));
  }
  const std::size_t full = (std::size_t{1} << m) - 1;
  std::vector<double> mass(full + 1, 0.0);
  for (std::size_t s = 1; s <= full; ++s) {
    const std::size_t low = s & (~s + 1);
    mass[s] = mass[s ^ low] + symbol_probs[static_cast<std::size_t>(std::countr_zero(low))];
  }
  // weighted[S] = P(S) * cost(S): each question asked at S is paid by all of S.
  std::vector<double> weighted(full + 1, 0.0);
  for (std::size_t s = 1; s <= full; ++s) {
    if ((s & (s - 1)) == 0) continue;
    const std::size_t low = s & (~s + 1);
    const std::size_t rest = s ^ low;
    double best = std::numeric_limits<double>::infinity();
    // Subsets A containing the lowest symbol; the complement covers the other half.
    for (std::size_t sub = rest;; sub = (sub - 1) & rest) {
      const std::size_t a = sub | low;
      if (a != s) best = std::min(best, weighted[a] + weighted[s ^ a]);
      if (sub == 0) break;
    }
    weighted[s] = mass[s] + best;
  }
  return mass[full] > 0.0 ? weighted[full] / mass[full] : 0.0;
}

}  // namespace qanno

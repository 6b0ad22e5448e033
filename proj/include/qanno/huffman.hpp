#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "qanno/label_model.hpp"

namespace qanno {

inline constexpr std::size_t kMaxHuffmanItems = 20;
inline constexpr std::size_t kMaxDpSymbols = 12;
// Leaf probabilities are flushed up to this value before building.
inline constexpr double kMinSymbolProbability = 1e-300;

/// Prefix tree over a finite symbol alphabet, built by repeatedly merging the
/// two parentless nodes of smallest probability.
///
/// Nodes [0, symbol_count) are the leaves, leaf s standing for symbol s. For
/// trees built over dataset labelings, symbol s is the labeling whose item i
/// has label bit i of s. Internal nodes follow in creation order, so a parent
/// always has a larger id than its children. Equal probabilities merge in
/// FIFO order (leaves first, then internal nodes by creation), and the second
/// node taken in a merge becomes the right child.
class HuffmanTree {
 public:
  using NodeId = std::uint32_t;
  static constexpr NodeId kNone = 0xFFFFFFFFu;

  struct Node {
    double probability = 0.0;
    NodeId left = kNone;
    NodeId right = kNone;
    NodeId parent = kNone;
  };

  std::size_t symbol_count() const { return symbol_count_; }
  std::size_t node_count() const { return nodes_.size(); }
  /// Number of dataset items for labeling trees, 0 for raw symbol trees.
  std::size_t item_count() const { return item_count_; }

  NodeId root() const { return static_cast<NodeId>(nodes_.size() - 1); }
  const Node& node(NodeId id) const { return nodes_[id]; }
  bool is_leaf(NodeId id) const { return id < symbol_count_; }

  std::size_t depth(NodeId id) const;
  std::size_t max_depth() const;

  /// Symbols (leaf ids) under `id`, ascending.
  std::vector<std::uint32_t> leaves_under(NodeId id) const;

  Labeling labeling_of(std::uint32_t symbol) const { return Labeling::from_mask(symbol, item_count_); }

 private:
  friend HuffmanTree build_huffman_from_symbols(std::span<const double> symbol_probs);
  friend HuffmanTree build_huffman(const ItemProbabilities& probs);

  std::vector<Node> nodes_;
  std::size_t symbol_count_ = 0;
  std::size_t item_count_ = 0;
};

/// Huffman tree over the 2^N labelings of `probs`. Throws CapacityError for N > 20.
HuffmanTree build_huffman(const ItemProbabilities& probs);

/// Huffman tree over an explicit symbol distribution (need not be normalized).
HuffmanTree build_huffman_from_symbols(std::span<const double> symbol_probs);

/// The probability distribution over all 2^N labelings, indexed by mask.
std::vector<double> labeling_distribution(const ItemProbabilities& probs);

/// Sum over leaves of probability times depth.
double expected_questions(const HuffmanTree& tree);

/// Answers "is the true symbol in this set?" for the given ascending symbol list.
using MembershipOracle = std::function<bool(std::span<const std::uint32_t> question)>;

/// Oracle answering consistently with one fixed symbol.
MembershipOracle symbol_oracle(std::uint32_t truth);

struct DecodeResult {
  std::uint32_t symbol = 0;
  Labeling labeling;
  std::size_t questions = 0;
};

/// Walks the tree from the root asking whether the truth lies under the right
/// child. After reaching a leaf the oracle is asked once more, outside the
/// question count, to confirm that leaf; a denial raises InconsistentOracle.
DecodeResult decode_session(const HuffmanTree& tree, const MembershipOracle& oracle);

/// Exact minimum expected number of yes/no questions over all strategies,
/// by memoized DP over symbol subsets. Test oracle only; at most 12 symbols.
double optimal_expected_questions_dp(std::span<const double> symbol_probs);

}  // namespace qanno

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "treesumm/util.hpp"

namespace treesumm {

enum class Nuclearity { kNucleus, kSatellite };

/// Binary RST node. Leaves carry a 0-based EDU index; internal nodes carry
/// two children, each tagged Nucleus or Satellite (NS, SN or NN — never SS).
struct TreeNode {
  int left = -1;
  int right = -1;
  Nuclearity left_nuc = Nuclearity::kNucleus;
  Nuclearity right_nuc = Nuclearity::kNucleus;
  int edu = -1;
  int parent = -1;
  int depth = 0;

  bool is_leaf() const { return left < 0; }
};

/// Immutable binary constituency tree over EDUs 0..NE-1 (left to right).
///
/// Text form: node := leaf | "(" pair " " node " " node ")" with
/// pair in {NS, SN, NN} and leaf := "e"<1-based index>.
class ConstituencyTree {
 public:
  ConstituencyTree() = default;

  /// Parses the bracket form; throws ParseError naming the byte position
  /// on malformed input, unknown nuclearity tags, or leaf indices that are
  /// not exactly 1..NE in order.
  static ConstituencyTree parse(std::string_view text);

  std::string serialize() const;

  int root() const { return root_; }
  const TreeNode& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t leaf_count() const { return leaf_count_; }

  /// Max root-to-leaf edge count; 0 for a single-leaf tree.
  int height() const { return height_; }

  /// Leaf node id for an EDU index.
  int leaf_of(std::size_t edu) const { return leaf_node_[edu]; }

  bool operator==(const ConstituencyTree& o) const;

 private:
  friend class TreeBuilder;
  std::vector<TreeNode> nodes_;
  std::vector<int> leaf_node_;
  int root_ = -1;
  int height_ = 0;
  std::size_t leaf_count_ = 0;

  void finalize();
};

/// Incremental construction used by the parser, the random generator and
/// tests. Leaf EDU indices are assigned left to right by make_*.
class TreeBuilder {
 public:
  int add_leaf(int edu);
  int add_internal(Nuclearity left_nuc, int left, Nuclearity right_nuc, int right);
  ConstituencyTree build(int root);

 private:
  std::vector<TreeNode> nodes_;
};

/// Uniformly random split positions and nuclearity pairs; leaves are the
/// contiguous EDUs 0..ne-1.
ConstituencyTree random_tree(Rng& rng, std::size_t ne);

}  // namespace treesumm

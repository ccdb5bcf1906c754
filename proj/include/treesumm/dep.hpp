#pragma once

#include <cstddef>
#include <vector>

#include "treesumm/document.hpp"
#include "treesumm/tree.hpp"

namespace treesumm {

/// head[i] is the EDU index of i's head; the single root has head[root] == root.
struct DependencyTree {
  std::vector<std::size_t> head;
  std::size_t root = 0;

  std::size_t size() const { return head.size(); }
};

/// Head EDU of a constituency node by nucleus percolation: a leaf is its own
/// head; an internal node takes the head of its leftmost Nucleus child
/// (NN resolves to the left child).
std::size_t constituency_head(const ConstituencyTree& tree, int node_id);

/// Percolation-based conversion: the tree head becomes the root; every other
/// EDU attaches to the head of the parent of its highest headed ancestor.
DependencyTree to_dependency(const ConstituencyTree& tree);

/// Re-attaches EDUs so every sentence has exactly one EDU whose head lies
/// outside the sentence (or is the root). Among a sentence's outward-headed
/// EDUs the one with minimal depth wins (leftmost on ties); the rest are
/// re-attached to it. Idempotent.
DependencyTree enforce_sentence_roots(const DependencyTree& dep,
                                      const std::vector<std::size_t>& sentence_of_edu);
DependencyTree enforce_sentence_roots(const DependencyTree& dep, const Document& doc);

/// Edge count from the root; depth[root] == 0.
std::vector<std::size_t> dependency_depths(const DependencyTree& dep);

/// Throws ValidationError unless the head relation is a single-rooted
/// acyclic tree reaching every node.
void validate_dependency_tree(const DependencyTree& dep);

}  // namespace treesumm

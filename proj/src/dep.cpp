#include "treesumm/dep.hpp"

#include <algorithm>

namespace treesumm {

std::size_t constituency_head(const ConstituencyTree& tree, int node_id) {
  const TreeNode* n = &tree.node(node_id);
  while (!n->is_leaf()) {
    const int next = n->left_nuc == Nuclearity::kNucleus ? n->left : n->right;
    n = &tree.node(next);
  }
  return static_cast<std::size_t>(n->edu);
}

namespace {

/// Percolated head EDU for every node, one post-order pass.
std::vector<std::size_t> node_heads(const ConstituencyTree& tree) {
  std::vector<std::size_t> head(tree.node_count());
  std::vector<std::pair<int, bool>> stack{{tree.root(), false}};
  while (!stack.empty()) {
    auto [id, expanded] = stack.back();
    stack.pop_back();
    const TreeNode& n = tree.node(id);
    if (n.is_leaf()) {
      head[static_cast<std::size_t>(id)] = static_cast<std::size_t>(n.edu);
    } else if (!expanded) {
      stack.push_back({id, true});
      stack.push_back({n.left, false});
      stack.push_back({n.right, false});
    } else {
      const int child = n.left_nuc == Nuclearity::kNucleus ? n.left : n.right;
      head[static_cast<std::size_t>(id)] = head[static_cast<std::size_t>(child)];
    }
  }
  return head;
}

}  // namespace

DependencyTree to_dependency(const ConstituencyTree& tree) {
  const std::size_t ne = tree.leaf_count();
  const std::vector<std::size_t> head_of = node_heads(tree);
  DependencyTree dep;
  dep.head.assign(ne, 0);
  dep.root = head_of[static_cast<std::size_t>(tree.root())];
  dep.head[dep.root] = dep.root;

  for (std::size_t e = 0; e < ne; ++e) {
    if (e == dep.root) continue;
    // Highest ancestor still headed by e; its parent's head is e's head.
    int v = tree.leaf_of(e);
    while (tree.node(v).parent >= 0 &&
           head_of[static_cast<std::size_t>(tree.node(v).parent)] == e) {
      v = tree.node(v).parent;
    }
    dep.head[e] = head_of[static_cast<std::size_t>(tree.node(v).parent)];
  }
  return dep;
}

std::vector<std::size_t> dependency_depths(const DependencyTree& dep) {
  std::vector<std::size_t> depth(dep.size(), 0);
  for (std::size_t i = 0; i < dep.size(); ++i) {
    std::size_t d = 0;
    std::size_t v = i;
    while (v != dep.root) {
      v = dep.head[v];
      ++d;
    }
    depth[i] = d;
  }
  return depth;
}

void validate_dependency_tree(const DependencyTree& dep) {
  const std::size_t n = dep.size();
  if (n == 0) throw ValidationError("dependency tree is empty");
  std::size_t self_loops = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (dep.head[i] >= n)
      throw ValidationError("dependency head out of range at EDU " + std::to_string(i));
    if (dep.head[i] == i) ++self_loops;
  }
  if (self_loops != 1 || dep.head[dep.root] != dep.root)
    throw ValidationError("dependency tree must have exactly one self-headed root");
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t steps = 0;
    std::size_t v = i;
    while (v != dep.root) {
      v = dep.head[v];
      if (++steps > n) throw ValidationError("dependency cycle through EDU " + std::to_string(i));
    }
  }
}

DependencyTree enforce_sentence_roots(const DependencyTree& dep,
                                      const std::vector<std::size_t>& sentence_of_edu) {
  DependencyTree out = dep;
  const std::size_t n = dep.size();
  const std::vector<std::size_t> depth = dependency_depths(dep);
  const std::size_t ns =
      n == 0 ? 0 : 1 + *std::max_element(sentence_of_edu.begin(), sentence_of_edu.end());

  for (std::size_t s = 0; s < ns; ++s) {
    // EDUs of s whose head is outside s, plus the global root if it is here.
    std::vector<std::size_t> ext;
    for (std::size_t e = 0; e < n; ++e) {
      if (sentence_of_edu[e] != s) continue;
      if (e == dep.root || sentence_of_edu[dep.head[e]] != s) ext.push_back(e);
    }
    if (ext.size() <= 1) continue;
    std::size_t h = ext[0];
    for (std::size_t e : ext) {
      if (depth[e] < depth[h]) h = e;  // ties keep the earlier (leftmost) EDU
    }
    for (std::size_t e : ext) {
      if (e != h) out.head[e] = h;
    }
  }
  return out;
}

DependencyTree enforce_sentence_roots(const DependencyTree& dep, const Document& doc) {
  return enforce_sentence_roots(dep, doc.sentence_of_edu());
}

}  // namespace treesumm

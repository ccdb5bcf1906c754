#include "treesumm/tree.hpp"

#include <algorithm>
#include <functional>

namespace treesumm {

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  ConstituencyTree run() {
    skip_ws();
    int root = parse_node();
    skip_ws();
    if (pos_ != text_.size()) fail("trailing input after tree");
    check_leaves();
    return builder_.build(root);
  }

 private:
  static constexpr std::size_t kMaxDepth = 4096;
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t depth_ = 0;
  TreeBuilder builder_;
  std::vector<std::pair<int, std::size_t>> leaves_;  // (1-based index, position)

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("tree parse error at position " + std::to_string(pos_) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  int parse_node() {
    if (peek() == '(') return parse_internal();
    return parse_leaf();
  }

  int parse_leaf() {
    std::size_t at = pos_;
    if (peek() != 'e') fail("expected leaf 'e<index>' or '('");
    ++pos_;
    std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ == start) fail("expected digits after 'e'");
    int idx = 0;
    for (std::size_t i = start; i < pos_; ++i) idx = idx * 10 + (text_[i] - '0');
    if (idx < 1) fail("leaf indices are 1-based");
    leaves_.emplace_back(idx, at);
    return builder_.add_leaf(idx - 1);
  }

  Nuclearity tag_to_nuc(char c) {
    if (c == 'N') return Nuclearity::kNucleus;
    if (c == 'S') return Nuclearity::kSatellite;
    fail(std::string("unknown nuclearity tag character '") + c + "'");
  }

  int parse_internal() {
    if (++depth_ > kMaxDepth) fail("tree nesting exceeds " + std::to_string(kMaxDepth));
    expect('(');
    if (pos_ + 2 > text_.size()) fail("truncated nuclearity pair");
    char a = text_[pos_], b = text_[pos_ + 1];
    if (a == 'S' && b == 'S') fail("unknown nuclearity pair 'SS'");
    Nuclearity left_nuc = tag_to_nuc(a);
    Nuclearity right_nuc = tag_to_nuc(b);
    pos_ += 2;
    if (peek() != ' ' && peek() != '\t') fail("expected whitespace after nuclearity pair");
    skip_ws();
    int left = parse_node();
    if (peek() != ' ' && peek() != '\t') fail("expected whitespace between children");
    skip_ws();
    int right = parse_node();
    skip_ws();
    expect(')');
    --depth_;
    return builder_.add_internal(left_nuc, left, right_nuc, right);
  }

  void check_leaves() {
    for (std::size_t i = 0; i < leaves_.size(); ++i) {
      if (leaves_[i].first != static_cast<int>(i) + 1) {
        throw ParseError("tree parse error at position " + std::to_string(leaves_[i].second) +
                         ": leaf e" + std::to_string(leaves_[i].first) + " out of order; expected e" +
                         std::to_string(i + 1) + " (leaves must be e1..eNE left to right)");
      }
    }
  }
};

}  // namespace

int TreeBuilder::add_leaf(int edu) {
  TreeNode n;
  n.edu = edu;
  nodes_.push_back(n);
  return static_cast<int>(nodes_.size()) - 1;
}

int TreeBuilder::add_internal(Nuclearity left_nuc, int left, Nuclearity right_nuc, int right) {
  TreeNode n;
  n.left = left;
  n.right = right;
  n.left_nuc = left_nuc;
  n.right_nuc = right_nuc;
  nodes_.push_back(n);
  int id = static_cast<int>(nodes_.size()) - 1;
  nodes_[static_cast<std::size_t>(left)].parent = id;
  nodes_[static_cast<std::size_t>(right)].parent = id;
  return id;
}

ConstituencyTree TreeBuilder::build(int root) {
  ConstituencyTree t;
  t.nodes_ = std::move(nodes_);
  t.root_ = root;
  t.finalize();
  return t;
}

void ConstituencyTree::finalize() {
  height_ = 0;
  leaf_count_ = 0;
  // Depths and leaf map via an explicit stack.
  std::vector<int> stack{root_};
  nodes_[static_cast<std::size_t>(root_)].depth = 0;
  nodes_[static_cast<std::size_t>(root_)].parent = -1;
  std::size_t max_edu = 0;
  for (const TreeNode& n : nodes_) {
    if (n.is_leaf()) max_edu = std::max(max_edu, static_cast<std::size_t>(n.edu));
  }
  leaf_node_.assign(max_edu + 1, -1);
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    TreeNode& n = nodes_[static_cast<std::size_t>(id)];
    if (n.is_leaf()) {
      ++leaf_count_;
      leaf_node_[static_cast<std::size_t>(n.edu)] = id;
      height_ = std::max(height_, n.depth);
    } else {
      nodes_[static_cast<std::size_t>(n.left)].depth = n.depth + 1;
      nodes_[static_cast<std::size_t>(n.right)].depth = n.depth + 1;
      stack.push_back(n.left);
      stack.push_back(n.right);
    }
  }
}

ConstituencyTree ConstituencyTree::parse(std::string_view text) { return Parser(text).run(); }

std::string ConstituencyTree::serialize() const {
  std::string out;
  std::function<void(int)> emit = [&](int id) {
    const TreeNode& n = node(id);
    if (n.is_leaf()) {
      out += 'e';
      out += std::to_string(n.edu + 1);
      return;
    }
    out += '(';
    out += n.left_nuc == Nuclearity::kNucleus ? 'N' : 'S';
    out += n.right_nuc == Nuclearity::kNucleus ? 'N' : 'S';
    out += ' ';
    emit(n.left);
    out += ' ';
    emit(n.right);
    out += ')';
  };
  emit(root_);
  return out;
}

bool ConstituencyTree::operator==(const ConstituencyTree& o) const {
  std::function<bool(int, int)> eq = [&](int a, int b) {
    const TreeNode& na = node(a);
    const TreeNode& nb = o.node(b);
    if (na.is_leaf() != nb.is_leaf()) return false;
    if (na.is_leaf()) return na.edu == nb.edu;
    return na.left_nuc == nb.left_nuc && na.right_nuc == nb.right_nuc && eq(na.left, nb.left) &&
           eq(na.right, nb.right);
  };
  if (root_ < 0 || o.root_ < 0) return root_ == o.root_;
  return eq(root_, o.root_);
}

ConstituencyTree random_tree(Rng& rng, std::size_t ne) {
  TreeBuilder b;
  std::function<int(std::size_t, std::size_t)> grow = [&](std::size_t lo, std::size_t hi) -> int {
    if (hi - lo == 1) return b.add_leaf(static_cast<int>(lo));
    std::size_t cut = lo + 1 + rng.below(hi - lo - 1);
    int left = grow(lo, cut);
    int right = grow(cut, hi);
    switch (rng.below(3)) {
      case 0:
        return b.add_internal(Nuclearity::kNucleus, left, Nuclearity::kSatellite, right);
      case 1:
        return b.add_internal(Nuclearity::kSatellite, left, Nuclearity::kNucleus, right);
      default:
        return b.add_internal(Nuclearity::kNucleus, left, Nuclearity::kNucleus, right);
    }
  };
  return b.build(grow(0, ne));
}

}  // namespace treesumm

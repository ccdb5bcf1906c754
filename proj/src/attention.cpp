#include "treesumm/attention.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "treesumm/util.hpp"

namespace treesumm {

namespace {
constexpr double kRowSumTolerance = 1e-9;
}

AttentionMatrix make_attention(Matrix m) {
  if (m.rows != m.cols) throw ValidationError("attention matrix must be square");
  for (std::size_t i = 0; i < m.rows; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) {
      if (m(i, j) < 0.0)
        throw ValidationError("attention entry (" + std::to_string(i) + "," + std::to_string(j) +
                              ") is negative");
      sum += m(i, j);
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance)
      throw ValidationError("attention row " + std::to_string(i) + " sums to " +
                            std::to_string(sum) + ", expected 1");
  }
  return AttentionMatrix{std::move(m)};
}

Matrix row_normalize(const Matrix& s) {
  Matrix a(s.rows, s.cols);
  for (std::size_t i = 0; i < s.rows; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < s.cols; ++j) {
      if (s(i, j) < 0.0)
        throw ValidationError("row_normalize: negative entry in row " + std::to_string(i));
      sum += s(i, j);
    }
    if (sum <= 0.0)
      throw ValidationError("row_normalize: row " + std::to_string(i) + " has no positive sum");
    for (std::size_t j = 0; j < s.cols; ++j) a(i, j) = s(i, j) / sum;
  }
  return a;
}

namespace {

/// Constituent id per EDU at a given level: the ancestor node at depth L,
/// or the leaf itself once the path has ended above L.
std::vector<int> constituents_at_level(const ConstituencyTree& tree, int level) {
  const std::size_t ne = tree.leaf_count();
  std::vector<int> current(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    int v = tree.leaf_of(e);
    // Walk up from the leaf to depth == level if the leaf is deeper.
    while (tree.node(v).depth > level) v = tree.node(v).parent;
    current[e] = v;
  }
  return current;
}

double constituent_weight(const ConstituencyTree& tree, int node_id, int level,
                          const TernaryWeights& w) {
  const TreeNode& n = tree.node(node_id);
  if (n.depth < level) return w.singleton;  // leaf persisted below its depth
  if (n.parent < 0) return w.root;
  const TreeNode& p = tree.node(n.parent);
  const Nuclearity nuc = p.left == node_id ? p.left_nuc : p.right_nuc;
  return nuc == Nuclearity::kNucleus ? w.nucleus : w.satellite;
}

}  // namespace

LevelDecomposition level_decomposition(const ConstituencyTree& tree, LevelMode mode,
                                       const TernaryWeights& w) {
  const std::size_t ne = tree.leaf_count();
  LevelDecomposition out;
  out.height = tree.height();
  out.levels.reserve(static_cast<std::size_t>(out.height) + 1);
  for (int level = 0; level <= out.height; ++level) {
    const std::vector<int> cons = constituents_at_level(tree, level);
    Matrix m(ne, ne);
    for (std::size_t i = 0; i < ne; ++i) {
      const double wi = mode == LevelMode::kBinary
                            ? 1.0
                            : constituent_weight(tree, cons[i], level, w);
      for (std::size_t j = 0; j < ne; ++j) {
        if (cons[i] == cons[j]) m(i, j) = wi;
      }
    }
    out.levels.push_back(std::move(m));
  }
  return out;
}

Matrix level_sum(const ConstituencyTree& tree, LevelMode mode, const TernaryWeights& w) {
  LevelDecomposition dec = level_decomposition(tree, mode, w);
  Matrix s(tree.leaf_count(), tree.leaf_count());
  for (const Matrix& m : dec.levels) add_inplace(s, m);
  return s;
}

AttentionMatrix dep_attention(const DependencyTree& dep) {
  Matrix a(dep.size(), dep.size());
  for (std::size_t i = 0; i < dep.size(); ++i) a(i, dep.head[i]) = 1.0;
  return make_attention(std::move(a));
}

AttentionMatrix ctree_attention(const ConstituencyTree& tree) {
  return make_attention(row_normalize(level_sum(tree, LevelMode::kBinary)));
}

AttentionMatrix ctree_nuc_attention(const ConstituencyTree& tree, const TernaryWeights& w) {
  return make_attention(row_normalize(level_sum(tree, LevelMode::kTernary, w)));
}

Matrix project_to_sentences_raw(const AttentionMatrix& ae, const SentenceMap& map) {
  if (ae.n() != map.ne)
    throw ValidationError("sentence projection: attention is " + std::to_string(ae.n()) +
                          "x" + std::to_string(ae.n()) + " but the map covers " +
                          std::to_string(map.ne) + " EDUs");
  return matmul_nt(matmul(map.indicator, ae.values), map.indicator);
}

AttentionMatrix project_to_sentences(const AttentionMatrix& ae, const SentenceMap& map) {
  return make_attention(row_normalize(project_to_sentences_raw(ae, map)));
}

AttentionMatrix identity_attention(std::size_t n) {
  if (n == 0) throw ValidationError("attention side length must be positive");
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) a(i, i) = 1.0;
  return AttentionMatrix{std::move(a)};
}

AttentionMatrix fixed_random_attention(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ValidationError("attention side length must be positive");
  Rng rng(seed);
  Matrix a(n, n);
  for (double& v : a.data) v = rng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    double* row = a.row(i);
    double mx = row[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
  }
  return make_attention(std::move(a));
}

void write_attention_tsv(std::ostream& out, const AttentionMatrix& a, std::string_view kind,
                         std::string_view doc_id) {
  out << "# n=" << a.n() << " kind=" << kind << " doc=" << doc_id << '\n';
  char buf[40];
  for (std::size_t i = 0; i < a.n(); ++i) {
    for (std::size_t j = 0; j < a.n(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", a(i, j));
      if (j) out << '\t';
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace treesumm

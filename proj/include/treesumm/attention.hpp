#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>

#include "treesumm/dep.hpp"
#include "treesumm/document.hpp"
#include "treesumm/matrix.hpp"
#include "treesumm/tree.hpp"

namespace treesumm {

/// Square row-stochastic matrix: entries >= 0, every row sums to 1 within
/// 1e-9. Construct via make_attention or the builders below.
struct AttentionMatrix {
  Matrix values;

  std::size_t n() const { return values.rows; }
  double operator()(std::size_t i, std::size_t j) const { return values(i, j); }
};

/// Validates and wraps; throws ValidationError on a negative entry or a row
/// sum off by more than 1e-9.
AttentionMatrix make_attention(Matrix m);

/// A[i][j] = S[i][j] / sum_j S[i][j]. Throws on a negative entry or a row
/// whose sum is not positive.
Matrix row_normalize(const Matrix& s);

enum class LevelMode { kBinary, kTernary };

/// Co-membership weights for the ternary level matrices. Nucleus/Satellite
/// follow the hard-coded 2/1 trade-off; the root constituent participates in
/// no relation and the persisted singleton is a unit alone with itself, so
/// both get their own knob.
struct TernaryWeights {
  double nucleus = 2.0;
  double satellite = 1.0;
  double root = 1.0;
  double singleton = 2.0;
};

/// One co-membership matrix per level 0..H. At level L units are grouped by
/// their ancestor constituent at depth L; a leaf shallower than L persists
/// as a singleton.
struct LevelDecomposition {
  int height = 0;
  std::vector<Matrix> levels;
};

LevelDecomposition level_decomposition(const ConstituencyTree& tree, LevelMode mode,
                                       const TernaryWeights& w = {});

/// Sum of the level matrices (the unnormalized S).
Matrix level_sum(const ConstituencyTree& tree, LevelMode mode, const TernaryWeights& w = {});

/// One-hot rows pointing at each EDU's head; the root attends to itself.
AttentionMatrix dep_attention(const DependencyTree& dep);

/// Structure-only tree attention: row-normalized sum of binary level
/// matrices. Equivalently S[i][j] = depth(LCA(i,j)) + 1 off the diagonal
/// and H + 1 on it.
AttentionMatrix ctree_attention(const ConstituencyTree& tree);

/// Structure + nuclearity: row-normalized sum of ternary level matrices.
AttentionMatrix ctree_nuc_attention(const ConstituencyTree& tree, const TernaryWeights& w = {});

/// Sentence-level projection: row_normalize(I * Ae * I^T).
AttentionMatrix project_to_sentences(const AttentionMatrix& ae, const SentenceMap& map);

/// Raw I * Ae * I^T before normalization (rows sum to the sentence's EDU count).
Matrix project_to_sentences_raw(const AttentionMatrix& ae, const SentenceMap& map);

AttentionMatrix identity_attention(std::size_t n);

/// Row-wise softmax of seeded i.i.d. standard-normal logits; deterministic
/// for a given (n, seed).
AttentionMatrix fixed_random_attention(std::size_t n, std::uint64_t seed);

/// Tab-separated rows at 17 significant digits under a
/// "# n=<n> kind=<kind> doc=<id>" header.
void write_attention_tsv(std::ostream& out, const AttentionMatrix& a, std::string_view kind,
                         std::string_view doc_id);

}  // namespace treesumm

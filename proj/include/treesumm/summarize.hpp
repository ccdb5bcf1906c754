#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "treesumm/dep.hpp"
#include "treesumm/document.hpp"
#include "treesumm/encoder.hpp"
#include "treesumm/train.hpp"

namespace treesumm {

struct RougeTriple {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct RougeScore {
  RougeTriple r1, r2, rl;
};

using TokenSeq = std::vector<std::string>;

/// ROUGE-1/2 by clipped n-gram overlap (n-grams never cross sequence
/// boundaries) and ROUGE-L by sentence-level LCS with union aggregation over
/// reference sequences. Empty candidate or reference scores all zeros.
RougeScore rouge(const std::vector<TokenSeq>& candidate, const std::vector<TokenSeq>& reference);

/// Tokenized unit texts for a set of unit indices, in document order.
std::vector<TokenSeq> unit_token_seqs(const Document& doc, UnitLevel level,
                                      const std::vector<std::size_t>& indices);
std::vector<TokenSeq> reference_token_seqs(const Document& doc);

/// ROUGE of the given selection against the document reference.
RougeScore rouge_of_selection(const Document& doc, UnitLevel level,
                              const std::vector<std::size_t>& selected);

/// Greedy oracle: repeatedly add the unit with the largest strictly positive
/// gain in mean(R1 recall, R2 recall) against the reference; earliest unit
/// wins ties; stops at unit_cap. Returns one 0/1 label per unit.
std::vector<int> oracle_labels(const Document& doc, UnitLevel level, std::size_t unit_cap);

/// Default selection cap: 6 EDUs or 3 sentences.
std::size_t default_unit_cap(UnitLevel level);

/// Indices of the k largest scores (smaller index wins ties), ascending.
std::vector<std::size_t> select_top_k(const std::vector<double>& scores, std::size_t k);

/// Closure of `selected` under within-sentence dependency heads, ascending.
std::vector<std::size_t> dependency_restriction(const std::vector<std::size_t>& selected,
                                                const DependencyTree& dep,
                                                const std::vector<std::size_t>& sentence_of_edu);

/// First min(k, units) indices.
std::vector<std::size_t> lead_baseline(const Document& doc, UnitLevel level, std::size_t k);

struct DocEval {
  std::string doc_id;
  RougeScore score;
  std::vector<std::size_t> selected;
};

struct EvalResult {
  std::vector<DocEval> docs;
  RougeScore mean;
};

RougeScore mean_rouge(const std::vector<DocEval>& docs);

/// Scores every document with the model, selects top-k units, optionally
/// applies the dependency restriction (EDU level only), and reports ROUGE
/// against the references. Parallel per document, deterministic output.
EvalResult evaluate(const Checkpoint& ckpt, const std::vector<Document>& corpus, UnitLevel level,
                    std::size_t k, bool restrict, int threads,
                    const ExternalVectors* ext = nullptr);

/// Same reporting for the Lead baseline.
EvalResult evaluate_lead(const std::vector<Document>& corpus, UnitLevel level, std::size_t k);

/// Same reporting for the stored oracle labels (labels must match `level`).
EvalResult evaluate_oracle(const std::vector<Document>& corpus, UnitLevel level);

/// doc_id,r1_f,r2_f,rl_f,selected_indices (indices space-separated).
void write_eval_csv(std::ostream& out, const EvalResult& result);
/// Corpus means as a JSON object.
std::string eval_summary_json(const EvalResult& result, UnitLevel level, std::size_t k);

}  // namespace treesumm

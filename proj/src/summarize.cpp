#include "treesumm/summarize.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>

#include "treesumm/util.hpp"

namespace treesumm {

namespace {

double f1_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

using NgramCounts = std::map<std::string, std::size_t>;

NgramCounts ngram_counts(const std::vector<TokenSeq>& seqs, std::size_t n, std::size_t& total) {
  NgramCounts counts;
  total = 0;
  for (const TokenSeq& seq : seqs) {
    if (seq.size() < n) continue;
    for (std::size_t i = 0; i + n <= seq.size(); ++i) {
      std::string key = seq[i];
      for (std::size_t j = 1; j < n; ++j) {
        key += '\x1f';
        key += seq[i + j];
      }
      ++counts[key];
      ++total;
    }
  }
  return counts;
}

RougeTriple ngram_overlap(const std::vector<TokenSeq>& cand, const std::vector<TokenSeq>& ref,
                          std::size_t n) {
  std::size_t cand_total = 0, ref_total = 0;
  NgramCounts cc = ngram_counts(cand, n, cand_total);
  NgramCounts rc = ngram_counts(ref, n, ref_total);
  if (cand_total == 0 || ref_total == 0) return {};
  std::size_t matched = 0;
  for (const auto& [gram, count] : rc) {
    auto it = cc.find(gram);
    if (it != cc.end()) matched += std::min(count, it->second);
  }
  RougeTriple t;
  t.precision = static_cast<double>(matched) / static_cast<double>(cand_total);
  t.recall = static_cast<double>(matched) / static_cast<double>(ref_total);
  t.f1 = f1_of(t.precision, t.recall);
  return t;
}

/// Positions of one LCS alignment inside `ref`.
void mark_lcs_positions(const TokenSeq& ref, const TokenSeq& cand, std::vector<char>& hit) {
  const std::size_t n = ref.size(), m = cand.size();
  if (n == 0 || m == 0) return;
  std::vector<std::vector<std::uint32_t>> dp(n + 1, std::vector<std::uint32_t>(m + 1, 0));
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      dp[i][j] = ref[i - 1] == cand[j - 1] ? dp[i - 1][j - 1] + 1
                                           : std::max(dp[i - 1][j], dp[i][j - 1]);
  std::size_t i = n, j = m;
  while (i > 0 && j > 0) {
    if (ref[i - 1] == cand[j - 1] && dp[i][j] == dp[i - 1][j - 1] + 1) {
      hit[i - 1] = 1;
      --i;
      --j;
    } else if (dp[i - 1][j] >= dp[i][j - 1]) {
      --i;
    } else {
      --j;
    }
  }
}

RougeTriple lcs_union(const std::vector<TokenSeq>& cand, const std::vector<TokenSeq>& ref) {
  std::size_t cand_total = 0, ref_total = 0;
  for (const TokenSeq& s : cand) cand_total += s.size();
  for (const TokenSeq& s : ref) ref_total += s.size();
  if (cand_total == 0 || ref_total == 0) return {};
  std::size_t matched = 0;
  for (const TokenSeq& r : ref) {
    std::vector<char> hit(r.size(), 0);
    for (const TokenSeq& c : cand) mark_lcs_positions(r, c, hit);
    for (char h : hit) matched += h;
  }
  RougeTriple t;
  t.precision = static_cast<double>(matched) / static_cast<double>(cand_total);
  t.recall = static_cast<double>(matched) / static_cast<double>(ref_total);
  t.f1 = f1_of(t.precision, t.recall);
  return t;
}

}  // namespace

RougeScore rouge(const std::vector<TokenSeq>& candidate, const std::vector<TokenSeq>& reference) {
  RougeScore s;
  s.r1 = ngram_overlap(candidate, reference, 1);
  s.r2 = ngram_overlap(candidate, reference, 2);
  s.rl = lcs_union(candidate, reference);
  return s;
}

std::vector<TokenSeq> unit_token_seqs(const Document& doc, UnitLevel level,
                                      const std::vector<std::size_t>& indices) {
  std::vector<TokenSeq> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(tokenize_lower(doc.unit_text(level, i)));
  return out;
}

std::vector<TokenSeq> reference_token_seqs(const Document& doc) {
  std::vector<TokenSeq> out;
  out.reserve(doc.reference.size());
  for (const std::string& s : doc.reference) out.push_back(tokenize_lower(s));
  return out;
}

RougeScore rouge_of_selection(const Document& doc, UnitLevel level,
                              const std::vector<std::size_t>& selected) {
  std::vector<std::size_t> sorted = selected;
  std::sort(sorted.begin(), sorted.end());
  return rouge(unit_token_seqs(doc, level, sorted), reference_token_seqs(doc));
}

std::size_t default_unit_cap(UnitLevel level) { return level == UnitLevel::kEdu ? 6 : 3; }

std::vector<int> oracle_labels(const Document& doc, UnitLevel level, std::size_t unit_cap) {
  const std::size_t n = doc.unit_count(level);
  const std::vector<TokenSeq> ref = reference_token_seqs(doc);
  std::vector<TokenSeq> units;
  units.reserve(n);
  for (std::size_t i = 0; i < n; ++i) units.push_back(tokenize_lower(doc.unit_text(level, i)));

  auto objective = [&](const std::vector<std::size_t>& picked) {
    std::vector<TokenSeq> cand;
    cand.reserve(picked.size());
    for (std::size_t i : picked) cand.push_back(units[i]);
    const RougeTriple r1 = ngram_overlap(cand, ref, 1);
    const RougeTriple r2 = ngram_overlap(cand, ref, 2);
    return 0.5 * (r1.recall + r2.recall);
  };

  std::vector<int> labels(n, 0);
  std::vector<std::size_t> picked;
  double current = 0.0;
  while (picked.size() < unit_cap) {
    double best_gain = 0.0;
    std::size_t best = n;
    for (std::size_t u = 0; u < n; ++u) {
      if (labels[u]) continue;
      std::vector<std::size_t> trial = picked;
      trial.insert(std::lower_bound(trial.begin(), trial.end(), u), u);
      const double gain = objective(trial) - current;
      if (gain > best_gain) {  // strict: earliest unit wins ties
        best_gain = gain;
        best = u;
      }
    }
    if (best == n) break;
    labels[best] = 1;
    picked.insert(std::lower_bound(picked.begin(), picked.end(), best), best);
    current += best_gain;
  }
  return labels;
}

std::vector<std::size_t> select_top_k(const std::vector<double>& scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  if (idx.size() > k) idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<std::size_t> dependency_restriction(const std::vector<std::size_t>& selected,
                                                const DependencyTree& dep,
                                                const std::vector<std::size_t>& sentence_of_edu) {
  std::set<std::size_t> closed(selected.begin(), selected.end());
  std::vector<std::size_t> work(selected.begin(), selected.end());
  while (!work.empty()) {
    const std::size_t e = work.back();
    work.pop_back();
    const std::size_t h = dep.head[e];
    if (h == e || sentence_of_edu[h] != sentence_of_edu[e]) continue;
    if (closed.insert(h).second) work.push_back(h);
  }
  return std::vector<std::size_t>(closed.begin(), closed.end());
}

std::vector<std::size_t> lead_baseline(const Document& doc, UnitLevel level, std::size_t k) {
  const std::size_t n = std::min(k, doc.unit_count(level));
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i;
  return out;
}

RougeScore mean_rouge(const std::vector<DocEval>& docs) {
  RougeScore mean;
  if (docs.empty()) return mean;
  auto acc = [&](RougeTriple RougeScore::* metric) {
    RougeTriple t;
    for (const DocEval& d : docs) {
      t.precision += (d.score.*metric).precision;
      t.recall += (d.score.*metric).recall;
      t.f1 += (d.score.*metric).f1;
    }
    const double n = static_cast<double>(docs.size());
    t.precision /= n;
    t.recall /= n;
    t.f1 /= n;
    return t;
  };
  mean.r1 = acc(&RougeScore::r1);
  mean.r2 = acc(&RougeScore::r2);
  mean.rl = acc(&RougeScore::rl);
  return mean;
}

EvalResult evaluate(const Checkpoint& ckpt, const std::vector<Document>& corpus, UnitLevel level,
                    std::size_t k, bool restrict, int threads, const ExternalVectors* ext) {
  if (restrict && level != UnitLevel::kEdu)
    throw Error("dependency restriction applies to EDU-level summaries only");
  const EncoderConfig& cfg = ckpt.model.cfg;
  std::vector<PreparedDoc> prepared =
      prepare_corpus(corpus, cfg, ckpt.embedder, level, /*require_labels=*/false, threads, ext);

  EvalResult result;
  result.docs.resize(corpus.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(corpus.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const Document& doc = corpus[static_cast<std::size_t>(i)];
      const PreparedDoc& p = prepared[static_cast<std::size_t>(i)];
      const AttentionMatrix* fixed = p.fixed_a.n() > 0 ? &p.fixed_a : nullptr;
      std::vector<double> scores = encoder_forward(ckpt.model, p.emb, fixed, p.units);
      scores.resize(p.units);
      std::vector<std::size_t> selected = select_top_k(scores, k);
      if (restrict) {
        const DependencyTree dep = enforce_sentence_roots(to_dependency(doc.tree), doc);
        selected = dependency_restriction(selected, dep, doc.sentence_of_edu());
      }
      DocEval& de = result.docs[static_cast<std::size_t>(i)];
      de.doc_id = doc.id;
      de.selected = selected;
      de.score = rouge_of_selection(doc, level, selected);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  result.mean = mean_rouge(result.docs);
  return result;
}

EvalResult evaluate_lead(const std::vector<Document>& corpus, UnitLevel level, std::size_t k) {
  EvalResult result;
  result.docs.reserve(corpus.size());
  for (const Document& doc : corpus) {
    DocEval de;
    de.doc_id = doc.id;
    de.selected = lead_baseline(doc, level, k);
    de.score = rouge_of_selection(doc, level, de.selected);
    result.docs.push_back(std::move(de));
  }
  result.mean = mean_rouge(result.docs);
  return result;
}

EvalResult evaluate_oracle(const std::vector<Document>& corpus, UnitLevel level) {
  EvalResult result;
  result.docs.reserve(corpus.size());
  for (const Document& doc : corpus) {
    if (!doc.labels || doc.labels->size() != doc.unit_count(level))
      throw Error("document '" + doc.id + "' has no labels for level " + to_string(level));
    DocEval de;
    de.doc_id = doc.id;
    for (std::size_t i = 0; i < doc.labels->size(); ++i)
      if ((*doc.labels)[i]) de.selected.push_back(i);
    de.score = rouge_of_selection(doc, level, de.selected);
    result.docs.push_back(std::move(de));
  }
  result.mean = mean_rouge(result.docs);
  return result;
}

void write_eval_csv(std::ostream& out, const EvalResult& result) {
  out << "doc_id,r1_f,r2_f,rl_f,selected_indices\n";
  char buf[32];
  for (const DocEval& d : result.docs) {
    out << d.doc_id;
    for (double v : {d.score.r1.f1, d.score.r2.f1, d.score.rl.f1}) {
      std::snprintf(buf, sizeof(buf), "%.6f", v);
      out << ',' << buf;
    }
    out << ',';
    for (std::size_t i = 0; i < d.selected.size(); ++i) {
      if (i) out << ' ';
      out << d.selected[i];
    }
    out << '\n';
  }
}

std::string eval_summary_json(const EvalResult& result, UnitLevel level, std::size_t k) {
  auto triple = [](const RougeTriple& t) {
    return nlohmann::json{{"precision", t.precision}, {"recall", t.recall}, {"f1", t.f1}};
  };
  nlohmann::json j;
  j["docs"] = result.docs.size();
  j["level"] = to_string(level);
  j["k"] = k;
  j["rouge1"] = triple(result.mean.r1);
  j["rouge2"] = triple(result.mean.r2);
  j["rougeL"] = triple(result.mean.rl);
  return j.dump();
}

}  // namespace treesumm

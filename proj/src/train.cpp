#include "treesumm/train.hpp"

#include <algorithm>
#include <cmath>

#include "treesumm/attention.hpp"
#include "treesumm/dep.hpp"
#include "treesumm/util.hpp"

namespace treesumm {

double noam_lr(std::size_t step, const TrainConfig& cfg, std::size_t d_model) {
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(cfg.warmup_steps);
  return cfg.lr_factor / std::sqrt(static_cast<double>(d_model)) *
         std::min(1.0 / std::sqrt(s), s / (w * std::sqrt(w)));
}

double bce_loss(const std::vector<double>& scores, const std::vector<int>& labels,
                std::size_t valid) {
  double total = 0.0;
  for (std::size_t i = 0; i < valid; ++i) {
    const double p = std::clamp(scores[i], 1e-12, 1.0 - 1e-12);
    total += labels[i] ? -std::log(p) : -std::log(1.0 - p);
  }
  return total / static_cast<double>(valid);
}

AttentionMatrix fixed_matrix_for(const Document& doc, AttentionKind kind, UnitLevel level) {
  AttentionMatrix edu_level;
  switch (kind) {
    case AttentionKind::kTreeDep:
      edu_level = dep_attention(enforce_sentence_roots(to_dependency(doc.tree), doc));
      break;
    case AttentionKind::kTreeC:
      edu_level = ctree_attention(doc.tree);
      break;
    case AttentionKind::kTreeCNuc:
      edu_level = ctree_nuc_attention(doc.tree);
      break;
    default:
      return AttentionMatrix{};
  }
  if (level == UnitLevel::kSentence) return project_to_sentences(edu_level, sentence_map(doc));
  return edu_level;
}

std::vector<PreparedDoc> prepare_corpus(const std::vector<Document>& corpus,
                                        const EncoderConfig& enc_cfg,
                                        const EmbedderConfig& emb_cfg, UnitLevel level,
                                        bool require_labels, int threads,
                                        const ExternalVectors* ext) {
  if (emb_cfg.dims != enc_cfg.d_model)
    throw Error("embedder dims " + std::to_string(emb_cfg.dims) + " must equal d_model " +
                std::to_string(enc_cfg.d_model));
  std::vector<PreparedDoc> out(corpus.size());
  set_thread_budget(threads);
  std::exception_ptr failure;
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(corpus.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const Document& doc = corpus[static_cast<std::size_t>(i)];
      PreparedDoc p;
      p.id = doc.id;
      p.units = doc.unit_count(level);
      if (p.units > enc_cfg.l_max)
        throw Error("document '" + doc.id + "' has " + std::to_string(p.units) +
                    " units, exceeding l_max=" + std::to_string(enc_cfg.l_max));
      p.emb = embed_units(doc, level, emb_cfg, ext).x;
      if (is_tree_kind(enc_cfg.attention_kind))
        p.fixed_a = fixed_matrix_for(doc, enc_cfg.attention_kind, level);
      if (doc.labels && doc.labels->size() == p.units) {
        p.labels = *doc.labels;
      } else if (require_labels) {
        throw Error("document '" + doc.id + "' is missing labels for level " +
                    std::string(to_string(level)) + " (run the oracle subcommand first)");
      }
      out[static_cast<std::size_t>(i)] = std::move(p);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

namespace {

struct Adam {
  ModelParams m, v;
  double beta1, beta2, eps;
  std::size_t t = 0;

  Adam(const EncoderConfig& cfg, const TrainConfig& tc)
      : m(allocate_model(cfg)), v(allocate_model(cfg)), beta1(tc.beta1), beta2(tc.beta2),
        eps(tc.adam_eps) {}

  void step(ModelParams& params, ModelParams& grads, double lr) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    std::vector<TensorRef> p = tensor_refs(params);
    std::vector<TensorRef> g = tensor_refs(grads);
    std::vector<TensorRef> mm = tensor_refs(m);
    std::vector<TensorRef> vv = tensor_refs(v);
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!p[i].learnable) continue;
      for (std::size_t j = 0; j < p[i].size; ++j) {
        const double grad = g[i].data[j];
        double& mj = mm[i].data[j];
        double& vj = vv[i].data[j];
        mj = beta1 * mj + (1.0 - beta1) * grad;
        vj = beta2 * vj + (1.0 - beta2) * grad * grad;
        const double mhat = mj / c1;
        const double vhat = vj / c2;
        p[i].data[j] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }
};

void zero_model(ModelParams& g) {
  for (TensorRef& t : tensor_refs(g)) std::fill(t.data, t.data + t.size, 0.0);
}

void accumulate(ModelParams& into, ModelParams& from) {
  std::vector<TensorRef> a = tensor_refs(into);
  std::vector<TensorRef> b = tensor_refs(from);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size; ++j) a[i].data[j] += b[i].data[j];
}

/// Forward/backward for one document padded to `pad_len`; returns the
/// per-document mean BCE and accumulates dL_doc/dtheta * weight into grads.
double doc_grad(const ModelParams& model, const PreparedDoc& doc, std::size_t pad_len,
                double weight, ModelParams& grads) {
  Matrix emb(pad_len, model.cfg.d_model);
  for (std::size_t i = 0; i < doc.units; ++i)
    std::copy(doc.emb.row(i), doc.emb.row(i) + model.cfg.d_model, emb.row(i));
  const AttentionMatrix* fixed = doc.fixed_a.n() > 0 ? &doc.fixed_a : nullptr;
  ForwardTrace trace;
  encoder_forward(model, emb, fixed, doc.units, &trace);
  const double loss = bce_loss(trace.scores, doc.labels, doc.units);
  std::vector<double> dlogits(pad_len, 0.0);
  const double inv = weight / static_cast<double>(doc.units);
  for (std::size_t i = 0; i < doc.units; ++i)
    dlogits[i] = (trace.scores[i] - static_cast<double>(doc.labels[i])) * inv;
  encoder_backward(model, trace, dlogits, grads);
  return loss;
}

}  // namespace

TrainResult train(const std::vector<Document>& corpus, const EncoderConfig& enc_cfg,
                  const TrainConfig& train_cfg, const EmbedderConfig& emb_cfg, UnitLevel level,
                  const ExternalVectors* ext) {
  std::vector<Document> used(corpus.begin(),
                             train_cfg.max_docs > 0 && train_cfg.max_docs < corpus.size()
                                 ? corpus.begin() + static_cast<std::ptrdiff_t>(train_cfg.max_docs)
                                 : corpus.end());
  if (used.empty()) throw Error("training corpus is empty");
  std::vector<PreparedDoc> docs =
      prepare_corpus(used, enc_cfg, emb_cfg, level, /*require_labels=*/true, train_cfg.threads, ext);

  TrainResult result;
  result.model = init_model(enc_cfg, train_cfg.seed);
  Adam adam(enc_cfg, train_cfg);
  ModelParams grads = allocate_model(enc_cfg);
  Rng shuffle_rng(train_cfg.seed ^ 0x5eedULL);

  std::vector<std::size_t> order(docs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t cursor = order.size();  // forces a shuffle on first use

  set_thread_budget(train_cfg.threads);
  for (std::size_t step = 1; step <= train_cfg.max_steps; ++step) {
    std::vector<std::size_t> batch;
    while (batch.size() < train_cfg.batch_size) {
      if (cursor == order.size()) {
        shuffle_rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }
    std::size_t pad_len = 0;
    for (std::size_t d : batch) pad_len = std::max(pad_len, docs[d].units);

    zero_model(grads);
    const double weight = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    const std::ptrdiff_t bn = static_cast<std::ptrdiff_t>(batch.size());
    // Gradients accumulate in batch order regardless of thread count.
#pragma omp parallel
    {
      ModelParams local = allocate_model(enc_cfg);
#pragma omp for ordered schedule(static, 1) reduction(+ : loss)
      for (std::ptrdiff_t b = 0; b < bn; ++b) {
        zero_model(local);
        const double doc_loss =
            doc_grad(result.model, docs[batch[static_cast<std::size_t>(b)]], pad_len, weight, local);
        loss += doc_loss;
#pragma omp ordered
        accumulate(grads, local);
      }
    }
    loss /= static_cast<double>(batch.size());

    const double lr = noam_lr(step, train_cfg, enc_cfg.d_model);
    adam.step(result.model, grads, lr);
    result.log.push_back(StepLog{step, lr, loss});
  }
  return result;
}

double mean_corpus_bce(const ModelParams& model, const std::vector<PreparedDoc>& docs,
                       int threads) {
  set_thread_budget(threads);
  std::vector<double> losses(docs.size(), 0.0);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(docs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const PreparedDoc& doc = docs[static_cast<std::size_t>(i)];
    const AttentionMatrix* fixed = doc.fixed_a.n() > 0 ? &doc.fixed_a : nullptr;
    std::vector<double> scores = encoder_forward(model, doc.emb, fixed, doc.units);
    losses[static_cast<std::size_t>(i)] = bce_loss(scores, doc.labels, doc.units);
  }
  double total = 0.0;
  for (double l : losses) total += l;
  return total / static_cast<double>(losses.size());
}

namespace {

/// Loss evaluation used by the finite-difference side of the check.
double gc_loss(const ModelParams& model, const Matrix& emb, const AttentionMatrix* fixed,
               std::size_t valid, const std::vector<int>& labels) {
  ForwardTrace trace;
  encoder_forward(model, emb, fixed, valid, &trace);
  return bce_loss(trace.scores, labels, valid);
}

}  // namespace

GradCheckResult grad_check_kind(AttentionKind kind, std::uint64_t seed, double h) {
  EncoderConfig cfg;
  cfg.d_model = 12;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.d_k = cfg.d_v = cfg.d_q = 5;
  cfg.d_inner = 9;
  cfg.l_max = 8;
  cfg.dense_inner = 7;
  cfg.attention_kind = kind;

  Rng rng(seed);
  const std::size_t l = 6;      // padded length
  const std::size_t valid = 5;  // one padded row exercises the masks
  ModelParams model = init_model(cfg, seed ^ 0xabcdULL);
  Matrix emb(l, cfg.d_model);
  for (std::size_t i = 0; i < valid; ++i)
    for (std::size_t j = 0; j < cfg.d_model; ++j) emb(i, j) = rng.normal() * 0.5;
  std::vector<int> labels(valid);
  for (std::size_t i = 0; i < valid; ++i) labels[i] = rng.below(2) ? 1 : 0;

  AttentionMatrix fixed;
  const AttentionMatrix* fixed_ptr = nullptr;
  if (is_tree_kind(kind)) {
    ConstituencyTree tree = random_tree(rng, valid);
    switch (kind) {
      case AttentionKind::kTreeDep:
        fixed = dep_attention(to_dependency(tree));
        break;
      case AttentionKind::kTreeC:
        fixed = ctree_attention(tree);
        break;
      default:
        fixed = ctree_nuc_attention(tree);
        break;
    }
    fixed_ptr = &fixed;
  }

  // analytic
  ForwardTrace trace;
  encoder_forward(model, emb, fixed_ptr, valid, &trace);
  std::vector<double> dlogits(l, 0.0);
  for (std::size_t i = 0; i < valid; ++i)
    dlogits[i] =
        (trace.scores[i] - static_cast<double>(labels[i])) / static_cast<double>(valid);
  ModelParams grads = allocate_model(cfg);
  Matrix d_emb;
  encoder_backward(model, trace, dlogits, grads, &d_emb);

  double max_rel = 0.0;
  auto update = [&](double analytic, double plus, double minus) {
    const double numeric = (plus - minus) / (2.0 * h);
    const double rel =
        std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    max_rel = std::max(max_rel, rel);
  };

  std::vector<TensorRef> prefs = tensor_refs(model);
  std::vector<TensorRef> grefs = tensor_refs(grads);
  for (std::size_t ti = 0; ti < prefs.size(); ++ti) {
    if (!prefs[ti].learnable) continue;
    for (std::size_t j = 0; j < prefs[ti].size; ++j) {
      double& p = prefs[ti].data[j];
      const double orig = p;
      p = orig + h;
      const double lp = gc_loss(model, emb, fixed_ptr, valid, labels);
      p = orig - h;
      const double lm = gc_loss(model, emb, fixed_ptr, valid, labels);
      p = orig;
      update(grefs[ti].data[j], lp, lm);
    }
  }
  for (std::size_t i = 0; i < l; ++i) {
    for (std::size_t j = 0; j < cfg.d_model; ++j) {
      const double orig = emb(i, j);
      emb(i, j) = orig + h;
      const double lp = gc_loss(model, emb, fixed_ptr, valid, labels);
      emb(i, j) = orig - h;
      const double lm = gc_loss(model, emb, fixed_ptr, valid, labels);
      emb(i, j) = orig;
      update(d_emb(i, j), lp, lm);
    }
  }
  return GradCheckResult{kind, max_rel};
}

std::vector<GradCheckResult> grad_check(std::uint64_t seed, double h) {
  std::vector<GradCheckResult> out;
  for (AttentionKind kind : {AttentionKind::kDot, AttentionKind::kDense,
                             AttentionKind::kRandomLearned, AttentionKind::kRandomFixed,
                             AttentionKind::kNone, AttentionKind::kTreeDep, AttentionKind::kTreeC,
                             AttentionKind::kTreeCNuc}) {
    out.push_back(grad_check_kind(kind, seed, h));
  }
  return out;
}

}  // namespace treesumm

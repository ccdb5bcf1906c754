#pragma once

#include <cstdint>
#include <vector>

#include "treesumm/document.hpp"
#include "treesumm/embed.hpp"
#include "treesumm/encoder.hpp"

namespace treesumm {

struct TrainConfig {
  double lr_factor = 1e-2;  // Noam factor
  std::size_t warmup_steps = 8000;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double adam_eps = 1e-9;
  std::size_t max_steps = 1000;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  std::size_t max_docs = 0;  // 0 = whole corpus
  int threads = 1;
};

/// lr_factor * d_model^-0.5 * min(step^-0.5, step * warmup^-1.5); step >= 1.
double noam_lr(std::size_t step, const TrainConfig& cfg, std::size_t d_model);

/// Mean over the first `valid` units of -[y ln p + (1-y) ln(1-p)], with p
/// clamped to [1e-12, 1-1e-12].
double bce_loss(const std::vector<double>& scores, const std::vector<int>& labels,
                std::size_t valid);

struct StepLog {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  ModelParams model;
  std::vector<StepLog> log;
};

/// Per-document inputs resolved once before the loop: embeddings, the fixed
/// attention matrix for tree kinds, and level-appropriate labels.
struct PreparedDoc {
  std::string id;
  Matrix emb;
  AttentionMatrix fixed_a;  // n() == 0 when the kind needs none
  std::vector<int> labels;  // may be empty (evaluation-only use)
  std::size_t units = 0;
};

/// The document's fixed attention matrix for a tree kind at the requested
/// level (dependency conversion runs post-editing first; sentence level
/// projects the EDU matrix). Returns an empty matrix for non-tree kinds.
AttentionMatrix fixed_matrix_for(const Document& doc, AttentionKind kind, UnitLevel level);

/// Builds embeddings and fixed matrices for every document (parallel,
/// deterministic). require_labels makes a missing/mismatched labels array an
/// error, as training needs them.
std::vector<PreparedDoc> prepare_corpus(const std::vector<Document>& corpus,
                                        const EncoderConfig& enc_cfg,
                                        const EmbedderConfig& emb_cfg, UnitLevel level,
                                        bool require_labels, int threads,
                                        const ExternalVectors* ext = nullptr);

/// Adam + Noam training against oracle labels. Deterministic in
/// TrainConfig::seed for any thread count.
TrainResult train(const std::vector<Document>& corpus, const EncoderConfig& enc_cfg,
                  const TrainConfig& train_cfg, const EmbedderConfig& emb_cfg, UnitLevel level,
                  const ExternalVectors* ext = nullptr);

/// Mean per-document BCE of a trained model over a corpus.
double mean_corpus_bce(const ModelParams& model, const std::vector<PreparedDoc>& docs,
                       int threads);

struct GradCheckResult {
  AttentionKind kind;
  double max_rel_err = 0.0;
};

/// Central finite differences against the analytic gradients for every
/// parameter and input entry, on a small padded instance of each kind.
GradCheckResult grad_check_kind(AttentionKind kind, std::uint64_t seed, double h = 1e-5);
std::vector<GradCheckResult> grad_check(std::uint64_t seed, double h = 1e-5);

}  // namespace treesumm

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "treesumm/attention.hpp"
#include "treesumm/embed.hpp"
#include "treesumm/matrix.hpp"

namespace treesumm {

enum class AttentionKind {
  kDot,
  kDense,
  kRandomLearned,
  kRandomFixed,
  kNone,
  kTreeDep,
  kTreeC,
  kTreeCNuc,
};

const char* to_string(AttentionKind kind);
AttentionKind attention_kind_from_string(std::string_view s);

/// Kinds whose attention matrix is held constant during training.
bool is_fixed_kind(AttentionKind kind);
/// Kinds that consume a document tree matrix.
bool is_tree_kind(AttentionKind kind);

struct EncoderConfig {
  std::size_t d_model = 768;
  std::size_t n_layers = 2;
  std::size_t n_heads = 1;
  std::size_t d_k = 64;
  std::size_t d_v = 64;
  std::size_t d_q = 64;
  std::size_t d_inner = 3072;
  std::size_t l_max = 512;
  std::size_t dense_inner = 512;
  AttentionKind attention_kind = AttentionKind::kDot;
  bool use_positional = true;
  bool scale_dot = true;

  static EncoderConfig preset_default(AttentionKind kind, std::size_t heads = 1);
  /// d_v = d_k = d_q = 512 and d_inner = 512.
  static EncoderConfig preset_balanced(AttentionKind kind, std::size_t heads = 1);
};

void to_json(nlohmann::json& j, const EncoderConfig& cfg);
void from_json(const nlohmann::json& j, EncoderConfig& cfg);

/// Per-layer tensors. Which members are populated depends on the attention
/// kind; see allocate_model.
struct LayerParams {
  // attention: value path (all kinds)
  std::vector<Matrix> w_v;              // head: d_model x d_v
  std::vector<std::vector<double>> b_v; // head: d_v
  Matrix w_o;                           // (n_heads*d_v) x d_model
  std::vector<double> b_o;              // d_model
  // dot
  std::vector<Matrix> w_k, w_q;
  std::vector<std::vector<double>> b_k, b_q;
  // dense
  std::vector<Matrix> dense_w2;              // d_model x dense_inner
  std::vector<std::vector<double>> dense_b2; // dense_inner
  std::vector<Matrix> dense_w1;              // dense_inner x l_max
  std::vector<std::vector<double>> dense_b1; // l_max
  // random (learnable iff kind == random_learned)
  std::vector<Matrix> rand_logits;           // l_max x l_max
  // feed-forward
  Matrix ffn_w1;               // d_model x d_inner
  std::vector<double> ffn_b1;  // d_inner
  Matrix ffn_w2;               // d_inner x d_model
  std::vector<double> ffn_b2;  // d_model
  // layer norms
  std::vector<double> ln1_gain, ln1_shift, ln2_gain, ln2_shift;
};

struct ModelParams {
  EncoderConfig cfg;
  std::vector<LayerParams> layers;
  std::vector<double> cls_w;  // d_model
  std::vector<double> cls_b;  // 1
  Matrix positional;          // l_max x d_model, not learned
};

/// All tensors zero (shapes only); used for gradients and optimizer state.
ModelParams allocate_model(const EncoderConfig& cfg);

/// Glorot-uniform weights, zero biases, unit layer-norm gains, standard
/// normal random logits, sinusoidal positional table. Deterministic in seed.
ModelParams init_model(const EncoderConfig& cfg, std::uint64_t seed);

struct TensorRef {
  std::string name;
  bool learnable = true;
  double* data = nullptr;
  std::size_t size = 0;
  std::vector<std::size_t> shape;
};

/// Canonical-order tensor listing (stable across runs; checkpoint order).
std::vector<TensorRef> tensor_refs(ModelParams& model);

/// Learnable parameters in the attention sublayers (closed-form count).
std::size_t count_attention_params(const EncoderConfig& cfg);
/// All learnable parameters: attention + FFN + layer norms + classifier.
std::size_t count_model_params(const EncoderConfig& cfg);

/// Brute-force audits by enumerating every allocated learnable tensor.
std::size_t enumerate_attention_params(ModelParams& model);
std::size_t enumerate_model_params(ModelParams& model);

struct LayerNormTrace {
  Matrix xhat;
  std::vector<double> inv_std;
};

struct AttentionTrace {
  std::vector<Matrix> a;  // per head, l x l
  std::vector<Matrix> k, q, v, dense_h;
  Matrix concat;  // l x n_heads*d_v
};

struct LayerTrace {
  Matrix x_in;
  AttentionTrace attn;
  Matrix attn_out;
  LayerNormTrace ln1;
  Matrix x1;
  Matrix ffn_act;  // ReLU(x1 w1 + b1)
  LayerNormTrace ln2;
  Matrix x2;
};

struct ForwardTrace {
  Matrix x0;
  std::vector<LayerTrace> layers;
  std::vector<double> logits;  // pre-sigmoid
  std::vector<double> scores;
  std::size_t valid = 0;
};

/// Per-head attention matrices for one layer. Rows past `valid` are one-hot
/// on self; columns past `valid` are masked out before the softmax. Tree
/// kinds require `fixed_a` (valid x valid); kind none defaults to identity.
std::vector<Matrix> compute_attention(const EncoderConfig& cfg, const LayerParams& layer,
                                      const Matrix& x, const AttentionMatrix* fixed_a,
                                      std::size_t valid, AttentionTrace* trace = nullptr);

/// concat_h(A_h · (X W_V_h + b_V_h)) · W_O + b_O.
Matrix apply_attention(const EncoderConfig& cfg, const LayerParams& layer,
                       const std::vector<Matrix>& heads, const Matrix& x,
                       AttentionTrace* trace = nullptr);

/// Scores in (0,1) per unit (rows past `valid` are garbage and ignored by
/// every caller). Pass a trace to keep intermediates for the backward pass.
std::vector<double> encoder_forward(const ModelParams& model, const Matrix& emb,
                                    const AttentionMatrix* fixed_a, std::size_t valid,
                                    ForwardTrace* trace = nullptr);

/// Accumulates parameter gradients given dL/dlogit (pre-sigmoid); entries
/// past `valid` must be zero. d_emb, when non-null, receives dL/dX0.
void encoder_backward(const ModelParams& model, const ForwardTrace& trace,
                      const std::vector<double>& dlogits, ModelParams& grads,
                      Matrix* d_emb = nullptr);

/// Checkpoint: one-line JSON manifest (config, tensor names/shapes/offsets)
/// followed by the little-endian float64 payload in manifest order.
struct Checkpoint {
  ModelParams model;
  EmbedderConfig embedder;
  UnitLevel level = UnitLevel::kEdu;
};

void save_checkpoint(const std::string& path, ModelParams& model, const EmbedderConfig& embedder,
                     UnitLevel level);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace treesumm

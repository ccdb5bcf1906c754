#include "treesumm/encoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

#include "treesumm/util.hpp"

namespace treesumm {

namespace {
constexpr double kLayerNormEps = 1e-5;
}

const char* to_string(AttentionKind kind) {
  switch (kind) {
    case AttentionKind::kDot: return "dot";
    case AttentionKind::kDense: return "dense";
    case AttentionKind::kRandomLearned: return "random_learned";
    case AttentionKind::kRandomFixed: return "random_fixed";
    case AttentionKind::kNone: return "none";
    case AttentionKind::kTreeDep: return "tree_dep";
    case AttentionKind::kTreeC: return "tree_c";
    case AttentionKind::kTreeCNuc: return "tree_c_nuc";
  }
  return "?";
}

AttentionKind attention_kind_from_string(std::string_view s) {
  for (AttentionKind k : {AttentionKind::kDot, AttentionKind::kDense, AttentionKind::kRandomLearned,
                          AttentionKind::kRandomFixed, AttentionKind::kNone, AttentionKind::kTreeDep,
                          AttentionKind::kTreeC, AttentionKind::kTreeCNuc}) {
    if (s == to_string(k)) return k;
  }
  throw Error("unknown attention kind '" + std::string(s) + "'");
}

bool is_fixed_kind(AttentionKind kind) {
  return kind == AttentionKind::kRandomFixed || kind == AttentionKind::kNone || is_tree_kind(kind);
}

bool is_tree_kind(AttentionKind kind) {
  return kind == AttentionKind::kTreeDep || kind == AttentionKind::kTreeC ||
         kind == AttentionKind::kTreeCNuc;
}

EncoderConfig EncoderConfig::preset_default(AttentionKind kind, std::size_t heads) {
  EncoderConfig cfg;
  cfg.attention_kind = kind;
  cfg.n_heads = heads;
  return cfg;
}

EncoderConfig EncoderConfig::preset_balanced(AttentionKind kind, std::size_t heads) {
  EncoderConfig cfg;
  cfg.attention_kind = kind;
  cfg.n_heads = heads;
  cfg.d_k = cfg.d_v = cfg.d_q = 512;
  cfg.d_inner = 512;
  return cfg;
}

void to_json(nlohmann::json& j, const EncoderConfig& cfg) {
  j = nlohmann::json{{"d_model", cfg.d_model},
                     {"n_layers", cfg.n_layers},
                     {"n_heads", cfg.n_heads},
                     {"d_k", cfg.d_k},
                     {"d_v", cfg.d_v},
                     {"d_q", cfg.d_q},
                     {"d_inner", cfg.d_inner},
                     {"l_max", cfg.l_max},
                     {"dense_inner", cfg.dense_inner},
                     {"attention_kind", to_string(cfg.attention_kind)},
                     {"use_positional", cfg.use_positional},
                     {"scale_dot", cfg.scale_dot}};
}

void from_json(const nlohmann::json& j, EncoderConfig& cfg) {
  j.at("d_model").get_to(cfg.d_model);
  j.at("n_layers").get_to(cfg.n_layers);
  j.at("n_heads").get_to(cfg.n_heads);
  j.at("d_k").get_to(cfg.d_k);
  j.at("d_v").get_to(cfg.d_v);
  j.at("d_q").get_to(cfg.d_q);
  j.at("d_inner").get_to(cfg.d_inner);
  j.at("l_max").get_to(cfg.l_max);
  j.at("dense_inner").get_to(cfg.dense_inner);
  cfg.attention_kind = attention_kind_from_string(j.at("attention_kind").get<std::string>());
  j.at("use_positional").get_to(cfg.use_positional);
  j.at("scale_dot").get_to(cfg.scale_dot);
}

ModelParams allocate_model(const EncoderConfig& cfg) {
  if (cfg.attention_kind == AttentionKind::kDot && cfg.d_k != cfg.d_q)
    throw Error("dot attention requires d_k == d_q (logits are K Q^T)");
  if (cfg.d_model == 0 || cfg.n_layers == 0 || cfg.n_heads == 0 || cfg.d_v == 0 || cfg.l_max == 0)
    throw Error("encoder dimensions must be positive");
  ModelParams m;
  m.cfg = cfg;
  m.layers.resize(cfg.n_layers);
  const AttentionKind kind = cfg.attention_kind;
  for (LayerParams& layer : m.layers) {
    layer.w_v.assign(cfg.n_heads, Matrix(cfg.d_model, cfg.d_v));
    layer.b_v.assign(cfg.n_heads, std::vector<double>(cfg.d_v, 0.0));
    layer.w_o = Matrix(cfg.n_heads * cfg.d_v, cfg.d_model);
    layer.b_o.assign(cfg.d_model, 0.0);
    if (kind == AttentionKind::kDot) {
      layer.w_k.assign(cfg.n_heads, Matrix(cfg.d_model, cfg.d_k));
      layer.b_k.assign(cfg.n_heads, std::vector<double>(cfg.d_k, 0.0));
      layer.w_q.assign(cfg.n_heads, Matrix(cfg.d_model, cfg.d_q));
      layer.b_q.assign(cfg.n_heads, std::vector<double>(cfg.d_q, 0.0));
    } else if (kind == AttentionKind::kDense) {
      layer.dense_w2.assign(cfg.n_heads, Matrix(cfg.d_model, cfg.dense_inner));
      layer.dense_b2.assign(cfg.n_heads, std::vector<double>(cfg.dense_inner, 0.0));
      layer.dense_w1.assign(cfg.n_heads, Matrix(cfg.dense_inner, cfg.l_max));
      layer.dense_b1.assign(cfg.n_heads, std::vector<double>(cfg.l_max, 0.0));
    } else if (kind == AttentionKind::kRandomLearned || kind == AttentionKind::kRandomFixed) {
      layer.rand_logits.assign(cfg.n_heads, Matrix(cfg.l_max, cfg.l_max));
    }
    layer.ffn_w1 = Matrix(cfg.d_model, cfg.d_inner);
    layer.ffn_b1.assign(cfg.d_inner, 0.0);
    layer.ffn_w2 = Matrix(cfg.d_inner, cfg.d_model);
    layer.ffn_b2.assign(cfg.d_model, 0.0);
    layer.ln1_gain.assign(cfg.d_model, 0.0);
    layer.ln1_shift.assign(cfg.d_model, 0.0);
    layer.ln2_gain.assign(cfg.d_model, 0.0);
    layer.ln2_shift.assign(cfg.d_model, 0.0);
  }
  m.cls_w.assign(cfg.d_model, 0.0);
  m.cls_b.assign(1, 0.0);
  if (cfg.use_positional) m.positional = Matrix(cfg.l_max, cfg.d_model);
  return m;
}

std::vector<TensorRef> tensor_refs(ModelParams& model) {
  std::vector<TensorRef> refs;
  const AttentionKind kind = model.cfg.attention_kind;
  auto add_mat = [&](const std::string& name, Matrix& m, bool learnable) {
    refs.push_back(TensorRef{name, learnable, m.data.data(), m.data.size(), {m.rows, m.cols}});
  };
  auto add_vec = [&](const std::string& name, std::vector<double>& v, bool learnable) {
    refs.push_back(TensorRef{name, learnable, v.data(), v.size(), {v.size()}});
  };
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    LayerParams& layer = model.layers[i];
    const std::string p = "layers." + std::to_string(i) + ".";
    for (std::size_t h = 0; h < layer.w_k.size(); ++h) {
      const std::string s = "." + std::to_string(h);
      add_mat(p + "attn.w_k" + s, layer.w_k[h], true);
      add_vec(p + "attn.b_k" + s, layer.b_k[h], true);
      add_mat(p + "attn.w_q" + s, layer.w_q[h], true);
      add_vec(p + "attn.b_q" + s, layer.b_q[h], true);
    }
    for (std::size_t h = 0; h < layer.dense_w2.size(); ++h) {
      const std::string s = "." + std::to_string(h);
      add_mat(p + "attn.dense_w2" + s, layer.dense_w2[h], true);
      add_vec(p + "attn.dense_b2" + s, layer.dense_b2[h], true);
      add_mat(p + "attn.dense_w1" + s, layer.dense_w1[h], true);
      add_vec(p + "attn.dense_b1" + s, layer.dense_b1[h], true);
    }
    for (std::size_t h = 0; h < layer.rand_logits.size(); ++h) {
      add_mat(p + "attn.r." + std::to_string(h), layer.rand_logits[h],
              kind == AttentionKind::kRandomLearned);
    }
    for (std::size_t h = 0; h < layer.w_v.size(); ++h) {
      const std::string s = "." + std::to_string(h);
      add_mat(p + "attn.w_v" + s, layer.w_v[h], true);
      add_vec(p + "attn.b_v" + s, layer.b_v[h], true);
    }
    add_mat(p + "attn.w_o", layer.w_o, true);
    add_vec(p + "attn.b_o", layer.b_o, true);
    add_mat(p + "ffn.w1", layer.ffn_w1, true);
    add_vec(p + "ffn.b1", layer.ffn_b1, true);
    add_mat(p + "ffn.w2", layer.ffn_w2, true);
    add_vec(p + "ffn.b2", layer.ffn_b2, true);
    add_vec(p + "ln1.gain", layer.ln1_gain, true);
    add_vec(p + "ln1.shift", layer.ln1_shift, true);
    add_vec(p + "ln2.gain", layer.ln2_gain, true);
    add_vec(p + "ln2.shift", layer.ln2_shift, true);
  }
  add_vec("cls.w", model.cls_w, true);
  add_vec("cls.b", model.cls_b, true);
  if (model.positional.data.size() > 0) add_mat("positional", model.positional, false);
  return refs;
}

namespace {

void fill_sinusoidal(Matrix& pe) {
  const std::size_t d = pe.cols;
  for (std::size_t pos = 0; pos < pe.rows; ++pos) {
    for (std::size_t k = 0; k + 1 < d; k += 2) {
      const double angle =
          static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(k) / static_cast<double>(d));
      pe(pos, k) = std::sin(angle);
      pe(pos, k + 1) = std::cos(angle);
    }
    if (d % 2 == 1) {
      const double angle = static_cast<double>(pos) /
                           std::pow(10000.0, static_cast<double>(d - 1) / static_cast<double>(d));
      pe(pos, d - 1) = std::sin(angle);
    }
  }
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

ModelParams init_model(const EncoderConfig& cfg, std::uint64_t seed) {
  ModelParams model = allocate_model(cfg);
  Rng rng(seed);
  for (TensorRef& t : tensor_refs(model)) {
    if (t.name == "positional") {
      Matrix& pe = model.positional;
      fill_sinusoidal(pe);
    } else if (ends_with(t.name, ".gain")) {
      std::fill(t.data, t.data + t.size, 1.0);
    } else if (t.name.find("attn.r.") != std::string::npos) {
      for (std::size_t i = 0; i < t.size; ++i) t.data[i] = rng.normal();
    } else if (t.shape.size() == 2) {
      const double limit =
          std::sqrt(6.0 / static_cast<double>(t.shape[0] + t.shape[1]));
      for (std::size_t i = 0; i < t.size; ++i) t.data[i] = (2.0 * rng.uniform() - 1.0) * limit;
    } else if (t.name == "cls.w") {
      const double limit = std::sqrt(6.0 / static_cast<double>(t.size + 1));
      for (std::size_t i = 0; i < t.size; ++i) t.data[i] = (2.0 * rng.uniform() - 1.0) * limit;
    }
    // biases and layer-norm shifts stay zero
  }
  return model;
}

std::size_t count_attention_params(const EncoderConfig& cfg) {
  const std::size_t h = cfg.n_heads;
  std::size_t per_layer = h * (cfg.d_model * cfg.d_v + cfg.d_v)      // value projections
                          + h * cfg.d_v * cfg.d_model + cfg.d_model; // output projection
  switch (cfg.attention_kind) {
    case AttentionKind::kDot:
      per_layer += h * (cfg.d_model * cfg.d_k + cfg.d_k + cfg.d_model * cfg.d_q + cfg.d_q);
      break;
    case AttentionKind::kDense:
      per_layer += h * (cfg.d_model * cfg.dense_inner + cfg.dense_inner +
                        cfg.dense_inner * cfg.l_max + cfg.l_max);
      break;
    case AttentionKind::kRandomLearned:
      per_layer += h * cfg.l_max * cfg.l_max;
      break;
    default:
      break;  // fixed kinds carry no attention-logit parameters
  }
  return cfg.n_layers * per_layer;
}

std::size_t count_model_params(const EncoderConfig& cfg) {
  const std::size_t ffn = cfg.d_model * cfg.d_inner + cfg.d_inner +
                          cfg.d_inner * cfg.d_model + cfg.d_model;
  const std::size_t norms = 4 * cfg.d_model;
  return count_attention_params(cfg) + cfg.n_layers * (ffn + norms) + cfg.d_model + 1;
}

std::size_t enumerate_attention_params(ModelParams& model) {
  std::size_t total = 0;
  for (const TensorRef& t : tensor_refs(model)) {
    if (t.learnable && t.name.find(".attn.") != std::string::npos) total += t.size;
  }
  return total;
}

std::size_t enumerate_model_params(ModelParams& model) {
  std::size_t total = 0;
  for (const TensorRef& t : tensor_refs(model)) {
    if (t.learnable) total += t.size;
  }
  return total;
}

namespace {

Matrix linear(const Matrix& x, const Matrix& w, const std::vector<double>& b) {
  Matrix y = matmul(x, w);
  for (std::size_t i = 0; i < y.rows; ++i) {
    double* row = y.row(i);
    for (std::size_t j = 0; j < y.cols; ++j) row[j] += b[j];
  }
  return y;
}

/// Softmax over columns [0, valid) of each row in [0, valid); rows past
/// valid become one-hot on self.
void masked_softmax_rows(Matrix& logits, std::size_t valid) {
  for (std::size_t i = 0; i < logits.rows; ++i) {
    double* row = logits.row(i);
    if (i >= valid) {
      std::fill(row, row + logits.cols, 0.0);
      row[i] = 1.0;
      continue;
    }
    double mx = row[0];
    for (std::size_t j = 1; j < valid; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < valid; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (std::size_t j = 0; j < valid; ++j) row[j] /= sum;
    std::fill(row + valid, row + logits.cols, 0.0);
  }
}

/// dLogits from dA for softmax rows: a .* (da - sum(da .* a)).
Matrix softmax_rows_backward(const Matrix& a, const Matrix& da, std::size_t valid) {
  Matrix dl(a.rows, a.cols);
  for (std::size_t i = 0; i < valid; ++i) {
    const double* arow = a.row(i);
    const double* darow = da.row(i);
    double dot = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) dot += darow[j] * arow[j];
    double* out = dl.row(i);
    for (std::size_t j = 0; j < a.cols; ++j) out[j] = arow[j] * (darow[j] - dot);
  }
  return dl;
}

LayerNormTrace layer_norm(const Matrix& y, const std::vector<double>& gain,
                          const std::vector<double>& shift, Matrix& out) {
  const std::size_t d = y.cols;
  LayerNormTrace t;
  t.xhat = Matrix(y.rows, d);
  t.inv_std.resize(y.rows);
  out = Matrix(y.rows, d);
  for (std::size_t i = 0; i < y.rows; ++i) {
    const double* row = y.row(i);
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = row[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    t.inv_std[i] = inv;
    double* xh = t.xhat.row(i);
    double* o = out.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      xh[j] = (row[j] - mean) * inv;
      o[j] = gain[j] * xh[j] + shift[j];
    }
  }
  return t;
}

/// Backward through y = gain .* xhat + shift; returns dL/d(pre-norm input).
Matrix layer_norm_backward(const LayerNormTrace& t, const std::vector<double>& gain,
                           const Matrix& dout, std::vector<double>& dgain,
                           std::vector<double>& dshift) {
  const std::size_t d = t.xhat.cols;
  Matrix dx(t.xhat.rows, d);
  for (std::size_t i = 0; i < t.xhat.rows; ++i) {
    const double* xh = t.xhat.row(i);
    const double* do_ = dout.row(i);
    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      dgain[j] += do_[j] * xh[j];
      dshift[j] += do_[j];
      const double dxh = do_[j] * gain[j];
      mean_dxhat += dxh;
      mean_dxhat_xhat += dxh * xh[j];
    }
    mean_dxhat /= static_cast<double>(d);
    mean_dxhat_xhat /= static_cast<double>(d);
    double* out = dx.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double dxh = do_[j] * gain[j];
      out[j] = t.inv_std[i] * (dxh - mean_dxhat - xh[j] * mean_dxhat_xhat);
    }
  }
  return dx;
}

void add_colsum(std::vector<double>& acc, const Matrix& m) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* row = m.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) acc[j] += row[j];
  }
}

}  // namespace

std::vector<Matrix> compute_attention(const EncoderConfig& cfg, const LayerParams& layer,
                                      const Matrix& x, const AttentionMatrix* fixed_a,
                                      std::size_t valid, AttentionTrace* trace) {
  const std::size_t l = x.rows;
  if (l > cfg.l_max)
    throw Error("document length " + std::to_string(l) + " exceeds l_max=" +
                std::to_string(cfg.l_max));
  if (valid == 0 || valid > l) throw Error("attention: invalid valid-row count");
  const AttentionKind kind = cfg.attention_kind;

  if (is_fixed_kind(kind) && kind != AttentionKind::kRandomFixed) {
    AttentionMatrix ident;
    const AttentionMatrix* src = fixed_a;
    if (src == nullptr) {
      if (kind != AttentionKind::kNone)
        throw Error(std::string("attention kind ") + to_string(kind) +
                    " requires a fixed matrix");
      ident = identity_attention(valid);
      src = &ident;
    }
    if (src->n() != valid)
      throw Error("fixed attention is " + std::to_string(src->n()) + "x" +
                  std::to_string(src->n()) + " but the document has " + std::to_string(valid) +
                  " units");
    // Embed top-left, identity on padded diagonal rows.
    Matrix a(l, l);
    for (std::size_t i = 0; i < valid; ++i)
      for (std::size_t j = 0; j < valid; ++j) a(i, j) = src->values(i, j);
    for (std::size_t i = valid; i < l; ++i) a(i, i) = 1.0;
    return std::vector<Matrix>(cfg.n_heads, a);
  }

  std::vector<Matrix> heads(cfg.n_heads);
  for (std::size_t h = 0; h < cfg.n_heads; ++h) {
    Matrix logits;
    if (kind == AttentionKind::kDot) {
      Matrix k = linear(x, layer.w_k[h], layer.b_k[h]);
      Matrix q = linear(x, layer.w_q[h], layer.b_q[h]);
      logits = matmul_nt(k, q);
      if (cfg.scale_dot) scale_inplace(logits, 1.0 / std::sqrt(static_cast<double>(cfg.d_k)));
      if (trace) {
        trace->k.push_back(std::move(k));
        trace->q.push_back(std::move(q));
      }
    } else if (kind == AttentionKind::kDense) {
      Matrix hmat = linear(x, layer.dense_w2[h], layer.dense_b2[h]);
      for (double& v : hmat.data) v = std::max(v, 0.0);
      Matrix full = linear(hmat, layer.dense_w1[h], layer.dense_b1[h]);  // l x l_max
      logits = Matrix(l, l);
      for (std::size_t i = 0; i < l; ++i)
        for (std::size_t j = 0; j < l; ++j) logits(i, j) = full(i, j);
      if (trace) trace->dense_h.push_back(std::move(hmat));
    } else {  // random (learned or fixed logits)
      const Matrix& r = layer.rand_logits[h];
      logits = Matrix(l, l);
      for (std::size_t i = 0; i < l; ++i)
        for (std::size_t j = 0; j < l; ++j) logits(i, j) = r(i, j);
    }
    masked_softmax_rows(logits, valid);
    heads[h] = std::move(logits);
  }
  return heads;
}

Matrix apply_attention(const EncoderConfig& cfg, const LayerParams& layer,
                       const std::vector<Matrix>& heads, const Matrix& x, AttentionTrace* trace) {
  const std::size_t l = x.rows;
  Matrix concat(l, cfg.n_heads * cfg.d_v);
  for (std::size_t h = 0; h < cfg.n_heads; ++h) {
    Matrix v = linear(x, layer.w_v[h], layer.b_v[h]);
    Matrix mixed = matmul(heads[h], v);
    for (std::size_t i = 0; i < l; ++i) {
      double* dst = concat.row(i) + h * cfg.d_v;
      const double* src = mixed.row(i);
      std::copy(src, src + cfg.d_v, dst);
    }
    if (trace) trace->v.push_back(std::move(v));
  }
  Matrix out = linear(concat, layer.w_o, layer.b_o);
  if (trace) trace->concat = std::move(concat);
  return out;
}

std::vector<double> encoder_forward(const ModelParams& model, const Matrix& emb,
                                    const AttentionMatrix* fixed_a, std::size_t valid,
                                    ForwardTrace* trace) {
  const EncoderConfig& cfg = model.cfg;
  if (emb.cols != cfg.d_model)
    throw Error("embedding dim " + std::to_string(emb.cols) + " != d_model " +
                std::to_string(cfg.d_model));
  Matrix x = emb;
  if (cfg.use_positional) {
    for (std::size_t i = 0; i < x.rows; ++i) {
      const double* pe = model.positional.row(i);
      double* row = x.row(i);
      for (std::size_t j = 0; j < x.cols; ++j) row[j] += pe[j];
    }
  }
  ForwardTrace local;
  ForwardTrace& t = trace ? *trace : local;
  t.valid = valid;
  t.x0 = x;
  t.layers.clear();
  t.layers.resize(cfg.n_layers);

  for (std::size_t li = 0; li < cfg.n_layers; ++li) {
    const LayerParams& layer = model.layers[li];
    LayerTrace& lt = t.layers[li];
    lt.x_in = x;
    lt.attn.a = compute_attention(cfg, layer, x, fixed_a, valid, &lt.attn);
    lt.attn_out = apply_attention(cfg, layer, lt.attn.a, x, &lt.attn);

    Matrix y1 = x;
    add_inplace(y1, lt.attn_out);
    lt.ln1 = layer_norm(y1, layer.ln1_gain, layer.ln1_shift, lt.x1);

    Matrix pre = linear(lt.x1, layer.ffn_w1, layer.ffn_b1);
    lt.ffn_act = pre;
    for (double& v : lt.ffn_act.data) v = std::max(v, 0.0);
    Matrix ffn_out = linear(lt.ffn_act, layer.ffn_w2, layer.ffn_b2);

    Matrix y2 = lt.x1;
    add_inplace(y2, ffn_out);
    lt.ln2 = layer_norm(y2, layer.ln2_gain, layer.ln2_shift, lt.x2);
    x = lt.x2;
  }

  t.logits.assign(x.rows, 0.0);
  t.scores.assign(x.rows, 0.0);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double z = model.cls_b[0];
    const double* row = x.row(i);
    for (std::size_t j = 0; j < x.cols; ++j) z += row[j] * model.cls_w[j];
    t.logits[i] = z;
    t.scores[i] = 1.0 / (1.0 + std::exp(-z));
  }
  return t.scores;
}

void encoder_backward(const ModelParams& model, const ForwardTrace& t,
                      const std::vector<double>& dlogits, ModelParams& grads, Matrix* d_emb) {
  const EncoderConfig& cfg = model.cfg;
  const std::size_t l = t.x0.rows;

  // classifier
  Matrix dx(l, cfg.d_model);
  const Matrix& x_last = cfg.n_layers > 0 ? t.layers.back().x2 : t.x0;
  for (std::size_t i = 0; i < l; ++i) {
    const double dz = dlogits[i];
    grads.cls_b[0] += dz;
    const double* row = x_last.row(i);
    double* drow = dx.row(i);
    for (std::size_t j = 0; j < cfg.d_model; ++j) {
      grads.cls_w[j] += dz * row[j];
      drow[j] = dz * model.cls_w[j];
    }
  }

  for (std::size_t li = cfg.n_layers; li-- > 0;) {
    const LayerParams& layer = model.layers[li];
    LayerParams& g = grads.layers[li];
    const LayerTrace& lt = t.layers[li];

    // LN2
    Matrix dy2 = layer_norm_backward(lt.ln2, layer.ln2_gain, dx, g.ln2_gain, g.ln2_shift);
    // FFN: y2 = x1 + relu(x1 w1 + b1) w2 + b2
    Matrix dx1 = dy2;
    add_inplace(g.ffn_w2, matmul_tn(lt.ffn_act, dy2));
    add_colsum(g.ffn_b2, dy2);
    Matrix dact = matmul_nt(dy2, layer.ffn_w2);
    for (std::size_t i = 0; i < dact.data.size(); ++i)
      if (lt.ffn_act.data[i] <= 0.0) dact.data[i] = 0.0;
    add_inplace(g.ffn_w1, matmul_tn(lt.x1, dact));
    add_colsum(g.ffn_b1, dact);
    add_inplace(dx1, matmul_nt(dact, layer.ffn_w1));

    // LN1
    Matrix dy1 = layer_norm_backward(lt.ln1, layer.ln1_gain, dx1, g.ln1_gain, g.ln1_shift);
    // attention: y1 = x_in + concat(A_h V_h) w_o + b_o
    Matrix dx_in = dy1;
    add_inplace(g.w_o, matmul_tn(lt.attn.concat, dy1));
    add_colsum(g.b_o, dy1);
    Matrix dconcat = matmul_nt(dy1, layer.w_o);

    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
      Matrix du(l, cfg.d_v);
      for (std::size_t i = 0; i < l; ++i) {
        const double* src = dconcat.row(i) + h * cfg.d_v;
        std::copy(src, src + cfg.d_v, du.row(i));
      }
      const Matrix& a = lt.attn.a[h];
      const Matrix& v = lt.attn.v[h];
      Matrix dv = matmul_tn(a, du);
      add_inplace(g.w_v[h], matmul_tn(lt.x_in, dv));
      add_colsum(g.b_v[h], dv);
      add_inplace(dx_in, matmul_nt(dv, layer.w_v[h]));

      if (cfg.attention_kind == AttentionKind::kDot ||
          cfg.attention_kind == AttentionKind::kDense ||
          cfg.attention_kind == AttentionKind::kRandomLearned) {
        Matrix da = matmul_nt(du, v);
        Matrix dlog = softmax_rows_backward(a, da, t.valid);
        if (cfg.attention_kind == AttentionKind::kDot) {
          if (cfg.scale_dot) scale_inplace(dlog, 1.0 / std::sqrt(static_cast<double>(cfg.d_k)));
          const Matrix& k = lt.attn.k[h];
          const Matrix& q = lt.attn.q[h];
          Matrix dk = matmul(dlog, q);
          Matrix dq = matmul_tn(dlog, k);
          add_inplace(g.w_k[h], matmul_tn(lt.x_in, dk));
          add_colsum(g.b_k[h], dk);
          add_inplace(dx_in, matmul_nt(dk, layer.w_k[h]));
          add_inplace(g.w_q[h], matmul_tn(lt.x_in, dq));
          add_colsum(g.b_q[h], dq);
          add_inplace(dx_in, matmul_nt(dq, layer.w_q[h]));
        } else if (cfg.attention_kind == AttentionKind::kDense) {
          const Matrix& hmat = lt.attn.dense_h[h];
          // only the first l columns of w1/b1 contributed
          Matrix& gw1 = g.dense_w1[h];
          for (std::size_t i = 0; i < l; ++i) {
            const double* hrow = hmat.row(i);
            const double* drow = dlog.row(i);
            for (std::size_t r = 0; r < cfg.dense_inner; ++r) {
              double* w1row = gw1.row(r);
              const double hv = hrow[r];
              for (std::size_t j = 0; j < l; ++j) w1row[j] += hv * drow[j];
            }
          }
          for (std::size_t i = 0; i < l; ++i) {
            const double* drow = dlog.row(i);
            for (std::size_t j = 0; j < l; ++j) g.dense_b1[h][j] += drow[j];
          }
          // dH = dlog * W1[:, :l]^T
          Matrix dh(l, cfg.dense_inner);
          const Matrix& w1 = layer.dense_w1[h];
          for (std::size_t i = 0; i < l; ++i) {
            const double* drow = dlog.row(i);
            double* dhrow = dh.row(i);
            for (std::size_t r = 0; r < cfg.dense_inner; ++r) {
              const double* w1row = w1.row(r);
              double acc = 0.0;
              for (std::size_t j = 0; j < l; ++j) acc += drow[j] * w1row[j];
              dhrow[r] = acc;
            }
          }
          for (std::size_t i = 0; i < dh.data.size(); ++i)
            if (hmat.data[i] <= 0.0) dh.data[i] = 0.0;
          add_inplace(g.dense_w2[h], matmul_tn(lt.x_in, dh));
          add_colsum(g.dense_b2[h], dh);
          add_inplace(dx_in, matmul_nt(dh, layer.dense_w2[h]));
        } else {  // random_learned
          Matrix& gr = g.rand_logits[h];
          for (std::size_t i = 0; i < t.valid; ++i) {
            const double* drow = dlog.row(i);
            double* grow = gr.row(i);
            for (std::size_t j = 0; j < l; ++j) grow[j] += drow[j];
          }
        }
      }
    }
    dx = std::move(dx_in);
  }
  if (d_emb) *d_emb = dx;
}

void save_checkpoint(const std::string& path, ModelParams& model, const EmbedderConfig& embedder,
                     UnitLevel level) {
  std::vector<TensorRef> refs = tensor_refs(model);
  nlohmann::json manifest;
  manifest["format"] = "treesumm-checkpoint-v1";
  manifest["config"] = model.cfg;
  manifest["embedder"] = {{"mode", EmbedderConfig::mode_name(embedder.mode)},
                          {"dims", embedder.dims}};
  manifest["level"] = to_string(level);
  nlohmann::json tensors = nlohmann::json::array();
  std::size_t offset = 0;
  for (const TensorRef& t : refs) {
    tensors.push_back({{"name", t.name},
                       {"shape", t.shape},
                       {"offset", offset},
                       {"learnable", t.learnable}});
    offset += t.size * sizeof(double);
  }
  manifest["tensors"] = std::move(tensors);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint '" + path + "' for writing");
  out << manifest.dump() << '\n';
  for (const TensorRef& t : refs) {
    for (std::size_t i = 0; i < t.size; ++i) {
      std::uint64_t bits = std::bit_cast<std::uint64_t>(t.data[i]);
      unsigned char bytes[8];
      for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xff);
      out.write(reinterpret_cast<const char*>(bytes), 8);
    }
  }
  if (!out) throw IoError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw IoError("checkpoint '" + path + "' has no manifest line");
  nlohmann::json manifest = nlohmann::json::parse(line, nullptr, false);
  if (manifest.is_discarded()) throw ParseError("checkpoint manifest is not valid JSON");

  Checkpoint ckpt;
  EncoderConfig cfg = manifest.at("config").get<EncoderConfig>();
  ckpt.model = allocate_model(cfg);
  ckpt.embedder.mode =
      EmbedderConfig::mode_from_string(manifest.at("embedder").at("mode").get<std::string>());
  ckpt.embedder.dims = manifest.at("embedder").at("dims").get<std::size_t>();
  ckpt.level = unit_level_from_string(manifest.at("level").get<std::string>());

  std::vector<TensorRef> refs = tensor_refs(ckpt.model);
  const std::streampos payload_start = in.tellg();
  for (const auto& jt : manifest.at("tensors")) {
    const std::string name = jt.at("name").get<std::string>();
    auto it = std::find_if(refs.begin(), refs.end(),
                           [&](const TensorRef& r) { return r.name == name; });
    if (it == refs.end()) throw ParseError("checkpoint tensor '" + name + "' does not fit config");
    if (jt.at("shape").get<std::vector<std::size_t>>() != it->shape)
      throw ParseError("checkpoint tensor '" + name + "' shape disagrees with config");
    in.seekg(payload_start + static_cast<std::streamoff>(jt.at("offset").get<std::size_t>()));
    for (std::size_t i = 0; i < it->size; ++i) {
      unsigned char bytes[8];
      in.read(reinterpret_cast<char*>(bytes), 8);
      if (!in) throw IoError("checkpoint '" + path + "' truncated in tensor '" + name + "'");
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
      it->data[i] = std::bit_cast<double>(bits);
    }
  }
  return ckpt;
}

}  // namespace treesumm

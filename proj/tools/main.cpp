#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "json.hpp"
#include "treesumm/attention.hpp"
#include "treesumm/dep.hpp"
#include "treesumm/document.hpp"
#include "treesumm/embed.hpp"
#include "treesumm/encoder.hpp"
#include "treesumm/summarize.hpp"
#include "treesumm/synth.hpp"
#include "treesumm/train.hpp"
#include "treesumm/util.hpp"

namespace {

using namespace treesumm;

// ---------------------------------------------------------------------------
// option plumbing

struct CommonOpts {
  std::string corpus;
  std::string config;
  int threads = 1;
  std::size_t l_max = 512;
  std::size_t max_docs = 0;
};

std::vector<Document> load_docs(const CommonOpts& c) {
  CorpusOptions opts;
  opts.l_max = c.l_max;
  opts.max_docs = c.max_docs;
  return load_corpus_jsonl(c.corpus, opts);
}

const Document& find_doc(const std::vector<Document>& docs, const std::string& id) {
  if (id.empty()) {
    if (docs.size() == 1) return docs[0];
    throw Error("--doc is required when the corpus holds more than one document");
  }
  for (const Document& d : docs)
    if (d.id == id) return d;
  throw Error("document '" + id + "' not found in corpus");
}

std::unique_ptr<std::ofstream> open_out(const std::string& path) {
  if (path.empty()) return nullptr;
  auto out = std::make_unique<std::ofstream>(path);
  if (!*out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

std::ostream& stream_or_stdout(const std::unique_ptr<std::ofstream>& f) {
  return f ? *f : std::cout;
}

/// The JSON config file mirrors long flag names; explicit command-line
/// flags win because every option takes the last occurrence.
std::vector<std::string> inject_config(int argc, char** argv,
                                       const std::vector<std::string>& subcommands) {
  std::vector<std::string> args(argv, argv + argc);
  std::string config_path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (config_path.empty()) return args;

  std::ifstream in(config_path);
  if (!in) throw IoError("cannot open config file '" + config_path + "'");
  nlohmann::json j;
  in >> j;
  if (!j.is_object()) throw ParseError("config file must hold a JSON object of flag values");

  std::size_t sub_at = 0;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (std::find(subcommands.begin(), subcommands.end(), args[i]) != subcommands.end()) {
      sub_at = i;
      break;
    }
  }
  if (sub_at == 0) return args;  // no subcommand; let the parser complain

  std::vector<std::string> injected;
  for (const auto& [key, value] : j.items()) {
    std::string text;
    if (value.is_string()) text = value.get<std::string>();
    else if (value.is_boolean()) text = value.get<bool>() ? "true" : "false";
    else if (value.is_number()) text = value.dump();
    else throw ParseError("config key '" + key + "' must be a scalar");
    injected.push_back("--" + key + "=" + text);
  }
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub_at) + 1, injected.begin(),
              injected.end());
  return args;
}

void take_last_everywhere(CLI::App& app) {
  for (CLI::Option* opt : app.get_options())
    opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  for (CLI::App* sub : app.get_subcommands({})) take_last_everywhere(*sub);
}

void add_common(CLI::App* sub, CommonOpts& c) {
  sub->add_option("--corpus", c.corpus, "corpus JSONL file")->required();
  sub->add_option("--config", c.config, "JSON file of flag values");
  sub->add_option("--threads", c.threads, "worker cap (1 = serial)");
  sub->add_option("--l-max", c.l_max, "reject documents with more EDUs");
  sub->add_option("--max-docs", c.max_docs, "use only the first N documents");
}

// ---------------------------------------------------------------------------
// encoder/train flag bundles

struct ModelOpts {
  std::string attn = "tree_c";
  std::string preset = "default";
  std::string level = "edu";
  std::size_t heads = 1;
  std::size_t d_model = 0, d_k = 0, d_v = 0, d_q = 0, d_inner = 0, l_max = 0, dense_inner = 0,
              n_layers = 0;
  bool no_positional = false;
  bool no_scale_dot = false;
};

void add_model_opts(CLI::App* sub, ModelOpts& m) {
  sub->add_option("--attn", m.attn, "attention kind")
      ->check(CLI::IsMember({"dot", "dense", "random_learned", "random_fixed", "none", "tree_dep",
                             "tree_c", "tree_c_nuc"}));
  sub->add_option("--preset", m.preset)->check(CLI::IsMember({"default", "balanced"}));
  sub->add_option("--level", m.level)->check(CLI::IsMember({"edu", "sent"}));
  sub->add_option("--heads", m.heads, "attention heads per layer");
  sub->add_option("--d-model", m.d_model, "override model width");
  sub->add_option("--d-k", m.d_k);
  sub->add_option("--d-v", m.d_v);
  sub->add_option("--d-q", m.d_q);
  sub->add_option("--d-inner", m.d_inner);
  sub->add_option("--enc-l-max", m.l_max, "encoder length cap");
  sub->add_option("--dense-inner", m.dense_inner);
  sub->add_option("--n-layers", m.n_layers);
  sub->add_flag("--no-positional", m.no_positional, "drop sinusoidal positions");
  sub->add_flag("--no-scale-dot", m.no_scale_dot, "use unscaled dot-product logits");
}

EncoderConfig encoder_config_of(const ModelOpts& m) {
  const AttentionKind kind = attention_kind_from_string(m.attn);
  EncoderConfig cfg = m.preset == "balanced" ? EncoderConfig::preset_balanced(kind, m.heads)
                                             : EncoderConfig::preset_default(kind, m.heads);
  if (m.d_model) cfg.d_model = m.d_model;
  if (m.d_k) cfg.d_k = m.d_k;
  if (m.d_v) cfg.d_v = m.d_v;
  if (m.d_q) cfg.d_q = m.d_q;
  if (m.d_inner) cfg.d_inner = m.d_inner;
  if (m.l_max) cfg.l_max = m.l_max;
  if (m.dense_inner) cfg.dense_inner = m.dense_inner;
  if (m.n_layers) cfg.n_layers = m.n_layers;
  if (m.no_positional) cfg.use_positional = false;
  if (m.no_scale_dot) cfg.scale_dot = false;
  return cfg;
}

// ---------------------------------------------------------------------------
// subcommand bodies

int cmd_validate(const CommonOpts& c) {
  std::vector<Document> docs = load_docs(c);
  std::cout << "ok: " << docs.size() << " documents\n";
  return 0;
}

int cmd_synth(std::size_t num_docs, std::uint64_t seed, const std::string& out_path) {
  SynthConfig cfg;
  cfg.num_docs = num_docs;
  cfg.seed = seed;
  std::vector<Document> docs = make_synthetic_corpus(cfg);
  auto out = open_out(out_path);
  write_corpus_jsonl(stream_or_stdout(out), docs);
  return 0;
}

int cmd_attn(const CommonOpts& c, const std::string& doc_id, const std::string& kind,
             const std::string& level_name, std::uint64_t seed, const std::string& out_path,
             const TernaryWeights& weights) {
  std::vector<Document> docs = load_docs(c);
  const Document& doc = find_doc(docs, doc_id);
  const UnitLevel level = unit_level_from_string(level_name);
  const std::size_t n = doc.unit_count(level);

  AttentionMatrix a;
  if (kind == "identity" || kind == "none") {
    a = identity_attention(n);
  } else if (kind == "random" || kind == "random_fixed") {
    a = fixed_random_attention(n, seed);
  } else {
    if (kind == "tree_dep") {
      a = dep_attention(enforce_sentence_roots(to_dependency(doc.tree), doc));
    } else if (kind == "tree_c") {
      a = ctree_attention(doc.tree);
    } else if (kind == "tree_c_nuc") {
      a = ctree_nuc_attention(doc.tree, weights);
    } else {
      throw Error("unknown matrix kind '" + kind +
                  "' (tree_dep|tree_c|tree_c_nuc|identity|random)");
    }
    if (level == UnitLevel::kSentence) a = project_to_sentences(a, sentence_map(doc));
  }
  auto out = open_out(out_path);
  write_attention_tsv(stream_or_stdout(out), a, kind, doc.id);
  return 0;
}

int cmd_deptree(const CommonOpts& c, const std::string& doc_id, bool raw,
                const std::string& out_path) {
  std::vector<Document> docs = load_docs(c);
  const Document& doc = find_doc(docs, doc_id);
  DependencyTree dep = to_dependency(doc.tree);
  if (!raw) dep = enforce_sentence_roots(dep, doc);
  nlohmann::json j{{"doc_id", doc.id}, {"head", dep.head}, {"root", dep.root}};
  auto out = open_out(out_path);
  stream_or_stdout(out) << j.dump() << '\n';
  return 0;
}

int cmd_oracle(const CommonOpts& c, const std::string& level_name, std::size_t cap,
               const std::string& out_path) {
  std::vector<Document> docs = load_docs(c);
  const UnitLevel level = unit_level_from_string(level_name);
  const std::size_t unit_cap = cap > 0 ? cap : default_unit_cap(level);
  set_thread_budget(c.threads);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(docs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    Document& doc = docs[static_cast<std::size_t>(i)];
    doc.labels = oracle_labels(doc, level, unit_cap);
  }
  auto out = open_out(out_path);
  write_corpus_jsonl(stream_or_stdout(out), docs);
  return 0;
}

int cmd_params(const std::string& preset, const std::string& attn, std::size_t heads) {
  auto config_for = [&](AttentionKind kind, std::size_t h) {
    return preset == "balanced" ? EncoderConfig::preset_balanced(kind, h)
                                : EncoderConfig::preset_default(kind, h);
  };
  struct Row {
    std::string label;
    AttentionKind kind;
    std::size_t heads;
  };
  std::vector<Row> rows;
  if (attn.empty()) {
    rows = {{"dot", AttentionKind::kDot, 8},
            {"dot", AttentionKind::kDot, 1},
            {"dense", AttentionKind::kDense, 1},
            {"random_learned", AttentionKind::kRandomLearned, 1},
            {"random_fixed", AttentionKind::kRandomFixed, 1},
            {"none", AttentionKind::kNone, 1},
            {"tree_dep", AttentionKind::kTreeDep, 1},
            {"tree_c", AttentionKind::kTreeC, 1},
            {"tree_c_nuc", AttentionKind::kTreeCNuc, 1}};
  } else {
    rows = {{attn, attention_kind_from_string(attn), heads}};
  }
  const EncoderConfig base = config_for(AttentionKind::kDot, 1);
  std::printf("# preset=%s d_model=%zu n_layers=%zu l_max=%zu\n", preset.c_str(), base.d_model,
              base.n_layers, base.l_max);
  std::printf("%-16s %5s %12s %13s %8s %8s\n", "kind", "heads", "attn_params", "model_params",
              "attn_M", "model_M");
  for (const Row& row : rows) {
    const EncoderConfig cfg = config_for(row.kind, row.heads);
    const std::size_t attn_n = count_attention_params(cfg);
    const std::size_t model_n = count_model_params(cfg);
    std::printf("%-16s %5zu %12zu %13zu %7.1fM %7.1fM\n", row.label.c_str(), row.heads, attn_n,
                model_n, static_cast<double>(attn_n) / 1e6, static_cast<double>(model_n) / 1e6);
  }
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, double h) {
  bool ok = true;
  for (const GradCheckResult& r : grad_check(seed, h)) {
    std::printf("%-16s max_rel_err=%.3e\n", to_string(r.kind), r.max_rel_err);
    ok = ok && r.max_rel_err < 1e-4;
  }
  std::printf("%s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

int cmd_train(const CommonOpts& c, const ModelOpts& m, const TrainConfig& tc_in,
              const std::string& embedder_mode, const std::string& vectors_path,
              const std::string& ckpt_path, const std::string& loss_log_path) {
  std::vector<Document> docs = load_docs(c);
  const UnitLevel level = unit_level_from_string(m.level);
  EncoderConfig cfg = encoder_config_of(m);

  EmbedderConfig emb;
  emb.mode = EmbedderConfig::mode_from_string(embedder_mode);
  emb.dims = cfg.d_model;
  ExternalVectors ext;
  const ExternalVectors* ext_ptr = nullptr;
  if (emb.mode == EmbedderConfig::Mode::kExternal) {
    ext = ExternalVectors::load(vectors_path);
    ext_ptr = &ext;
  }

  TrainConfig tc = tc_in;
  tc.threads = c.threads;
  tc.max_docs = c.max_docs;
  TrainResult result = train(docs, cfg, tc, emb, level, ext_ptr);

  if (!loss_log_path.empty()) {
    std::ofstream log(loss_log_path);
    if (!log) throw IoError("cannot open loss log '" + loss_log_path + "'");
    log << "step,lr,loss\n";
    char buf[96];
    for (const StepLog& s : result.log) {
      std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", s.step, s.lr, s.loss);
      log << buf;
    }
  }
  if (!ckpt_path.empty()) save_checkpoint(ckpt_path, result.model, emb, level);
  std::printf("trained %zu steps; final loss %.6f\n", result.log.size(),
              result.log.empty() ? 0.0 : result.log.back().loss);
  return 0;
}

int cmd_eval(const CommonOpts& c, const std::string& ckpt_path, const std::string& level_flag,
             std::size_t k, bool restrict, const std::string& vectors_path,
             const std::string& csv_path, const std::string& json_path) {
  std::vector<Document> docs = load_docs(c);
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  const UnitLevel level = level_flag.empty() ? ckpt.level : unit_level_from_string(level_flag);
  const std::size_t top_k = k > 0 ? k : default_unit_cap(level);

  ExternalVectors ext;
  const ExternalVectors* ext_ptr = nullptr;
  if (ckpt.embedder.mode == EmbedderConfig::Mode::kExternal) {
    ext = ExternalVectors::load(vectors_path);
    ext_ptr = &ext;
  }
  EvalResult result = evaluate(ckpt, docs, level, top_k, restrict, c.threads, ext_ptr);
  if (!csv_path.empty()) {
    std::ofstream csv(csv_path);
    if (!csv) throw IoError("cannot open '" + csv_path + "'");
    write_eval_csv(csv, result);
  }
  const std::string summary = eval_summary_json(result, level, top_k);
  if (!json_path.empty()) {
    std::ofstream js(json_path);
    if (!js) throw IoError("cannot open '" + json_path + "'");
    js << summary << '\n';
  }
  std::cout << summary << '\n';
  return 0;
}

int cmd_lead(const CommonOpts& c, const std::string& level_name, std::size_t k,
             const std::string& csv_path) {
  std::vector<Document> docs = load_docs(c);
  const UnitLevel level = unit_level_from_string(level_name);
  const std::size_t top_k = k > 0 ? k : default_unit_cap(level);
  EvalResult result = evaluate_lead(docs, level, top_k);
  if (!csv_path.empty()) {
    std::ofstream csv(csv_path);
    if (!csv) throw IoError("cannot open '" + csv_path + "'");
    write_eval_csv(csv, result);
  }
  std::cout << eval_summary_json(result, level, top_k) << '\n';
  return 0;
}

int run(int argc, char** argv) {
  const std::vector<std::string> names = {"validate", "synth", "attn", "deptree", "oracle",
                                          "params",   "train", "eval", "lead",    "gradcheck"};
  std::vector<std::string> args = inject_config(argc, argv, names);

  CLI::App app{"discourse-tree fixed attention for extractive summarization"};
  app.require_subcommand(1);

  CommonOpts c;
  int rc = 0;

  auto* validate = app.add_subcommand("validate", "check a corpus file");
  add_common(validate, c);
  validate->callback([&] { rc = cmd_validate(c); });

  auto* synth = app.add_subcommand("synth", "generate the synthetic toy corpus");
  std::size_t synth_docs = 200;
  std::uint64_t synth_seed = 7;
  std::string synth_out;
  synth->add_option("--docs", synth_docs, "number of documents");
  synth->add_option("--seed", synth_seed);
  synth->add_option("--out", synth_out, "output JSONL (default stdout)");
  synth->add_option("--config", c.config);
  synth->callback([&] { rc = cmd_synth(synth_docs, synth_seed, synth_out); });

  auto* attn = app.add_subcommand("attn", "export a fixed attention matrix");
  std::string attn_doc, attn_kind = "tree_c", attn_level = "edu", attn_out;
  std::uint64_t attn_seed = 1;
  TernaryWeights weights;
  add_common(attn, c);
  attn->add_option("--doc", attn_doc, "document id");
  attn->add_option("--kind", attn_kind, "tree_dep|tree_c|tree_c_nuc|identity|random");
  attn->add_option("--level", attn_level)->check(CLI::IsMember({"edu", "sent"}));
  attn->add_option("--seed", attn_seed, "seed for the random kind");
  attn->add_option("--out", attn_out);
  attn->add_option("--w-nucleus", weights.nucleus);
  attn->add_option("--w-satellite", weights.satellite);
  attn->add_option("--w-root", weights.root);
  attn->add_option("--w-singleton", weights.singleton);
  attn->callback(
      [&] { rc = cmd_attn(c, attn_doc, attn_kind, attn_level, attn_seed, attn_out, weights); });

  auto* deptree = app.add_subcommand("deptree", "export the dependency tree as JSON");
  std::string dep_doc, dep_out;
  bool dep_raw = false;
  add_common(deptree, c);
  deptree->add_option("--doc", dep_doc);
  deptree->add_option("--out", dep_out);
  deptree->add_flag("--raw", dep_raw, "skip the sentence-root post-edit");
  deptree->callback([&] { rc = cmd_deptree(c, dep_doc, dep_raw, dep_out); });

  auto* oracle = app.add_subcommand("oracle", "write greedy oracle labels");
  std::string oracle_level = "edu", oracle_out;
  std::size_t oracle_cap = 0;
  add_common(oracle, c);
  oracle->add_option("--level", oracle_level)->check(CLI::IsMember({"edu", "sent"}));
  oracle->add_option("--cap", oracle_cap, "max selected units (default 6 EDUs / 3 sentences)");
  oracle->add_option("--out", oracle_out);
  oracle->callback([&] { rc = cmd_oracle(c, oracle_level, oracle_cap, oracle_out); });

  auto* params = app.add_subcommand("params", "parameter audit table");
  std::string params_preset = "default", params_attn;
  std::size_t params_heads = 1;
  params->add_option("--preset", params_preset)->check(CLI::IsMember({"default", "balanced"}));
  params->add_option("--attn", params_attn, "single kind (default: all nine rows)");
  params->add_option("--heads", params_heads);
  params->add_option("--config", c.config);
  params->callback([&] { rc = cmd_params(params_preset, params_attn, params_heads); });

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
  std::uint64_t gc_seed = 31;
  double gc_h = 1e-5;
  gradcheck->add_option("--seed", gc_seed);
  gradcheck->add_option("--fd-step", gc_h, "finite-difference step");
  gradcheck->add_option("--config", c.config);
  gradcheck->callback([&] { rc = cmd_gradcheck(gc_seed, gc_h); });

  auto* train_cmd = app.add_subcommand("train", "train the unit scorer");
  ModelOpts model_opts;
  TrainConfig tc;
  std::string train_embedder = "hashed_bow", train_vectors, train_ckpt, train_loss_log;
  add_common(train_cmd, c);
  add_model_opts(train_cmd, model_opts);
  train_cmd->add_option("--seed", tc.seed);
  train_cmd->add_option("--steps", tc.max_steps);
  train_cmd->add_option("--batch", tc.batch_size);
  train_cmd->add_option("--lr-factor", tc.lr_factor);
  train_cmd->add_option("--warmup", tc.warmup_steps);
  train_cmd->add_option("--embedder", train_embedder)
      ->check(CLI::IsMember({"hashed_bow", "external"}));
  train_cmd->add_option("--vectors", train_vectors, "external embedding JSONL");
  train_cmd->add_option("--out", train_ckpt, "checkpoint path");
  train_cmd->add_option("--loss-log", train_loss_log, "CSV of step,lr,loss");
  train_cmd->callback([&] {
    rc = cmd_train(c, model_opts, tc, train_embedder, train_vectors, train_ckpt, train_loss_log);
  });

  auto* eval_cmd = app.add_subcommand("eval", "score a corpus with a checkpoint");
  std::string eval_ckpt, eval_level, eval_vectors, eval_csv, eval_json;
  std::size_t eval_k = 0;
  bool eval_restrict = false;
  add_common(eval_cmd, c);
  eval_cmd->add_option("--checkpoint", eval_ckpt)->required();
  eval_cmd->add_option("--level", eval_level)->check(CLI::IsMember({"edu", "sent"}));
  eval_cmd->add_option("--k", eval_k, "units per summary (default 6 EDUs / 3 sentences)");
  eval_cmd->add_flag("--restrict", eval_restrict, "dependency-restriction post-processing");
  eval_cmd->add_option("--vectors", eval_vectors);
  eval_cmd->add_option("--out-csv", eval_csv);
  eval_cmd->add_option("--out-json", eval_json);
  eval_cmd->callback([&] {
    rc = cmd_eval(c, eval_ckpt, eval_level, eval_k, eval_restrict, eval_vectors, eval_csv,
                  eval_json);
  });

  auto* lead = app.add_subcommand("lead", "Lead baseline ROUGE");
  std::string lead_level = "edu", lead_csv;
  std::size_t lead_k = 0;
  add_common(lead, c);
  lead->add_option("--level", lead_level)->check(CLI::IsMember({"edu", "sent"}));
  lead->add_option("--k", lead_k);
  lead->add_option("--out-csv", lead_csv);
  lead->callback([&] { rc = cmd_lead(c, lead_level, lead_k, lead_csv); });

  take_last_everywhere(app);

  std::vector<const char*> cargs;
  cargs.reserve(args.size());
  for (const std::string& a : args) cargs.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

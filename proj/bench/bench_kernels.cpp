#include <benchmark/benchmark.h>

#include "treesumm/attention.hpp"
#include "treesumm/encoder.hpp"
#include "treesumm/matrix.hpp"
#include "treesumm/tree.hpp"
#include "treesumm/util.hpp"

using namespace treesumm;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  for (double& v : m.data) v = rng.normal();
  return m;
}

void bm_matmul_serial(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Matrix a = random_matrix(rng, n, n);
  Matrix b = random_matrix(rng, n, n);
  for (auto _ : state) {
    Matrix c = matmul_serial(a, b);
    benchmark::DoNotOptimize(c.data.data());
  }
}

void bm_matmul_parallel(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Matrix a = random_matrix(rng, n, n);
  Matrix b = random_matrix(rng, n, n);
  set_thread_budget(0);  // OpenMP default
  for (auto _ : state) {
    Matrix c = matmul(a, b);
    benchmark::DoNotOptimize(c.data.data());
  }
}

void bm_matmul_nt_serial(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  Matrix a = random_matrix(rng, n, n);
  Matrix b = random_matrix(rng, n, n);
  for (auto _ : state) {
    Matrix c = matmul_nt_serial(a, b);
    benchmark::DoNotOptimize(c.data.data());
  }
}

void bm_matmul_nt_parallel(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  Matrix a = random_matrix(rng, n, n);
  Matrix b = random_matrix(rng, n, n);
  set_thread_budget(0);
  for (auto _ : state) {
    Matrix c = matmul_nt(a, b);
    benchmark::DoNotOptimize(c.data.data());
  }
}

void bm_encoder_forward(benchmark::State& state) {
  EncoderConfig cfg;
  cfg.d_model = 128;
  cfg.n_layers = 2;
  cfg.d_k = cfg.d_v = cfg.d_q = 32;
  cfg.d_inner = 256;
  cfg.l_max = 128;
  cfg.attention_kind = AttentionKind::kTreeC;
  ModelParams model = init_model(cfg, 3);
  Rng rng(4);
  const std::size_t l = static_cast<std::size_t>(state.range(0));
  ConstituencyTree tree = random_tree(rng, l);
  AttentionMatrix fixed = ctree_attention(tree);
  Matrix emb = random_matrix(rng, l, cfg.d_model);
  for (auto _ : state) {
    std::vector<double> scores = encoder_forward(model, emb, &fixed, l);
    benchmark::DoNotOptimize(scores.data());
  }
}

void bm_ctree_matrix(benchmark::State& state) {
  Rng rng(5);
  ConstituencyTree tree = random_tree(rng, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    AttentionMatrix a = ctree_attention(tree);
    benchmark::DoNotOptimize(a.values.data.data());
  }
}

}  // namespace

BENCHMARK(bm_matmul_serial)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(bm_matmul_parallel)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(bm_matmul_nt_serial)->Arg(128)->Arg(256);
BENCHMARK(bm_matmul_nt_parallel)->Arg(128)->Arg(256);
BENCHMARK(bm_encoder_forward)->Arg(16)->Arg(64);
BENCHMARK(bm_ctree_matrix)->Arg(32)->Arg(128);

BENCHMARK_MAIN();

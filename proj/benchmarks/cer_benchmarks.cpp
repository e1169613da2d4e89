// Microbenchmarks for the paths that dominate training and evaluation time:
// the fused forward pass, the contrastive loss, late fusion, the metric
// sweep, and feature-cache IO.

#include <benchmark/benchmark.h>

#include <cstdio>
#include <filesystem>
#include <vector>

#include "cer/ensemble.hpp"
#include "cer/feature_cache.hpp"
#include "cer/fusion.hpp"
#include "cer/losses.hpp"
#include "cer/metrics.hpp"
#include "cer/rng.hpp"
#include "cer/taxonomy.hpp"

namespace {

using namespace cer;

MatD random_rows(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1.0,
                 double hi = 1.0) {
  MatD m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

MatD random_probs(Rng& rng, Eigen::Index rows) {
  MatD m(rows, kNumCompound);
  for (Eigen::Index i = 0; i < rows; ++i) {
    double sum = 0.0;
    for (int j = 0; j < kNumCompound; ++j) sum += m(i, j) = rng.uniform(1e-3, 1.0);
    m.row(i) /= sum;
  }
  return m;
}

void bm_macro_f1(benchmark::State& state) {
  Rng rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<int> truth(n), pred(n);
  for (std::size_t i = 0; i < n; ++i) {
    truth[i] = static_cast<int>(rng.below(7));
    pred[i] = static_cast<int>(rng.below(7));
  }
  for (auto _ : state) {
    const ConfusionMatrix cm = confusion(truth, pred);
    benchmark::DoNotOptimize(macro_f1(cm));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(bm_macro_f1)->Arg(920)->Arg(10000);

void bm_fused_forward(benchmark::State& state) {
  FusionConfig fc;
  fc.encoder_names = {"vit", "cnn"};
  fc.encoder_dims = {768, 2048}; // the shipped two-backbone fusion width
  fc.hidden_dims = {512};
  fc.dropout = 0.0;
  const FusionModel model(fc, 1);
  Rng rng(2);
  const MatD batch = random_rows(rng, state.range(0), 2816);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(batch).combined_probs.sum());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_fused_forward)->Arg(1)->Arg(128);

void bm_train_step(benchmark::State& state) {
  FusionConfig fc;
  fc.encoder_names = {"vit", "cnn"};
  fc.encoder_dims = {768, 2048};
  fc.hidden_dims = {512};
  fc.dropout = 0.0;
  FusionModel model(fc, 1);
  Rng rng(3);
  const Eigen::Index b = state.range(0);
  const MatD orig = random_rows(rng, b, 2816);
  const MatD v1 = random_rows(rng, b, 2816);
  const MatD v2 = random_rows(rng, b, 2816);
  std::vector<int> basic(static_cast<std::size_t>(b)), compound(static_cast<std::size_t>(b));
  for (Eigen::Index i = 0; i < b; ++i) {
    basic[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(7));
    compound[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(7));
  }
  std::vector<double> grad(model.params().size());
  const LossWeights w;
  for (auto _ : state) {
    const auto step = model.train_step(orig, v1, v2, basic, compound, w, &grad, nullptr);
    benchmark::DoNotOptimize(step.loss_total);
  }
  state.SetItemsProcessed(state.iterations() * b);
}
BENCHMARK(bm_train_step)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void bm_nt_xent(benchmark::State& state) {
  Rng rng(4);
  const Eigen::Index b = state.range(0);
  const MatD z1 = random_rows(rng, b, 128);
  const MatD z2 = random_rows(rng, b, 128);
  for (auto _ : state) benchmark::DoNotOptimize(contrastive_nt_xent(z1, z2, 0.07));
  state.SetItemsProcessed(state.iterations() * b);
}
BENCHMARK(bm_nt_xent)->Arg(32)->Arg(128);

void bm_fuse_probs(benchmark::State& state) {
  Rng rng(5);
  std::vector<MatD> members;
  for (int m = 0; m < 4; ++m) members.push_back(random_probs(rng, state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(fuse_probs(members, {}).sum());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_fuse_probs)->Arg(920)->Arg(10000);

void bm_cache_roundtrip(benchmark::State& state) {
  Rng rng(6);
  const MatF features = random_rows(rng, state.range(0), 768).cast<float>();
  const auto path =
      (std::filesystem::temp_directory_path() / "cer_bench_cache.cerf").string();
  for (auto _ : state) {
    write_feature_cache(features, path);
    benchmark::DoNotOptimize(read_feature_cache(path).sum());
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(features.size()) *
                          static_cast<std::int64_t>(sizeof(float)) * 2);
  std::remove(path.c_str());
}
BENCHMARK(bm_cache_roundtrip)->Arg(1000);

} // namespace

BENCHMARK_MAIN();

// Serial reference vs. OpenMP batch kernels on a synthetic click batch.
//
//   ./adnfm_bench --benchmark_filter=Backward
//
// The parallel kernels reduce fixed 32-sample chunks in order, so their
// output is independent of the thread count.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <map>

#include "adnfm/data.hpp"
#include "adnfm/model.hpp"
#include "adnfm/train.hpp"

namespace {

struct Setup {
  adnfm::Dataset ds;
  adnfm::ModelParams params;
  adnfm::Batch batch;
};

const Setup& setup(std::size_t batch_size) {
  static std::map<std::size_t, Setup> cache;
  if (auto it = cache.find(batch_size); it != cache.end()) return it->second;
  adnfm::SynthOptions opts;
  opts.n = 8192;
  Setup s;
  s.ds = adnfm::synth_interactions(opts).dataset;
  s.params = adnfm::init_params(adnfm::ModelKind::kAdnFm, {10, 32, 3, 32}, *s.ds.schema, 1);
  std::vector<std::size_t> ids(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) ids[i] = i;
  s.batch = adnfm::make_batch(s.ds, ids);
  return cache.emplace(batch_size, std::move(s)).first->second;
}

void BM_BackwardSerial(benchmark::State& state) {
  const Setup& s = setup(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(adnfm::backward_serial(s.params, s.batch, adnfm::Task::kCtr));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_BackwardParallel(benchmark::State& state) {
  const Setup& s = setup(static_cast<std::size_t>(state.range(0)));
  omp_set_num_threads(static_cast<int>(state.range(1)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(adnfm::backward(s.params, s.batch, adnfm::Task::kCtr));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_PredictAll(benchmark::State& state) {
  const Setup& s = setup(256);
  omp_set_num_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(adnfm::predict_all(s.params, s.ds));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.ds.size()));
}

}  // namespace

BENCHMARK(BM_BackwardSerial)->Arg(256)->Arg(2048);
BENCHMARK(BM_BackwardParallel)->ArgsProduct({{256, 2048}, {1, 2, 4}});
BENCHMARK(BM_PredictAll)->Arg(1)->Arg(2)->Arg(4);

BENCHMARK_MAIN();

// Serial (threads=1) against OpenMP (threads=N) for the graph-level parallel
// kernels. Outputs are bitwise identical across thread counts; see test_train.
#include <benchmark/benchmark.h>
#include <omp.h>

#include <filesystem>
#include <numeric>
#include <sstream>

#include "cli.hpp"
#include "cpgraph/generators.hpp"
#include "cpgraph/train.hpp"

namespace {

const std::vector<cpg::Sample>& corpus() {
  static const auto samples = [] {
    std::vector<cpg::LabeledExample> ex;
    for (std::uint64_t k = 0; k < 16; ++k) {
      auto [sat, unsat] = cpg::generate_pair(cpg::Problem::sat, 5 + static_cast<int>(k % 4), 99, k);
      ex.push_back(cpg::encode_example(sat));
      ex.push_back(cpg::encode_example(unsat));
    }
    return cpg::make_samples(ex);
  }();
  return samples;
}

std::vector<std::size_t> all_indices() {
  std::vector<std::size_t> idx(corpus().size());
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

void BM_BatchGradient(benchmark::State& state) {
  const auto params = cpg::init_params(32, 8, 1);
  const auto idx = all_indices();
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(cpg::batch_gradient(corpus(), idx, params, threads));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(idx.size()));
}

void BM_Predict(benchmark::State& state) {
  const auto params = cpg::init_params(32, 8, 1);
  const auto idx = all_indices();
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(cpg::predict(corpus(), idx, params, threads));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(idx.size()));
}

void BM_GenerateCli(benchmark::State& state) {
  const auto out = (std::filesystem::temp_directory_path() / "cpgraph_bench.jsonl").string();
  const std::vector<std::string> args = {"--threads", std::to_string(state.range(0)), "generate", "sat", "--vars",
                                         "8..12", "--pairs", "64", "--seed", "5", "-o", out};
  std::ostringstream sink;
  for (auto _ : state)
    if (cpg::cli::run(args, sink, sink) != 0) state.SkipWithError("generate failed");
  std::filesystem::remove(out);
  state.SetItemsProcessed(state.iterations() * 64);
}

void thread_counts(benchmark::internal::Benchmark* b) {
  b->Arg(1);
  if (omp_get_max_threads() > 1) b->Arg(omp_get_max_threads());
  b->Unit(benchmark::kMillisecond)->UseRealTime();
}

}  // namespace

BENCHMARK(BM_BatchGradient)->Apply(thread_counts);
BENCHMARK(BM_Predict)->Apply(thread_counts);
BENCHMARK(BM_GenerateCli)->Apply(thread_counts);

BENCHMARK_MAIN();

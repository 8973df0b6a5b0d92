// Serial reference vs OpenMP batch evaluation of the kernel conditional CDF,
// plus the parallel efficiency recovery.

#include <cmath>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "matchfn/dgp.hpp"
#include "matchfn/identify.hpp"
#include "matchfn/kernel.hpp"

using namespace matchfn;

namespace {

struct Fixture {
  ScaledPanel panel;
  std::vector<kernel::CdfQuery> queries;
};

Fixture make_fixture(std::size_t periods, std::size_t queries) {
  auto spec = dgp::default_validation_spec(0.5, 1);
  spec.periods = periods;
  Fixture f{ScaledPanel(dgp::simulate(spec).panel), {}};
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto h = f.panel.hires_support();
  for (std::size_t k = 0; k < queries; ++k) {
    f.queries.push_back({h.front() + u(gen) * (h.back() - h.front()), f.panel.points()[k % f.panel.size()]});
  }
  return f;
}

void BM_CdfReference(benchmark::State& state) {
  const auto f = make_fixture(static_cast<std::size_t>(state.range(0)), 4096);
  const kernel::KernelConfig c;
  for (auto _ : state) benchmark::DoNotOptimize(kernel::reference::conditional_cdf_batch(f.panel, f.queries, c));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.queries.size()));
}

void BM_CdfBatch(benchmark::State& state) {
  const auto f = make_fixture(static_cast<std::size_t>(state.range(0)), 4096);
  const kernel::KernelConfig c;
  const int threads = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(kernel::conditional_cdf_batch(f.panel, f.queries, c, threads));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.queries.size()));
}

void BM_RecoverSerial(benchmark::State& state) {
  auto spec = dgp::default_validation_spec(0.5, 3);
  spec.periods = static_cast<std::size_t>(state.range(0));
  const auto panel = dgp::simulate(spec).panel;
  const auto base = identify::BasePoint::at(panel, 0);
  identify::EstimationConfig cfg;
  cfg.max_flagged_share = 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(identify::recover_efficiency_serial(panel, base, cfg));
}

void BM_RecoverParallel(benchmark::State& state) {
  auto spec = dgp::default_validation_spec(0.5, 3);
  spec.periods = static_cast<std::size_t>(state.range(0));
  const auto panel = dgp::simulate(spec).panel;
  const auto base = identify::BasePoint::at(panel, 0);
  identify::EstimationConfig cfg;
  cfg.max_flagged_share = 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(identify::recover_efficiency(panel, base, cfg, 0));
}

}  // namespace

BENCHMARK(BM_CdfReference)->Arg(50)->Arg(400);
BENCHMARK(BM_CdfBatch)->Args({50, 1})->Args({50, 0})->Args({400, 1})->Args({400, 0});
BENCHMARK(BM_RecoverSerial)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RecoverParallel)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include "vreml/graph.hpp"
#include "vreml/ingest.hpp"
#include "vreml/oracle.hpp"
#include "vreml/rng.hpp"
#include "vreml/simulate.hpp"
#include "vreml/vreml.hpp"

namespace {

vreml::SimDraw draw_for(int n0) {
  vreml::SimConfig config;
  config.n0 = n0;
  config.seed = 1;
  config.n_sim = 1;
  return vreml::generate(config, 0);
}

void BM_Fit(benchmark::State& state) {
  const vreml::SimDraw draw = draw_for(static_cast<int>(state.range(0)));
  vreml::FitConfig config;
  config.tol = 1e-8;
  config.max_sweeps = 500;
  for (auto _ : state) {
    benchmark::DoNotOptimize(vreml::fit(draw.model, draw.icar, config));
  }
  state.SetLabel("n=" + std::to_string(draw.model.n()));
}
BENCHMARK(BM_Fit)->Arg(7)->Arg(10)->Arg(15)->Unit(benchmark::kMillisecond);

void BM_Sweep(benchmark::State& state) {
  const vreml::SimDraw draw = draw_for(static_cast<int>(state.range(0)));
  vreml::FitConfig config;
  config.tol = 1e-30;
  config.max_sweeps = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(vreml::fit(draw.model, draw.icar, config));
  }
  state.SetLabel("n=" + std::to_string(draw.model.n()));
}
BENCHMARK(BM_Sweep)->Arg(7)->Arg(15)->Arg(22)->Unit(benchmark::kMillisecond);

void BM_RestrictedLoglik(benchmark::State& state) {
  const vreml::SimDraw draw = draw_for(static_cast<int>(state.range(0)));
  double tau = 1.0;
  for (auto _ : state) {
    tau = tau < 4.0 ? tau * 1.01 : 1.0;  // defeat caching across iterations
    benchmark::DoNotOptimize(vreml::restricted_loglik(tau, 0.7, draw.model, draw.icar));
  }
}
BENCHMARK(BM_RestrictedLoglik)->Arg(7)->Arg(15)->Unit(benchmark::kMillisecond);

void BM_ExactRemlMaximize(benchmark::State& state) {
  const vreml::SimDraw draw = draw_for(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        vreml::maximize(vreml::OracleMethod::exact_reml, draw.model, draw.icar));
  }
}
BENCHMARK(BM_ExactRemlMaximize)->Arg(5)->Arg(7)->Unit(benchmark::kMillisecond);

void BM_GenerateDraw(benchmark::State& state) {
  vreml::SimConfig config;
  config.n0 = static_cast<int>(state.range(0));
  config.seed = 3;
  config.n_sim = 1;
  int replication = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(vreml::generate(config, replication++ % 64));
  }
}
BENCHMARK(BM_GenerateDraw)->Arg(7)->Arg(15)->Unit(benchmark::kMillisecond);

void BM_BinCells(benchmark::State& state) {
  vreml::CounterRng rng(7, 0);
  vreml::CellTable table;
  const int rows = static_cast<int>(state.range(0));
  table.rows.reserve(static_cast<size_t>(rows));
  for (int i = 0; i < rows; ++i) {
    vreml::CellRow row;
    row.x = 10.0 * rng.uniform();
    row.y = 10.0 * rng.uniform();
    row.count = std::floor(8.0 * rng.uniform());
    row.library_size = 100.0 * rng.uniform();
    table.rows.push_back(row);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(vreml::bin_cells(table, vreml::GridSpec::per_side(10, 10)));
  }
}
BENCHMARK(BM_BinCells)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

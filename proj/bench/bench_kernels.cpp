#include <benchmark/benchmark.h>

#include "sgldlab/certify.hpp"
#include "sgldlab/data.hpp"
#include "sgldlab/fokker_planck.hpp"
#include "sgldlab/loss_models.hpp"
#include "sgldlab/sgld.hpp"

using namespace sgldlab;

namespace {

SGLDConfig bench_config() {
  SGLDConfig c;
  c.eta = 0.05;
  c.beta = 4.0;
  c.n = 100;
  c.k = 10;
  c.T = 1000;
  c.d = 4;
  c.s_sq = 1.0;
  c.seed = 7;
  c.strict_mode = false;
  return c;
}

template <bool Parallel>
void BM_ensemble(benchmark::State& st) {
  const auto model = make_logistic_ridge(1.0, 1.0, 4);
  const DataSampler sampler(*model);
  const auto cfg = bench_config();
  const TraceOptions opts{0, true, true};
  for (auto _ : st) {
    auto r = Parallel ? run_ensemble(cfg, *model, sampler, 8, 1, opts)
                      : run_ensemble_serial(cfg, *model, sampler, 8, 1, opts);
    benchmark::DoNotOptimize(r.traces.data());
  }
}

template <bool Parallel>
void BM_certify(benchmark::State& st) {
  const auto model = make_nonconvex_ridge(1.0, 0.5, 1.0, 4);
  for (auto _ : st) {
    auto r = Parallel ? certify(*model, 20000, 3) : certify_serial(*model, 20000, 3);
    benchmark::DoNotOptimize(r.checks.data());
  }
}

template <bool Parallel>
void BM_fp_step(benchmark::State& st) {
  const auto model = make_quadratic(1.0, 1.0, 1);
  const auto cells = static_cast<std::size_t>(st.range(0));
  const Grid1D g = default_grid(model->constants(), 4.0, cells);
  std::vector<double> F(cells);
  for (std::size_t i = 0; i < cells; ++i) F[i] = 0.5 * g.center(i) * g.center(i);
  const double dt = 0.9 * max_stable_dt(g, F, 4.0);
  DensityField rho = gaussian_density(g, 0.0, 1.0);
  for (auto _ : st) {
    rho = Parallel ? fp_step(g, rho, F, 4.0, dt) : fp_step_reference(g, rho, F, 4.0, dt);
    benchmark::DoNotOptimize(rho.values.data());
  }
}

}  // namespace

BENCHMARK(BM_ensemble<false>)->Name("ensemble/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ensemble<true>)->Name("ensemble/openmp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_certify<false>)->Name("certify/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_certify<true>)->Name("certify/openmp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_fp_step<false>)->Name("fp_step/serial")->Arg(512)->Arg(4096);
BENCHMARK(BM_fp_step<true>)->Name("fp_step/openmp")->Arg(512)->Arg(4096);

BENCHMARK_MAIN();

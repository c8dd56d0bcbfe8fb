#include <benchmark/benchmark.h>

#include "sshiba/engine.hpp"
#include "sshiba/evaluation.hpp"

using namespace sshiba;

namespace {

ObservationSet make_data(std::size_t n, bool with_binary) {
  SyntheticConfig c;
  c.n = n;
  c.k_true = 4;
  c.noise_tau = 10.0;
  c.seed = 3;
  c.views = {{ViewKind::kReal, 30, 0.0}, {ViewKind::kReal, 20, 0.0}};
  if (with_binary) c.views.push_back({ViewKind::kBinary, 10, 0.0});
  return generate_synthetic(c).data;
}

// One full sweep through the direct path; the state is reset each time so
// the cost does not drift as columns prune.
void BM_Sweep(benchmark::State& st) {
  const ObservationSet data = make_data(static_cast<std::size_t>(st.range(0)), st.range(1) != 0);
  Hyperparameters hp;
  hp.k_init = 20;
  const ModelState init = init_state(data, hp, 0);
  for (auto _ : st) {
    ModelState s = init;
    sweep(s, data);
    benchmark::DoNotOptimize(s.z.mean.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_Sweep)->ArgsProduct({{100, 500, 2000}, {0, 1}})->Unit(benchmark::kMicrosecond);

void BM_Elbo(benchmark::State& st) {
  const ObservationSet data = make_data(static_cast<std::size_t>(st.range(0)), true);
  Hyperparameters hp;
  hp.k_init = 20;
  ModelState s = init_state(data, hp, 0);
  sweep(s, data);
  for (auto _ : st) benchmark::DoNotOptimize(compute_elbo(s, data));
}
BENCHMARK(BM_Elbo)->Arg(100)->Arg(2000)->Unit(benchmark::kMicrosecond);

void BM_Fit(benchmark::State& st) {
  const ObservationSet data = make_data(500, st.range(0) != 0);
  Hyperparameters hp;
  hp.k_init = 20;
  hp.restarts = 1;
  hp.max_iters = 200;
  for (auto _ : st) benchmark::DoNotOptimize(fit(data, hp).report.final_elbo);
}
BENCHMARK(BM_Fit)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

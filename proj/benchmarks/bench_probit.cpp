#include <benchmark/benchmark.h>

#include <random>

#include "sshiba/categorical_view.hpp"
#include "sshiba/numerics.hpp"

using namespace sshiba;

namespace {

Vector random_scores(Eigen::Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vector y(d);
  for (Eigen::Index j = 0; j < d; ++j) y(j) = normal(rng);
  return y;
}

void BM_Quadrature(benchmark::State& st) {
  const QuadratureRule rule = gauss_hermite_rule(static_cast<std::size_t>(st.range(0)));
  double a = 0.3;
  for (auto _ : st) {
    benchmark::DoNotOptimize(expect_std_normal([a](double u) { return std_normal_cdf(u + a); }, rule));
    a += 1e-9;
  }
}
BENCHMARK(BM_Quadrature)->Arg(10)->Arg(50)->Arg(100);

void BM_GaussHermiteRule(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(gauss_hermite_rule(static_cast<std::size_t>(st.range(0))));
}
BENCHMARK(BM_GaussHermiteRule)->Arg(50);

void BM_ClassProbs(benchmark::State& st) {
  const Vector y = random_scores(st.range(0), 1);
  for (auto _ : st) benchmark::DoNotOptimize(probit_class_probs(y));
}
BENCHMARK(BM_ClassProbs)->DenseRange(2, 14, 4);

void BM_TruncatedMoments(benchmark::State& st) {
  const Vector y = random_scores(st.range(0), 2);
  for (auto _ : st) benchmark::DoNotOptimize(truncated_moments(y, 0));
}
BENCHMARK(BM_TruncatedMoments)->DenseRange(2, 14, 4);

}  // namespace

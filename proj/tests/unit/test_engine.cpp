#include <cmath>

#include "conjugate.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "sshiba/engine.hpp"
#include "sshiba/error.hpp"
#include "sshiba/evaluation.hpp"

using namespace sshiba;

namespace {

ModelState single_real_state(const Matrix& x, std::size_t k) {
  const ObservationSet data = fixtures::observations({fixtures::view("x", ViewKind::kReal, x, 0, false)});
  return init_state(data, fixtures::small_hp(k), 0);
}

}  // namespace

TEST_CASE("update_z closed forms") {
  SUBCASE("zero loadings recover the prior") {
    ModelState s = single_real_state(Matrix::Random(3, 2), 2);
    s.views[0].w = GaussianFactor::shared(Matrix::Zero(2, 2), Matrix::Zero(2, 2));
    update_z(s);
    CHECK(s.z.cov.front() == Matrix::Identity(2, 2));
    CHECK(s.z.mean.isZero());
  }
  SUBCASE("identity loadings") {
    Matrix x(1, 2);
    x << 2, 0;
    ModelState s = single_real_state(x, 2);
    s.views[0].w = GaussianFactor::shared(Matrix::Identity(2, 2), Matrix::Zero(2, 2));
    s.views[0].tau = GammaFactor::constant(1, 1.0, 1.0);
    s.views[0].b = GaussianFactor::diagonal(Matrix::Zero(1, 2), Vector::Zero(2));
    update_z(s);
    CHECK(oracle::max_abs_diff(s.z.cov.front(), 0.5 * Matrix::Identity(2, 2)) < 1e-15);
    CHECK(s.z.mean(0, 0) == doctest::Approx(1.0));
    CHECK(s.z.mean(0, 1) == doctest::Approx(0.0));
  }
}

TEST_CASE("update_w closed forms") {
  SUBCASE("zero centered data") {
    ModelState s = single_real_state(Matrix::Zero(4, 3), 2);
    s.views[0].b = GaussianFactor::diagonal(Matrix::Zero(1, 3), Vector::Zero(3));
    s.views[0].alpha = GammaFactor::constant(2, 3.0, 1.0);
    update_w(s, 0);
    CHECK(s.views[0].w.mean.isZero());
  }
  SUBCASE("unit precision row") {
    Matrix x(2, 1);
    x << 2, 0;
    const ObservationSet data = fixtures::observations({fixtures::view("x", ViewKind::kReal, x)});
    ModelState s = init_state(data, fixtures::small_hp(2), 0);
    // Z^T Z = I, Z^T x = (2, 0)
    s.z = GaussianFactor::shared(Matrix::Identity(2, 2), Matrix::Zero(2, 2));
    s.views[0].alpha = GammaFactor::constant(2, 1.0, 1.0);
    s.views[0].gamma = GammaFactor::constant(1, 1.0, 1.0);
    s.views[0].tau = GammaFactor::constant(1, 1.0, 1.0);
    s.views[0].b = GaussianFactor::diagonal(Matrix::Zero(1, 1), Vector::Zero(1));
    update_w(s, 0);
    CHECK(oracle::max_abs_diff(s.views[0].w.row_cov(0), 0.5 * Matrix::Identity(2, 2)) < 1e-14);
    CHECK(s.views[0].w.mean(0, 0) == doctest::Approx(1.0));
    CHECK(std::abs(s.views[0].w.mean(0, 1)) < 1e-14);
  }
}

TEST_CASE("update_b closed forms") {
  Matrix x(1, 2);
  x << 2, -2;
  ModelState s = single_real_state(x, 1);
  s.views[0].w = GaussianFactor::shared(Matrix::Zero(2, 1), Matrix::Zero(1, 1));
  s.views[0].tau = GammaFactor::constant(1, 1.0, 1.0);
  update_b(s, 0);
  CHECK(s.views[0].b.row_variance(0) == Vector::Constant(2, 0.5));
  CHECK(s.views[0].b.mean(0, 0) == doctest::Approx(1.0));
  CHECK(s.views[0].b.mean(0, 1) == doctest::Approx(-1.0));

  ModelState zero = single_real_state(Matrix::Zero(3, 2), 1);
  zero.views[0].w = GaussianFactor::shared(Matrix::Zero(2, 1), Matrix::Zero(1, 1));
  update_b(zero, 0);
  CHECK(zero.views[0].b.mean.isZero());
}

TEST_CASE("gamma updates: shapes and empty loadings") {
  const ObservationSet data = fixtures::observations({fixtures::view("x", ViewKind::kReal, Matrix::Random(10, 4))});
  Hyperparameters hp = fixtures::small_hp(6);
  hp.a_alpha = 2.0;
  hp.b_alpha = 0.3;
  hp.a_gamma = 1.0;
  hp.b_gamma = 0.7;
  hp.a_tau = 1.0;
  ModelState s = init_state(data, hp, 0);
  s.views[0].w = GaussianFactor::shared(Matrix::Zero(4, 6), Matrix::Zero(6, 6));
  update_alpha(s, 0);
  update_gamma(s, 0);
  CHECK((s.views[0].alpha.shape.array() == 4.0).all());
  CHECK((s.views[0].alpha.rate.array() == 0.3).all());
  CHECK((s.views[0].gamma.shape.array() == 4.0).all());
  CHECK((s.views[0].gamma.rate.array() == 0.7).all());

  Matrix x3 = Matrix::Random(10, 3);
  const ObservationSet d3 = fixtures::observations({fixtures::view("x", ViewKind::kReal, x3)});
  ModelState t = init_state(d3, hp, 0);
  update_tau(t, 0);
  CHECK(t.views[0].tau.shape(0) == 16.0);
}

TEST_CASE("update_tau with exact reconstruction keeps the prior rate") {
  const Matrix z = Matrix::Random(5, 2);
  const Matrix w = Matrix::Random(3, 2);
  ModelState s = single_real_state(z * w.transpose(), 2);
  s.z = GaussianFactor::shared(z, Matrix::Zero(2, 2));
  s.views[0].w = GaussianFactor::shared(w, Matrix::Zero(2, 2));
  s.views[0].b = GaussianFactor::diagonal(Matrix::Zero(1, 3), Vector::Zero(3));
  update_tau(s, 0);
  CHECK(s.views[0].tau.rate(0) == doctest::Approx(s.hp.b_tau).epsilon(1e-10));
}

TEST_CASE("conjugate oracles for every update") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    CAPTURE(seed);
    CHECK(conjugate::check_z(seed) < 1e-10);
    CHECK(conjugate::check_w(seed) < 1e-10);
    CHECK(conjugate::check_b(seed) < 1e-10);
    CHECK(conjugate::check_alpha(seed) < 1e-12);
    CHECK(conjugate::check_gamma(seed) < 1e-12);
    CHECK(conjugate::check_tau(seed) < 1e-10);
  }
}

TEST_CASE("ELBO of a K = 0 model matches the i.i.d. Gaussian bound") {
  Matrix x(6, 2);
  x << 0.3, -1.2, 1.1, 0.4, -0.7, 2.0, 0.0, 0.9, 1.5, -0.1, 0.2, 0.6;
  const ObservationSet data = fixtures::observations({fixtures::view("x", ViewKind::kReal, x, 0, false)});
  Hyperparameters hp = fixtures::small_hp(1);
  hp.a_tau = 1.5;
  hp.b_tau = 0.8;
  ModelState s = init_state(data, hp, 0);
  fixtures::drop_all_columns(s);
  Vector m(2), var(2);
  m << 0.4, 0.3;
  var << 0.12, 0.2;
  s.views[0].b = GaussianFactor::diagonal(m.transpose(), var);
  s.views[0].tau.shape(0) = 5.5;
  s.views[0].tau.rate(0) = 3.25;
  const double ref = oracle::iid_gaussian_elbo(x, m, var, 5.5, 3.25, 1.5, 0.8);
  CHECK(compute_elbo(s, data) == doctest::Approx(ref).epsilon(1e-12));

  update_b(s, 0);
  update_tau(s, 0);
  const ModelState copy = s;
  CHECK(compute_elbo(s, data) == compute_elbo(copy, data));
  const double ref2 = oracle::iid_gaussian_elbo(x, s.views[0].b.mean.row(0).transpose(),
                                                s.views[0].b.row_variance(0), s.views[0].tau.shape(0),
                                                s.views[0].tau.rate(0), 1.5, 0.8);
  CHECK(compute_elbo(s, data) == doctest::Approx(ref2).epsilon(1e-12));
}

TEST_CASE("prune") {
  const ObservationSet data = fixtures::observations(
      {fixtures::view("a", ViewKind::kReal, Matrix::Random(6, 3)), fixtures::view("b", ViewKind::kReal, Matrix::Random(6, 2), 0, false)});
  ModelState s = init_state(data, fixtures::small_hp(4), 0);
  for (auto& v : s.views) v.w.mean.col(2).setConstant(1e-8);
  const Matrix z_before = s.z.mean;
  const std::vector<std::size_t> removed = prune(s);
  CHECK(removed == std::vector<std::size_t>{2});
  CHECK(s.k_current == 3);
  CHECK(s.z.mean.cols() == 3);
  CHECK(s.z.mean.col(2) == z_before.col(3));
  for (const auto& v : s.views) {
    CHECK(v.w.mean.cols() == 3);
    CHECK(v.alpha.size() == 3);
  }
  CHECK_NOTHROW(s.validate());

  const ModelState once = s;
  CHECK(prune(s).empty());
  CHECK(s.z.mean == once.z.mean);
  CHECK(s.k_current == once.k_current);

  for (auto& v : s.views) v.w.mean.setZero();
  try {
    prune(s);
    FAIL("expected AllPruned");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kAllPruned);
  }
}

TEST_CASE("convergence rule") {
  CHECK_FALSE(has_converged({-10.0}, 1e-8));
  CHECK(has_converged({-10.0, -10.0 + 1e-9}, 1e-8));
  CHECK_FALSE(has_converged({-10.0, -9.0}, 1e-8));
  CHECK(has_converged({1e6, 1e6 + 1e-3}, 1e-8));
  CHECK_FALSE(has_converged({1e6, 1e6 + 1.0}, 1e-8));
}

TEST_CASE("fit: iteration cap and identical restart streams") {
  SyntheticConfig c;
  c.n = 40;
  c.k_true = 2;
  c.noise_tau = 10.0;
  c.views = {{ViewKind::kReal, 5, 0.0}, {ViewKind::kReal, 3, 0.0}};
  const SyntheticData syn = generate_synthetic(c);

  Hyperparameters hp = fixtures::small_hp(4);
  hp.max_iters = 1;
  FitResult one = fit(syn.data, hp);
  CHECK(one.report.iterations == 1);
  CHECK_FALSE(one.report.converged);
  CHECK(one.state.elbo_trace.size() == 1);

  hp.max_iters = 200;
  hp.restarts = 2;
  hp.distinct_restart_streams = false;
  FitResult twin = fit(syn.data, hp);
  REQUIRE(twin.report.restart_elbos.size() == 2);
  CHECK(twin.report.restart_elbos[0] == twin.report.restart_elbos[1]);
  CHECK(twin.report.restart_chosen == 0);

  hp.distinct_restart_streams = true;
  hp.threads = 2;
  const FitResult a = fit(syn.data, hp);
  hp.threads = 1;
  const FitResult b = fit(syn.data, hp);
  CHECK(a.report.final_elbo == b.report.final_elbo);
  CHECK(a.state.z.mean == b.state.z.mean);
}

TEST_CASE("fit recovers noise-free rank-2 data") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    CAPTURE(seed);
    SyntheticConfig c;
    c.n = 100;
    c.k_true = 2;
    c.noise_tau = 1e12;
    c.seed = 100 + seed;
    c.views = {{ViewKind::kReal, 6, 0.0}, {ViewKind::kReal, 4, 0.0}};
    const SyntheticData syn = generate_synthetic(c);
    const FitResult r = fit(syn.data, fixtures::small_hp(8, seed));
    CHECK(r.report.converged);
    double num = 0.0, den = 0.0;
    for (std::size_t m = 0; m < 2; ++m) {
      num += (syn.data.views[m].values - expected_reconstruction(r.state, m)).squaredNorm();
      den += syn.data.views[m].values.squaredNorm();
    }
    CHECK(std::sqrt(num / den) < 0.05);
  }
}

TEST_CASE("pruning from K_init = 20 lands between K_true and 10") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CAPTURE(seed);
    SyntheticConfig c;
    c.n = 150;
    c.k_true = 3;
    c.noise_tau = 20.0;
    c.seed = 200 + seed;
    c.views = {{ViewKind::kReal, 8, 0.0}, {ViewKind::kReal, 6, 0.0}};
    const SyntheticData syn = generate_synthetic(c);
    Hyperparameters hp = fixtures::small_hp(20, seed);
    hp.max_iters = 3000;
    const FitResult r = fit(syn.data, hp);
    CHECK(r.report.k_final >= 3);
    CHECK(r.report.k_final <= 10);
    std::size_t dropped = 0;
    for (const auto& [it, cols] : r.report.pruned_at) dropped += cols.size();
    CHECK(dropped == 20 - r.report.k_final);
  }
}

TEST_CASE("Gram-matrix iteration follows the direct sweep") {
  SyntheticConfig c;
  c.n = 60;
  c.k_true = 2;
  c.noise_tau = 5.0;
  c.views = {{ViewKind::kReal, 5, 0.0}, {ViewKind::kReal, 4, 0.0}};
  const SyntheticData syn = generate_synthetic(c);
  Hyperparameters hp = fixtures::small_hp(5);
  hp.max_iters = 300;
  const FitResult gram = fit(syn.data, hp);
  hp.gram_updates = false;
  const FitResult direct = fit(syn.data, hp);
  REQUIRE(gram.state.elbo_trace.size() == direct.state.elbo_trace.size());
  for (std::size_t i = 0; i < gram.state.elbo_trace.size(); ++i) {
    CHECK(gram.state.elbo_trace[i] == doctest::Approx(direct.state.elbo_trace[i]).epsilon(1e-9));
  }
  CHECK(oracle::max_abs_diff(gram.state.z.mean, direct.state.z.mean) < 1e-6);
}

TEST_CASE("ELBO is non-decreasing on real + binary data") {
  SyntheticConfig c;
  c.n = 60;
  c.k_true = 2;
  c.noise_tau = 4.0;
  c.seed = 9;
  c.views = {{ViewKind::kReal, 5, 0.0}, {ViewKind::kBinary, 4, 0.0}};
  SyntheticData syn = generate_synthetic(c);
  mask_random_cells(syn.data, 0, 0.1, 1);
  mask_random_cells(syn.data, 1, 0.1, 2);
  Hyperparameters hp = fixtures::small_hp(6);
  hp.max_iters = 400;
  const FitResult r = fit(syn.data, hp);
  const auto& t = r.state.elbo_trace;
  for (std::size_t i = 1; i < t.size(); ++i) {
    CAPTURE(i);
    CHECK(t[i] >= t[i - 1] - 1e-9 * std::abs(t[i - 1]));
  }
}

TEST_CASE("fit reports AllPruned when every restart collapses") {
  SyntheticConfig c;
  c.n = 30;
  c.k_true = 1;
  c.views = {{ViewKind::kReal, 3, 0.0}};
  const SyntheticData syn = generate_synthetic(c);
  Hyperparameters hp = fixtures::small_hp(2);
  hp.prune_threshold = 1e6;  // everything collapses immediately
  try {
    fit(syn.data, hp);
    FAIL("expected AllPruned");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kAllPruned);
  }
}

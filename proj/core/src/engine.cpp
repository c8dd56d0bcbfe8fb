#include "sshiba/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <optional>
#include <thread>

#include "sshiba/binary_view.hpp"
#include "sshiba/categorical_view.hpp"
#include "sshiba/error.hpp"

namespace sshiba {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);
const double kLog2PiE = std::log(2.0 * std::numbers::pi * std::numbers::e);

// Below this fraction of ||<X> - 1<b>||^2 the expanded residual norm is
// recomputed elementwise.
constexpr double kExpansionFloor = 1e-6;

// tr(A B) for symmetric B.
double trace_product(const Matrix& a, const Matrix& b) {
  return a.cwiseProduct(b).sum();
}

}  // namespace

ViewMoments view_moments(const ModelState& state, std::size_t m) {
  ViewMoments latent;
  const auto k = state.z.cols();
  latent.ztz.resize(k, k);
  latent.ztz.noalias() = state.z.mean.transpose() * state.z.mean;
  latent.z_sum = state.z.mean.colwise().sum();
  return view_moments(state, m, latent);
}

ViewMoments view_moments(const ModelState& state, std::size_t m, const ViewMoments& same_z) {
  const ViewState& v = state.views[m];
  ViewMoments out;
  out.ztz = same_z.ztz;
  out.z_sum = same_z.z_sum;
  out.ztx.resize(state.z.cols(), v.x.mean.cols());
  out.ztx.noalias() = state.z.mean.transpose() * v.x.mean;
  out.x_sum = v.x.mean.colwise().sum();
  out.x_sq = v.x.mean.squaredNorm();
  return out;
}

Matrix latent_covariance(const ModelState& state) {
  const auto k = static_cast<Eigen::Index>(state.k_current);
  Matrix precision = Matrix::Identity(k, k);
  for (const ViewState& v : state.views) precision += v.tau_mean() * v.w.second_moment();
  precision = 0.5 * (precision + precision.transpose());
  return spd_inverse_jittered(precision);
}

void update_z(ModelState& state) {
  const auto k = static_cast<Eigen::Index>(state.k_current);
  const Eigen::Index n = state.z.rows();
  Matrix rhs = Matrix::Zero(n, k);
  for (const ViewState& v : state.views) {
    const double tau = v.tau_mean();
    rhs.noalias() += tau * v.x.mean * v.w.mean;
    rhs.rowwise() -= tau * (v.b.mean.row(0) * v.w.mean);
  }
  Matrix sigma = latent_covariance(state);
  state.z.mean = rhs * sigma;
  state.z.cov.assign(1, std::move(sigma));
  state.z.layout = CovarianceLayout::kShared;
}

void update_w(ModelState& state, std::size_t m) { update_w(state, m, view_moments(state, m)); }

void update_w(ModelState& state, std::size_t m, const ViewMoments& moments) {
  ViewState& v = state.views[m];
  const auto k = static_cast<Eigen::Index>(state.k_current);
  const auto d = static_cast<Eigen::Index>(v.spec.dim);
  const double tau = v.tau_mean();
  Matrix scaled_ztz =
      tau * (moments.ztz + static_cast<double>(state.z.rows()) * state.z.cov.front());
  scaled_ztz = 0.5 * (scaled_ztz + scaled_ztz.transpose());
  // K x D projection <Z>^T (<X> - 1<b>).
  const Matrix projection =
      moments.ztx - moments.z_sum.transpose() * v.b.mean.row(0);
  const Vector alpha = v.alpha.mean();

  if (!v.spec.feature_selection) {
    Matrix precision = scaled_ztz;
    precision.diagonal() += alpha;
    Matrix sigma = spd_inverse_jittered(precision);
    v.w.mean = tau * projection.transpose() * sigma;
    v.w.cov.assign(1, std::move(sigma));
    v.w.layout = CovarianceLayout::kShared;
    return;
  }

  // gamma_d A + B = A^{1/2} (gamma_d I + C) A^{1/2} with A = diag(alpha) and
  // C = A^{-1/2} B A^{-1/2} = U diag(lambda) U^T, so
  // Sigma_d = V diag(1 / (gamma_d + lambda)) V^T with V = A^{-1/2} U.
  const Vector inv_sqrt_alpha = alpha.cwiseSqrt().cwiseInverse();
  Matrix c = inv_sqrt_alpha.asDiagonal() * scaled_ztz * inv_sqrt_alpha.asDiagonal();
  c = 0.5 * (c + c.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(c);
  if (eig.info() != Eigen::Success) {
    raise(ErrorKind::kNotPositiveDefinite, "eigendecomposition failed in update_w");
  }
  const Vector& lambda = eig.eigenvalues();
  const Matrix basis = inv_sqrt_alpha.asDiagonal() * eig.eigenvectors();
  const Vector gamma = v.gamma.mean();

  v.w.layout = CovarianceLayout::kPerRow;
  v.w.cov.resize(static_cast<std::size_t>(d));
  v.w.mean.resize(d, k);
  for (Eigen::Index row = 0; row < d; ++row) {
    const Vector denom = lambda.array() + gamma(row);
    if ((denom.array() <= 0.0).any()) {
      raise(ErrorKind::kNotPositiveDefinite,
            "W row covariance is not positive definite (feature " + std::to_string(row) + ")");
    }
    const Matrix scaled = basis * denom.cwiseInverse().asDiagonal();
    Matrix sigma(k, k);
    sigma.noalias() = scaled * basis.transpose();
    sigma = 0.5 * (sigma + sigma.transpose()).eval();
    v.w.mean.row(row) = tau * (sigma * projection.col(row)).transpose();
    v.w.cov[static_cast<std::size_t>(row)] = std::move(sigma);
  }
}

void update_b(ModelState& state, std::size_t m) {
  ViewMoments sums;
  sums.x_sum = state.views[m].x.mean.colwise().sum();
  sums.z_sum = state.z.mean.colwise().sum();
  update_b(state, m, sums);
}

void update_b(ModelState& state, std::size_t m, const ViewMoments& moments) {
  ViewState& v = state.views[m];
  const auto n = static_cast<double>(state.z.rows());
  const double tau = v.tau_mean();
  const double variance = 1.0 / (n * tau + 1.0);
  const RowVector residual_sum = moments.x_sum - moments.z_sum * v.w.mean.transpose();
  v.b.mean = (tau * variance) * residual_sum;
  v.b.cov.assign(1, Vector::Constant(static_cast<Eigen::Index>(v.spec.dim), variance));
  v.b.layout = CovarianceLayout::kDiagonal;
}

void update_alpha(ModelState& state, std::size_t m) {
  ViewState& v = state.views[m];
  const auto& hp = state.hp;
  const Matrix w2 = v.w_second_moments();
  const Vector gamma = v.gamma_mean();
  const auto k = static_cast<Eigen::Index>(state.k_current);
  v.alpha.shape = Vector::Constant(k, hp.a_alpha + 0.5 * static_cast<double>(v.spec.dim));
  v.alpha.rate = (hp.b_alpha + 0.5 * (w2.transpose() * gamma).array()).matrix();
}

void update_gamma(ModelState& state, std::size_t m) {
  ViewState& v = state.views[m];
  if (!v.spec.feature_selection) return;
  const auto& hp = state.hp;
  const Matrix w2 = v.w_second_moments();
  const Vector alpha = v.alpha.mean();
  const auto d = static_cast<Eigen::Index>(v.spec.dim);
  v.gamma.shape = Vector::Constant(d, hp.a_gamma + 0.5 * static_cast<double>(state.k_current));
  v.gamma.rate = (hp.b_gamma + 0.5 * (w2 * alpha).array()).matrix();
}

double expected_squared_residual(const ModelState& state, std::size_t m) {
  return expected_squared_residual(state, m, view_moments(state, m));
}

std::optional<double> expanded_mean_residual(const ModelState& state, std::size_t m,
                                             const ViewMoments& moments) {
  const ViewState& v = state.views[m];
  const auto n = static_cast<double>(state.z.rows());
  const RowVector b = v.b.mean.row(0);
  const double centered_sq = moments.x_sq - 2.0 * b.dot(moments.x_sum) + n * b.squaredNorm();
  const Matrix& w = v.w.mean;
  const RowVector zw_sum = moments.z_sum * w.transpose();
  const double mean_sq = centered_sq -
                         2.0 * (w.cwiseProduct(moments.ztx.transpose()).sum() - zw_sum.dot(b)) +
                         trace_product(w.transpose() * w, moments.ztz);
  if (!(mean_sq > kExpansionFloor * centered_sq)) return std::nullopt;
  return mean_sq;
}

double expected_squared_residual(const ModelState& state, std::size_t m,
                                 const ViewMoments& moments) {
  const ViewState& v = state.views[m];
  const auto n = static_cast<double>(state.z.rows());
  const std::optional<double> expanded = expanded_mean_residual(state, m, moments);
  const double mean_sq =
      expanded ? *expanded : (v.x.mean - expected_reconstruction(state, m)).squaredNorm();
  double q = mean_sq + v.x.variance.sum();
  if (state.k_current > 0) {
    const Matrix& sigma_z = state.z.cov.front();
    const Matrix sum_sigma_w = v.w.summed_cov();
    q += n * trace_product(v.w.mean.transpose() * v.w.mean, sigma_z);
    q += trace_product(sum_sigma_w, moments.ztz);
    q += n * trace_product(sum_sigma_w, sigma_z);
  }
  q += n * v.b.cov.front().sum();
  return q;
}

void update_tau(ModelState& state, std::size_t m) {
  if (state.views[m].spec.kind == ViewKind::kCategorical) return;
  update_tau(state, m, view_moments(state, m));
}

void update_tau(ModelState& state, std::size_t m, const ViewMoments& moments) {
  ViewState& v = state.views[m];
  if (v.spec.kind == ViewKind::kCategorical) return;
  const auto& hp = state.hp;
  const double q = expected_squared_residual(state, m, moments);
  if (!(q >= 0.0) || !std::isfinite(q)) {
    raise(ErrorKind::kNegativeRate, "expected squared residual is " + std::to_string(q) +
                                        " for view " + std::to_string(m));
  }
  const double cells = static_cast<double>(state.z.rows()) * static_cast<double>(v.spec.dim);
  v.tau.shape = Vector::Constant(1, hp.a_tau + 0.5 * cells);
  v.tau.rate = Vector::Constant(1, hp.b_tau + 0.5 * q);
}

void impute_real(ModelState& state, const ObservationSet& data, std::size_t m) {
  ViewState& v = state.views[m];
  const ViewData& view = data.views[m];
  if (!view.any_missing()) return;
  const double variance = 1.0 / v.tau_mean();
  const Matrix fitted = expected_reconstruction(state, m);
  for (Eigen::Index i = 0; i < fitted.rows(); ++i) {
    for (Eigen::Index j = 0; j < fitted.cols(); ++j) {
      if (view.missing(i, j)) {
        v.x.mean(i, j) = fitted(i, j);
        v.x.variance(i, j) = variance;
      }
    }
  }
}

void update_pseudo_observations(ModelState& state, const ObservationSet& data, std::size_t m) {
  switch (state.views[m].spec.kind) {
    case ViewKind::kReal:
      impute_real(state, data, m);
      break;
    case ViewKind::kBinary:
      update_pseudo_x_binary(state, m);
      update_xi(state, m);
      impute_binary_labels(state, data, m);
      break;
    case ViewKind::kCategorical:
      update_pseudo_x_categorical(state, data, m);
      impute_categorical_labels(state, data, m);
      break;
  }
}

double compute_elbo(const ModelState& state, const ObservationSet& data) {
  std::vector<ViewMoments> moments;
  for (std::size_t m = 0; m < state.views.size(); ++m) {
    moments.push_back(m == 0 ? view_moments(state, m) : view_moments(state, m, moments.front()));
  }
  return compute_elbo(state, data, moments);
}

double compute_elbo(const ModelState& state, const ObservationSet& data,
                    const std::vector<ViewMoments>& moments) {
  const auto& hp = state.hp;
  const auto k = static_cast<double>(state.k_current);
  const auto n = static_cast<double>(state.z.rows());

  // Latent prior and entropy.
  const Matrix& sigma_z = state.z.cov.front();
  double elbo = -0.5 * n * k * kLog2Pi -
                0.5 * ((moments.empty() ? state.z.mean.squaredNorm() : moments.front().ztz.trace()) +
                       n * sigma_z.trace());
  elbo += 0.5 * n * (k * kLog2PiE + (state.k_current > 0 ? spd_logdet(sigma_z) : 0.0));

  for (std::size_t m = 0; m < state.views.size(); ++m) {
    const ViewState& v = state.views[m];
    const auto d = static_cast<double>(v.spec.dim);
    const double q = expected_squared_residual(state, m, moments[m]);

    // Gaussian likelihood of the (pseudo-)observations.
    if (v.spec.kind == ViewKind::kCategorical) {
      elbo += -0.5 * n * d * kLog2Pi - 0.5 * q;
    } else {
      const double elog_tau = v.tau.expected_log()(0);
      elbo += 0.5 * n * d * (elog_tau - kLog2Pi) - 0.5 * v.tau_mean() * q;
      elbo += v.tau.expected_log_prior(hp.a_tau, hp.b_tau) + v.tau.entropy();
    }

    // Double-ARD prior on W.
    const Matrix w2 = v.w_second_moments();
    const Vector alpha = v.alpha.mean();
    const Vector elog_alpha = v.alpha.expected_log();
    const Vector gamma = v.gamma_mean();
    const Vector elog_gamma =
        v.spec.feature_selection ? v.gamma.expected_log() : Vector(Vector::Zero(w2.rows()));
    elbo += -0.5 * d * k * kLog2Pi + 0.5 * d * elog_alpha.sum() + 0.5 * k * elog_gamma.sum() -
            0.5 * (gamma.transpose() * w2 * alpha)(0, 0);

    // Entropy of q(W).
    if (state.k_current > 0) {
      if (v.w.layout == CovarianceLayout::kPerRow) {
        for (const Matrix& c : v.w.cov) elbo += 0.5 * (k * kLog2PiE + spd_logdet(c));
      } else {
        elbo += 0.5 * d * (k * kLog2PiE + spd_logdet(v.w.cov.front()));
      }
    }

    // Bias prior and entropy.
    const Vector& var_b = v.b.cov.front();
    elbo += -0.5 * d * kLog2Pi - 0.5 * (v.b.mean.squaredNorm() + var_b.sum());
    elbo += 0.5 * (d * kLog2PiE + var_b.array().log().sum());

    elbo += v.alpha.expected_log_prior(hp.a_alpha, hp.b_alpha) + v.alpha.entropy();
    if (v.spec.feature_selection) {
      elbo += v.gamma.expected_log_prior(hp.a_gamma, hp.b_gamma) + v.gamma.entropy();
    }

    switch (v.spec.kind) {
      case ViewKind::kReal: {
        const ViewData& view = data.views[m];
        if (!view.any_missing()) break;
        for (Eigen::Index i = 0; i < v.x.variance.rows(); ++i) {
          for (Eigen::Index j = 0; j < v.x.variance.cols(); ++j) {
            if (view.missing(i, j) && v.x.variance(i, j) > 0.0) {
              elbo += 0.5 * (kLog2PiE + std::log(v.x.variance(i, j)));
            }
          }
        }
        break;
      }
      case ViewKind::kBinary:
        elbo += binary_view_bound(state, data, m);
        break;
      case ViewKind::kCategorical:
        break;
    }
  }
  return elbo;
}

std::vector<std::size_t> prune(ModelState& state) {
  const auto k = static_cast<Eigen::Index>(state.k_current);
  std::vector<std::size_t> removed;
  for (Eigen::Index col = 0; col < k; ++col) {
    double largest = 0.0;
    for (const ViewState& v : state.views) {
      if (v.w.rows() > 0) largest = std::max(largest, v.w.mean.col(col).cwiseAbs().maxCoeff());
    }
    if (largest < state.hp.prune_threshold) removed.push_back(static_cast<std::size_t>(col));
  }
  if (removed.empty()) return removed;
  if (static_cast<Eigen::Index>(removed.size()) == k) {
    raise(ErrorKind::kAllPruned, "every latent column fell below the prune threshold");
  }
  state.z.drop_columns(removed);
  for (ViewState& v : state.views) {
    v.w.drop_columns(removed);
    v.alpha.drop(removed);
  }
  state.k_current -= removed.size();
  return removed;
}

void sweep(ModelState& state, const ObservationSet& data) {
  ViewMoments latent;
  for (std::size_t m = 0; m < state.views.size(); ++m) {
    update_pseudo_observations(state, data, m);
    const ViewMoments moments = m == 0 ? view_moments(state, m) : view_moments(state, m, latent);
    if (m == 0) latent = moments;
    update_w(state, m, moments);
    update_b(state, m, moments);
    update_alpha(state, m);
    update_gamma(state, m);
    update_tau(state, m, moments);
  }
  update_z(state);
}

bool has_converged(const std::vector<double>& trace, double tol) {
  if (trace.size() < 2) return false;
  const double last = trace.back();
  return last - trace[trace.size() - 2] < tol * std::abs(last);
}

namespace {

// Views whose pseudo-observations never change (real, fully observed) admit
// an implicit <Z> = Xall C + 1 o, where Xall stacks every view's data. All
// moments then follow from the Gram matrix Xall^T Xall, independently of N.
class GramCache {
 public:
  static bool applicable(const ObservationSet& data) {
    return std::all_of(data.views.begin(), data.views.end(), [](const ViewData& v) {
      return v.spec.kind == ViewKind::kReal && !v.any_missing();
    });
  }

  explicit GramCache(const ModelState& state) {
    Eigen::Index total = 0;
    for (const ViewState& v : state.views) {
      offsets_.push_back(total);
      total += v.x.mean.cols();
    }
    xall_.resize(state.z.rows(), total);
    for (std::size_t m = 0; m < state.views.size(); ++m) {
      const Matrix& x = state.views[m].x.mean;
      xall_.middleCols(offsets_[m], x.cols()) = x;
    }
    gram_.resize(total, total);
    gram_.noalias() = xall_.transpose() * xall_;
    sums_ = xall_.colwise().sum();
    for (std::size_t m = 0; m < state.views.size(); ++m) {
      x_sq_.push_back(state.views[m].x.mean.squaredNorm());
    }
    explicit_moments(state);
  }

  const std::vector<ViewMoments>& moments() const { return moments_; }

  // Moments straight from a materialized <Z>.
  void explicit_moments(const ModelState& state) {
    moments_.clear();
    for (std::size_t m = 0; m < state.views.size(); ++m) {
      moments_.push_back(m == 0 ? view_moments(state, m) : view_moments(state, m, moments_.front()));
    }
    implicit_ = false;
  }

  // q(Z) update that leaves <Z> implicit.
  void update_z(ModelState& state) {
    const auto k = static_cast<Eigen::Index>(state.k_current);
    Matrix sigma = latent_covariance(state);
    coef_.resize(xall_.cols(), k);
    offset_ = RowVector::Zero(k);
    for (std::size_t m = 0; m < state.views.size(); ++m) {
      const ViewState& v = state.views[m];
      const double tau = v.tau_mean();
      coef_.middleRows(offsets_[m], v.w.rows()) = tau * v.w.mean * sigma;
      offset_ -= tau * (v.b.mean.row(0) * v.w.mean) * sigma;
    }
    state.z.cov.assign(1, std::move(sigma));
    state.z.layout = CovarianceLayout::kShared;
    implicit_ = true;
    refresh(state);
  }

  void drop_columns(ModelState& state, const std::vector<std::size_t>& removed) {
    if (!implicit_) {
      explicit_moments(state);
      return;
    }
    GaussianFactor f = GaussianFactor::shared(coef_, Matrix::Identity(coef_.cols(), coef_.cols()));
    f.drop_columns(removed);
    coef_ = f.mean;
    GaussianFactor g = GaussianFactor::shared(offset_, Matrix::Identity(offset_.cols(), offset_.cols()));
    g.drop_columns(removed);
    offset_ = g.mean;
    refresh(state);
  }

  // The expansion cancels only for near-noiseless fits; fall back to a
  // materialized <Z> there.
  void guard(ModelState& state) {
    for (std::size_t m = 0; m < state.views.size(); ++m) guard(state, m);
  }

  void guard(ModelState& state, std::size_t m) {
    if (!implicit_ || expanded_mean_residual(state, m, moments_[m])) return;
    materialize(state);
    explicit_moments(state);
  }

  void materialize(ModelState& state) const {
    if (!implicit_) return;
    state.z.mean.noalias() = xall_ * coef_;
    state.z.mean.rowwise() += offset_;
  }

 private:
  void refresh(ModelState& state) {
    const auto n = static_cast<double>(xall_.rows());
    const Matrix a = coef_.transpose() * gram_;  // K x Dtot
    const RowVector u = sums_ * coef_;
    Matrix ztz = a * coef_ + u.transpose() * offset_ + offset_.transpose() * u +
                 n * offset_.transpose() * offset_;
    ztz = 0.5 * (ztz + ztz.transpose()).eval();
    const RowVector z_sum = u + n * offset_;
    moments_.assign(state.views.size(), ViewMoments{});
    for (std::size_t m = 0; m < state.views.size(); ++m) {
      const Eigen::Index d = state.views[m].x.mean.cols();
      ViewMoments& out = moments_[m];
      out.ztz = ztz;
      out.z_sum = z_sum;
      out.ztx = a.middleCols(offsets_[m], d) + offset_.transpose() * sums_.middleCols(offsets_[m], d);
      out.x_sum = sums_.middleCols(offsets_[m], d);
      out.x_sq = x_sq_[m];
    }
    // Keep the stored shape conformal; the values are stale until materialize().
    if (state.z.mean.cols() != coef_.cols()) state.z.mean.resize(xall_.rows(), coef_.cols());
  }

  Matrix xall_;
  Matrix gram_;
  RowVector sums_;
  std::vector<double> x_sq_;
  std::vector<Eigen::Index> offsets_;
  Matrix coef_;
  RowVector offset_;
  bool implicit_ = false;
  std::vector<ViewMoments> moments_;
};

void gram_sweep(ModelState& state, GramCache& cache) {
  cache.guard(state);
  for (std::size_t m = 0; m < state.views.size(); ++m) {
    update_w(state, m, cache.moments()[m]);
    update_b(state, m, cache.moments()[m]);
    update_alpha(state, m);
    update_gamma(state, m);
    cache.guard(state, m);
    update_tau(state, m, cache.moments()[m]);
  }
  cache.update_z(state);
}

}  // namespace

FitResult fit_single(const ObservationSet& data, const Hyperparameters& hp,
                     std::size_t restart_index) {
  FitResult result{init_state(data, hp, restart_index), {}};
  ModelState& state = result.state;
  FitReport& report = result.report;
  report.restart_chosen = restart_index;
  std::optional<GramCache> gram;
  if (hp.gram_updates && GramCache::applicable(data)) gram.emplace(state);
  for (std::size_t it = 1; it <= hp.max_iters; ++it) {
    if (gram) {
      gram_sweep(state, *gram);
    } else {
      sweep(state, data);
    }
    std::vector<std::size_t> removed = prune(state);
    const bool pruned = !removed.empty();
    if (gram) {
      if (pruned) gram->drop_columns(state, removed);
      gram->guard(state);
      state.elbo_trace.push_back(compute_elbo(state, data, gram->moments()));
    } else {
      state.elbo_trace.push_back(compute_elbo(state, data));
    }
    if (pruned) report.pruned_at.emplace_back(it, std::move(removed));
    report.iterations = it;
    // Bounds of models with different latent dimension are not compared.
    if (!pruned && has_converged(state.elbo_trace, hp.convergence_rel_tol)) {
      report.converged = true;
      break;
    }
  }
  if (gram) gram->materialize(state);
  report.final_elbo = state.elbo_trace.back();
  report.k_final = state.k_current;
  return result;
}

FitResult fit(const ObservationSet& data, const Hyperparameters& hp) {
  data.validate();
  hp.validate();
  const std::size_t restarts = hp.restarts;
  std::vector<std::optional<FitResult>> results(restarts);
  std::vector<std::exception_ptr> errors(restarts);

  auto run = [&](std::size_t r) {
    try {
      results[r] = fit_single(data, hp, r);
    } catch (...) {
      errors[r] = std::current_exception();
    }
  };

  std::size_t workers = hp.threads != 0 ? hp.threads : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, restarts);
  if (workers == 1) {
    for (std::size_t r = 0; r < restarts; ++r) run(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (std::size_t r = next++; r < restarts; r = next++) run(r);
      });
    }
  }

  // Failed restarts are dropped unless none succeeded.
  std::optional<std::size_t> best;
  for (std::size_t r = 0; r < restarts; ++r) {
    if (errors[r]) continue;
    if (!best || results[r]->report.final_elbo > results[*best]->report.final_elbo) best = r;
  }
  if (!best) {
    try {
      std::rethrow_exception(errors.front());
    } catch (const Error& e) {
      throw Error(e.kind(), "restart 0: " + std::string(e.what()));
    }
  }
  FitResult chosen = std::move(*results[*best]);
  chosen.report.restart_chosen = *best;
  for (std::size_t r = 0; r < restarts; ++r) {
    chosen.report.restart_elbos.push_back(
        r == *best ? chosen.report.final_elbo
        : errors[r] ? std::numeric_limits<double>::quiet_NaN()
                    : results[r]->report.final_elbo);
  }
  return chosen;
}

}  // namespace sshiba

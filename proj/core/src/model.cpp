#include "sshiba/model.hpp"

#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "sshiba/error.hpp"

namespace sshiba {

std::string_view to_string(ViewKind kind) {
  switch (kind) {
    case ViewKind::kReal:
      return "real";
    case ViewKind::kBinary:
      return "binary";
    case ViewKind::kCategorical:
      return "categorical";
  }
  return "unknown";
}

ViewKind parse_view_kind(std::string_view text) {
  if (text == "real") return ViewKind::kReal;
  if (text == "binary") return ViewKind::kBinary;
  if (text == "categorical") return ViewKind::kCategorical;
  raise(ErrorKind::kParseError, "unknown view kind '" + std::string(text) + "'");
}

void ObservationSet::validate() const {
  if (views.empty()) {
    raise(ErrorKind::kInvalidData, "observation set has no views");
  }
  const auto n = static_cast<Eigen::Index>(n_samples);
  for (std::size_t m = 0; m < views.size(); ++m) {
    const ViewData& v = views[m];
    const std::string where = "view " + std::to_string(m) + " ('" + v.spec.name + "')";
    if (v.spec.dim < 1) {
      raise(ErrorKind::kInvalidData, where + ": dim must be >= 1");
    }
    const auto cols = v.spec.kind == ViewKind::kCategorical
                          ? Eigen::Index{1}
                          : static_cast<Eigen::Index>(v.spec.dim);
    if (v.spec.kind == ViewKind::kCategorical && v.spec.dim < 2) {
      raise(ErrorKind::kInvalidData, where + ": categorical views need dim >= 2");
    }
    if (v.values.rows() != n || v.values.cols() != cols) {
      raise(ErrorKind::kInvalidData,
            where + ": expected " + std::to_string(n) + "x" + std::to_string(cols) +
                " values, got " + std::to_string(v.values.rows()) + "x" +
                std::to_string(v.values.cols()));
    }
    if (v.missing.rows() != n || v.missing.cols() != cols) {
      raise(ErrorKind::kInvalidData, where + ": mask is not conformal with values");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        if (v.missing(i, j)) continue;
        const double value = v.values(i, j);
        if (!std::isfinite(value)) {
          raise(ErrorKind::kInvalidData, where + ": non-finite observed value");
        }
        if (v.spec.kind == ViewKind::kBinary && value != 0.0 && value != 1.0) {
          raise(ErrorKind::kInvalidData, where + ": binary entries must be 0 or 1");
        }
        if (v.spec.kind == ViewKind::kCategorical &&
            (value < 0.0 || value >= static_cast<double>(v.spec.dim) ||
             value != std::floor(value))) {
          raise(ErrorKind::kInvalidData,
                where + ": label " + std::to_string(value) + " outside {0, ..., " +
                    std::to_string(v.spec.dim - 1) + "}");
        }
      }
    }
  }
}

void Hyperparameters::validate() const {
  for (double p : {a_alpha, b_alpha, a_tau, b_tau, a_gamma, b_gamma}) {
    if (!(p > 0.0) || !std::isfinite(p)) {
      raise(ErrorKind::kInvalidData, "prior shape/rate parameters must be positive");
    }
  }
  if (k_init < 1) raise(ErrorKind::kInvalidData, "k_init must be >= 1");
  if (!(prune_threshold > 0.0)) raise(ErrorKind::kInvalidData, "prune_threshold must be > 0");
  if (!(convergence_rel_tol > 0.0 && convergence_rel_tol < 1.0)) {
    raise(ErrorKind::kInvalidData, "convergence_rel_tol must lie in (0, 1)");
  }
  if (max_iters < 1) raise(ErrorKind::kInvalidData, "max_iters must be >= 1");
  if (restarts < 1) raise(ErrorKind::kInvalidData, "restarts must be >= 1");
}

// ---------------------------------------------------------------------------
// GaussianFactor

GaussianFactor GaussianFactor::shared(Matrix mean, Matrix cov) {
  GaussianFactor f;
  f.mean = std::move(mean);
  f.layout = CovarianceLayout::kShared;
  f.cov.push_back(std::move(cov));
  return f;
}

GaussianFactor GaussianFactor::per_row(Matrix mean, std::vector<Matrix> cov) {
  GaussianFactor f;
  f.mean = std::move(mean);
  f.layout = CovarianceLayout::kPerRow;
  f.cov = std::move(cov);
  return f;
}

GaussianFactor GaussianFactor::diagonal(Matrix mean, Vector variances) {
  GaussianFactor f;
  f.mean = std::move(mean);
  f.layout = CovarianceLayout::kDiagonal;
  f.cov.push_back(std::move(variances));
  return f;
}

Matrix GaussianFactor::row_cov(Eigen::Index r) const {
  switch (layout) {
    case CovarianceLayout::kShared:
      return cov.front();
    case CovarianceLayout::kPerRow:
      return cov[static_cast<std::size_t>(r)];
    case CovarianceLayout::kDiagonal:
      return Matrix(cov.front().col(0).asDiagonal());
  }
  return {};
}

Vector GaussianFactor::row_variance(Eigen::Index r) const {
  switch (layout) {
    case CovarianceLayout::kShared:
      return cov.front().diagonal();
    case CovarianceLayout::kPerRow:
      return cov[static_cast<std::size_t>(r)].diagonal();
    case CovarianceLayout::kDiagonal:
      return cov.front().col(0);
  }
  return {};
}

Matrix GaussianFactor::summed_cov() const {
  const double n = static_cast<double>(rows());
  switch (layout) {
    case CovarianceLayout::kShared:
      return n * cov.front();
    case CovarianceLayout::kPerRow: {
      Matrix sum = Matrix::Zero(cols(), cols());
      for (const Matrix& c : cov) sum += c;
      return sum;
    }
    case CovarianceLayout::kDiagonal:
      return Matrix((n * cov.front().col(0)).asDiagonal());
  }
  return {};
}

Matrix GaussianFactor::second_moment() const {
  Matrix out = summed_cov();
  out.noalias() += mean.transpose() * mean;
  return out;
}

namespace {

Matrix drop_rows_cols(const Matrix& m, const std::vector<std::size_t>& drop,
                      bool rows, bool cols) {
  std::vector<Eigen::Index> keep_r, keep_c;
  auto keep = [&](Eigen::Index n, bool apply, std::vector<Eigen::Index>& out) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!apply || !std::binary_search(drop.begin(), drop.end(), static_cast<std::size_t>(i))) {
        out.push_back(i);
      }
    }
  };
  keep(m.rows(), rows, keep_r);
  keep(m.cols(), cols, keep_c);
  Matrix out(static_cast<Eigen::Index>(keep_r.size()), static_cast<Eigen::Index>(keep_c.size()));
  for (std::size_t i = 0; i < keep_r.size(); ++i) {
    for (std::size_t j = 0; j < keep_c.size(); ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(keep_r[i], keep_c[j]);
    }
  }
  return out;
}

}  // namespace

void GaussianFactor::drop_columns(const std::vector<std::size_t>& sorted_columns) {
  if (sorted_columns.empty()) return;
  mean = drop_rows_cols(mean, sorted_columns, false, true);
  if (layout == CovarianceLayout::kDiagonal) {
    cov.front() = drop_rows_cols(cov.front(), sorted_columns, true, false);
    return;
  }
  for (Matrix& c : cov) c = drop_rows_cols(c, sorted_columns, true, true);
}

bool GaussianFactor::valid() const {
  if (!mean.allFinite()) return false;
  auto psd_like = [](const Matrix& c, Eigen::Index k) {
    if (c.rows() != k || c.cols() != k || !c.allFinite()) return false;
    if (k == 0) return true;
    const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
    if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) return false;
    return (c.diagonal().array() >= 0.0).all();
  };
  switch (layout) {
    case CovarianceLayout::kShared:
      return cov.size() == 1 && psd_like(cov.front(), cols());
    case CovarianceLayout::kPerRow:
      if (cov.size() != static_cast<std::size_t>(rows())) return false;
      return std::all_of(cov.begin(), cov.end(),
                         [&](const Matrix& c) { return psd_like(c, cols()); });
    case CovarianceLayout::kDiagonal:
      return cov.size() == 1 && cov.front().rows() == cols() && cov.front().cols() == 1 &&
             cov.front().allFinite() && (cov.front().array() >= 0.0).all();
  }
  return false;
}

// ---------------------------------------------------------------------------
// GammaFactor

GammaFactor GammaFactor::constant(Eigen::Index n, double shape, double rate) {
  return GammaFactor{Vector::Constant(n, shape), Vector::Constant(n, rate)};
}

Vector GammaFactor::expected_log() const {
  Vector out(size());
  for (Eigen::Index i = 0; i < size(); ++i) {
    out(i) = boost::math::digamma(shape(i)) - std::log(rate(i));
  }
  return out;
}

double GammaFactor::entropy() const {
  double h = 0.0;
  for (Eigen::Index i = 0; i < size(); ++i) {
    const double a = shape(i);
    h += a - std::log(rate(i)) + std::lgamma(a) + (1.0 - a) * boost::math::digamma(a);
  }
  return h;
}

double GammaFactor::expected_log_prior(double prior_shape, double prior_rate) const {
  const Vector elog = expected_log();
  const Vector m = mean();
  const double norm = prior_shape * std::log(prior_rate) - std::lgamma(prior_shape);
  double total = 0.0;
  for (Eigen::Index i = 0; i < size(); ++i) {
    total += norm + (prior_shape - 1.0) * elog(i) - prior_rate * m(i);
  }
  return total;
}

void GammaFactor::drop(const std::vector<std::size_t>& sorted_indices) {
  if (sorted_indices.empty()) return;
  shape = drop_rows_cols(shape, sorted_indices, true, false);
  rate = drop_rows_cols(rate, sorted_indices, true, false);
}

bool GammaFactor::valid() const {
  return shape.size() == rate.size() && shape.allFinite() && rate.allFinite() &&
         (shape.array() > 0.0).all() && (rate.array() > 0.0).all();
}

// ---------------------------------------------------------------------------
// ViewState / ModelState

double ViewState::tau_mean() const { return tau.shape(0) / tau.rate(0); }

Matrix ViewState::w_second_moments() const {
  Matrix out = w.mean.cwiseAbs2();
  for (Eigen::Index d = 0; d < w.rows(); ++d) {
    out.row(d) += w.row_variance(d).transpose();
  }
  return out;
}

Vector ViewState::gamma_mean() const {
  if (!spec.feature_selection) return Vector::Ones(w.rows());
  return gamma.mean();
}

void ModelState::validate() const {
  auto fail = [](const std::string& what) { raise(ErrorKind::kInvalidData, "invalid model state: " + what); };
  const auto k = static_cast<Eigen::Index>(k_current);
  const Eigen::Index n = z.rows();
  if (z.cols() != k || z.layout != CovarianceLayout::kShared || !z.valid()) fail("q(Z)");
  for (std::size_t m = 0; m < views.size(); ++m) {
    const ViewState& v = views[m];
    const std::string tag = "view " + std::to_string(m) + ": ";
    const auto d = static_cast<Eigen::Index>(v.spec.dim);
    if (v.w.rows() != d || v.w.cols() != k || !v.w.valid()) fail(tag + "q(W)");
    const auto expected_layout =
        v.spec.feature_selection ? CovarianceLayout::kPerRow : CovarianceLayout::kShared;
    if (v.w.layout != expected_layout) fail(tag + "q(W) layout");
    if (v.b.rows() != 1 || v.b.cols() != d || v.b.layout != CovarianceLayout::kDiagonal ||
        !v.b.valid()) {
      fail(tag + "q(b)");
    }
    if (v.alpha.size() != k || !v.alpha.valid()) fail(tag + "q(alpha)");
    if (v.tau.size() != 1 || !v.tau.valid()) fail(tag + "q(tau)");
    if (v.gamma.size() != (v.spec.feature_selection ? d : 0) || !v.gamma.valid()) {
      fail(tag + "q(gamma)");
    }
    if (v.x.mean.rows() != n || v.x.mean.cols() != d || v.x.variance.rows() != n ||
        v.x.variance.cols() != d || !v.x.mean.allFinite() || !v.x.variance.allFinite() ||
        (v.x.variance.array() < 0.0).any()) {
      fail(tag + "pseudo-observations");
    }
    switch (v.spec.kind) {
      case ViewKind::kReal:
        if (v.xi.size() != 0 || v.label_posterior.size() != 0) fail(tag + "real view carries label state");
        break;
      case ViewKind::kBinary:
        if (v.xi.rows() != n || v.xi.cols() != d || !v.xi.allFinite() || (v.xi.array() < 0.0).any()) {
          fail(tag + "xi");
        }
        if (v.label_posterior.rows() != n || v.label_posterior.cols() != d ||
            (v.label_posterior.array() < 0.0).any() || (v.label_posterior.array() > 1.0).any()) {
          fail(tag + "binary label posterior");
        }
        break;
      case ViewKind::kCategorical:
        if (v.label_posterior.rows() != n || v.label_posterior.cols() != d ||
            (v.label_posterior.array() < 0.0).any()) {
          fail(tag + "categorical label posterior");
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          if (std::abs(v.label_posterior.row(i).sum() - 1.0) > 1e-10) {
            fail(tag + "categorical label posterior row does not sum to 1");
          }
        }
        if (v.tau.shape(0) != v.tau.rate(0)) fail(tag + "categorical views keep <tau> = 1");
        break;
    }
  }
  for (double e : elbo_trace) {
    if (std::isnan(e)) fail("NaN in ELBO trace");
  }
}

Matrix expected_reconstruction(const ModelState& state, std::size_t m) {
  const ViewState& v = state.views[m];
  Matrix out(state.z.rows(), v.w.rows());
  out.noalias() = state.z.mean * v.w.mean.transpose();
  out.rowwise() += v.b.mean.row(0);
  return out;
}

ModelState init_state(const ObservationSet& data, const Hyperparameters& hp,
                      std::size_t restart_index) {
  data.validate();
  hp.validate();

  const std::uint64_t stream = hp.distinct_restart_streams ? restart_index : 0;
  std::seed_seq seq{static_cast<std::uint32_t>(hp.seed & 0xffffffffu),
                    static_cast<std::uint32_t>(hp.seed >> 32),
                    static_cast<std::uint32_t>(stream & 0xffffffffu),
                    static_cast<std::uint32_t>(stream >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](Eigen::Index r, Eigen::Index c, double scale) {
    Matrix out(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < c; ++j) out(i, j) = scale * normal(rng);
    }
    return out;
  };

  const auto n = static_cast<Eigen::Index>(data.n_samples);
  const auto k = static_cast<Eigen::Index>(hp.k_init);

  ModelState state;
  state.k_current = hp.k_init;
  state.hp = hp;
  state.z = GaussianFactor::shared(draw(n, k, 1.0), Matrix::Identity(k, k));

  for (const ViewData& view : data.views) {
    ViewState v;
    v.spec = view.spec;
    const auto d = static_cast<Eigen::Index>(view.spec.dim);
    Matrix w_mean = draw(d, k, 1.0 / std::sqrt(static_cast<double>(k)));
    if (view.spec.feature_selection) {
      v.w = GaussianFactor::per_row(std::move(w_mean),
                                    std::vector<Matrix>(static_cast<std::size_t>(d), Matrix::Identity(k, k)));
      v.gamma = GammaFactor::constant(d, hp.a_gamma, hp.b_gamma);
    } else {
      v.w = GaussianFactor::shared(std::move(w_mean), Matrix::Identity(k, k));
      v.gamma = GammaFactor{Vector(0), Vector(0)};
    }
    v.b = GaussianFactor::diagonal(Matrix::Zero(1, d), Vector::Ones(d));
    v.alpha = GammaFactor::constant(k, hp.a_alpha, hp.b_alpha);
    v.x.mean = Matrix::Zero(n, d);
    v.x.variance = Matrix::Zero(n, d);

    switch (view.spec.kind) {
      case ViewKind::kReal:
        v.tau = GammaFactor::constant(1, hp.a_tau, hp.b_tau);
        for (Eigen::Index i = 0; i < n; ++i) {
          for (Eigen::Index j = 0; j < d; ++j) {
            if (view.missing(i, j)) {
              v.x.variance(i, j) = hp.b_tau / hp.a_tau;
            } else {
              v.x.mean(i, j) = view.values(i, j);
            }
          }
        }
        break;
      case ViewKind::kBinary:
        v.tau = GammaFactor::constant(1, hp.a_tau, hp.b_tau);
        v.xi = Matrix::Ones(n, d);
        v.label_posterior = Matrix::Constant(n, d, 0.5);
        for (Eigen::Index i = 0; i < n; ++i) {
          for (Eigen::Index j = 0; j < d; ++j) {
            if (!view.missing(i, j)) v.label_posterior(i, j) = view.values(i, j);
            v.x.mean(i, j) = 2.0 * v.label_posterior(i, j) - 1.0;
            v.x.variance(i, j) = 1.0 / (hp.a_tau / hp.b_tau + 2.0 * lambda_jj(1.0));
          }
        }
        break;
      case ViewKind::kCategorical:
        v.tau = GammaFactor::constant(1, 1.0, 1.0);
        v.label_posterior = Matrix::Constant(n, d, 1.0 / static_cast<double>(d));
        for (Eigen::Index i = 0; i < n; ++i) {
          if (view.missing(i, 0)) continue;
          const auto label = static_cast<Eigen::Index>(view.values(i, 0));
          v.label_posterior.row(i).setZero();
          v.label_posterior(i, label) = 1.0;
          v.x.mean(i, label) = 1.0;
        }
        break;
    }
    state.views.push_back(std::move(v));
  }
  state.validate();
  return state;
}

}  // namespace sshiba

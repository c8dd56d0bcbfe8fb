#ifndef SSHIBA_MODEL_HPP
#define SSHIBA_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sshiba/numerics.hpp"

namespace sshiba {

using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

enum class ViewKind : std::uint8_t { kReal = 0, kBinary = 1, kCategorical = 2 };

std::string_view to_string(ViewKind kind);
// Accepts "real", "binary", "categorical" (case-sensitive).
ViewKind parse_view_kind(std::string_view text);

struct ViewSpec {
  std::string name;
  ViewKind kind = ViewKind::kReal;
  // Feature count; number of classes for categorical views.
  std::size_t dim = 1;
  // Per-feature ARD precision (gamma) on the rows of W.
  bool feature_selection = true;
};

// One view of the data.
//
// Real and binary views store an N x D matrix and an N x D missing mask.
// Categorical views store an N x 1 column of class labels in {0, ..., D-1}
// and an N x 1 mask (a missing label hides the whole row of the view).
// Values under a set mask bit are ignored.
struct ViewData {
  ViewSpec spec;
  Matrix values;
  Mask missing;

  bool row_missing(std::size_t n) const { return missing.row(n).all(); }
  bool any_missing() const { return missing.any(); }
};

struct ObservationSet {
  std::size_t n_samples = 0;
  std::vector<ViewData> views;

  // Throws Error(kInvalidData) on non-conformal shapes, out-of-domain labels
  // or non-finite observed values.
  void validate() const;
};

struct Hyperparameters {
  double a_alpha = 1e-14;
  double b_alpha = 1e-14;
  double a_tau = 1e-14;
  double b_tau = 1e-14;
  double a_gamma = 1e-14;
  double b_gamma = 1e-14;

  std::size_t k_init = 100;
  double prune_threshold = 1e-6;
  double convergence_rel_tol = 1e-8;
  std::size_t max_iters = 50000;
  std::size_t restarts = 10;
  std::uint64_t seed = 0;

  // When false every restart draws from the same stream as restart 0.
  bool distinct_restart_streams = true;
  // When every view is real and fully observed, iterate on Gram-matrix
  // statistics and only materialize <Z> at the end. Same fixed point.
  bool gram_updates = true;
  // Worker threads for restarts; 0 means hardware concurrency.
  std::size_t threads = 0;

  void validate() const;
};

// Layout of a Gaussian factor's covariance.
//   kShared:   one cols x cols matrix for every row (q(Z), q(W) without
//              feature selection).
//   kPerRow:   one cols x cols matrix per row (q(W) with feature selection).
//   kDiagonal: a single cols x 1 vector of variances shared by every row
//              (q(b)).
enum class CovarianceLayout : std::uint8_t { kShared = 0, kPerRow = 1, kDiagonal = 2 };

struct GaussianFactor {
  Matrix mean;
  CovarianceLayout layout = CovarianceLayout::kShared;
  std::vector<Matrix> cov;

  Eigen::Index rows() const { return mean.rows(); }
  Eigen::Index cols() const { return mean.cols(); }

  // Dense covariance of row r.
  Matrix row_cov(Eigen::Index r) const;
  // Diagonal of the covariance of row r.
  Vector row_variance(Eigen::Index r) const;
  // Sum over rows of the covariances.
  Matrix summed_cov() const;
  // E[M^T M] = mean^T mean + summed_cov().
  Matrix second_moment() const;

  void drop_columns(const std::vector<std::size_t>& sorted_columns);
  // Conformal shapes, finite entries, symmetric PSD covariances.
  bool valid() const;

  static GaussianFactor shared(Matrix mean, Matrix cov);
  static GaussianFactor per_row(Matrix mean, std::vector<Matrix> cov);
  static GaussianFactor diagonal(Matrix mean, Vector variances);
};

struct GammaFactor {
  Vector shape;
  Vector rate;

  Eigen::Index size() const { return shape.size(); }
  Vector mean() const { return shape.cwiseQuotient(rate); }
  // E[ln x] = digamma(shape) - ln(rate), elementwise.
  Vector expected_log() const;
  // Sum of elementwise entropies.
  double entropy() const;
  // Sum over elements of E_q[ln Gamma(x | prior_shape, prior_rate)].
  double expected_log_prior(double prior_shape, double prior_rate) const;

  void drop(const std::vector<std::size_t>& sorted_indices);
  bool valid() const;

  static GammaFactor constant(Eigen::Index n, double shape, double rate);
};

// First and second moments of the real-valued matrix behind a view.
//
// For real views this holds the data (variance 0) and the imputed q of
// missing cells. For binary views it is the Gaussian pseudo-observation
// q(X) with diagonal covariance. For categorical views it holds the
// truncated-Gaussian means; variance is kept at 0 there.
struct PseudoObservations {
  Matrix mean;
  Matrix variance;
};

struct ViewState {
  ViewSpec spec;
  GaussianFactor w;  // D x K
  GaussianFactor b;  // 1 x D, diagonal covariance
  GammaFactor alpha;  // K
  GammaFactor tau;    // 1; fixed at mean 1 for categorical views
  GammaFactor gamma;  // D when feature selection is on, else empty
  PseudoObservations x;
  Matrix xi;               // binary views: N x D, else empty
  Matrix label_posterior;  // binary: P(t = 1), N x D; categorical: N x D rows on the simplex
  std::size_t degenerate_rows = 0;

  double tau_mean() const;
  // Elementwise E[W_dk^2].
  Matrix w_second_moments() const;
  // Elementwise E[gamma_d], all ones without feature selection.
  Vector gamma_mean() const;
};

struct ModelState {
  std::size_t k_current = 0;
  Hyperparameters hp;
  GaussianFactor z;  // N x K, shared covariance
  std::vector<ViewState> views;
  std::vector<double> elbo_trace;

  std::size_t n_samples() const { return static_cast<std::size_t>(z.rows()); }

  // Dimensional conformance and the invariants of every contained factor.
  // Throws Error(kInvalidData) with a description of the first violation.
  void validate() const;
};

// <Z><W>^T + 1<b> for view m.
Matrix expected_reconstruction(const ModelState& state, std::size_t m);

ModelState init_state(const ObservationSet& data, const Hyperparameters& hp,
                      std::size_t restart_index);

}  // namespace sshiba

#endif  // SSHIBA_MODEL_HPP

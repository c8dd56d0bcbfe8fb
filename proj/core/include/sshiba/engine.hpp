#ifndef SSHIBA_ENGINE_HPP
#define SSHIBA_ENGINE_HPP

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "sshiba/model.hpp"

namespace sshiba {

// Coordinate-ascent updates. Each one replaces a single factor (or family of
// factors) of the state by its mean-field optimum given all the others.

// Sufficient statistics of the pseudo-observations against the current
// <Z>. Valid until either q(Z) or the pseudo-observations change.
struct ViewMoments {
  Matrix ztz;       // <Z>^T <Z>
  RowVector z_sum;  // column sums of <Z>
  Matrix ztx;       // <Z>^T <X>, K x D
  RowVector x_sum;  // column sums of <X>
  double x_sq = 0.0;
};

ViewMoments view_moments(const ModelState& state, std::size_t m);
// Reuses the <Z>-only statistics of `same_z`.
ViewMoments view_moments(const ModelState& state, std::size_t m, const ViewMoments& same_z);

// q(Z): Sigma_Z^{-1} = I + sum_m <tau> <W^T W>,
//       mu_Z = sum_m <tau> (<X> - 1 <b>) <W> Sigma_Z.
void update_z(ModelState& state);

// Sigma_Z alone.
Matrix latent_covariance(const ModelState& state);

// q(W^(m)). Per-row covariances with feature selection, a single shared
// covariance otherwise. All rows are obtained from one symmetric
// eigendecomposition of diag(<alpha>)^{-1/2} <tau> <Z^T Z> diag(<alpha>)^{-1/2}.
void update_w(ModelState& state, std::size_t m);
void update_w(ModelState& state, std::size_t m, const ViewMoments& moments);

// q(b^(m)) with N(0, I) prior.
void update_b(ModelState& state, std::size_t m);
void update_b(ModelState& state, std::size_t m, const ViewMoments& moments);

void update_alpha(ModelState& state, std::size_t m);

// No-op for views without feature selection.
void update_gamma(ModelState& state, std::size_t m);

// q(tau^(m)); skipped (tau fixed at 1) for categorical views. Throws
// Error(kNegativeRate) if the expected squared residual comes out negative.
void update_tau(ModelState& state, std::size_t m);
void update_tau(ModelState& state, std::size_t m, const ViewMoments& moments);

// Expected squared residual E||X - Z W^T - 1 b||_F^2 under q. The squared
// norm of the mean residual is expanded through the moments and recomputed
// directly when that expansion would lose precision.
double expected_squared_residual(const ModelState& state, std::size_t m);
double expected_squared_residual(const ModelState& state, std::size_t m,
                                 const ViewMoments& moments);

// ||<X> - <Z><W>^T - 1<b>||_F^2 from the moments alone, or nothing when the
// expansion cancels below a safe fraction of ||<X> - 1<b>||_F^2.
std::optional<double> expanded_mean_residual(const ModelState& state, std::size_t m,
                                             const ViewMoments& moments);

// Semi-supervised q of missing real cells: mean <Z_n><W>^T + <b>, variance
// 1/<tau>. Observed cells are left untouched.
void impute_real(ModelState& state, const ObservationSet& data, std::size_t m);

// Every pseudo-observation update of view m, in order. Real: impute_real.
// Binary: q(X), xi, missing-label posteriors. Categorical: truncated
// moments of observed rows and label posteriors of missing rows.
void update_pseudo_observations(ModelState& state, const ObservationSet& data,
                                std::size_t m);

// Evidence lower bound of the current state.
double compute_elbo(const ModelState& state, const ObservationSet& data);
// Same bound with the per-view moments of the current <Z> supplied.
double compute_elbo(const ModelState& state, const ObservationSet& data,
                    const std::vector<ViewMoments>& moments);

// Remove every latent column whose posterior-mean loadings are below the
// prune threshold in absolute value across all views. Returns the removed
// (original) column indices in ascending order. Throws Error(kAllPruned) if
// every column qualifies.
std::vector<std::size_t> prune(ModelState& state);

// One full sweep: per view (pseudo-observations, W, b, alpha, gamma, tau),
// then Z.
void sweep(ModelState& state, const ObservationSet& data);

struct FitReport {
  std::size_t iterations = 0;
  double final_elbo = 0.0;
  std::size_t k_final = 0;
  std::vector<std::pair<std::size_t, std::vector<std::size_t>>> pruned_at;
  bool converged = false;
  std::size_t restart_chosen = 0;
  // Final ELBO of every restart, in restart order; NaN for restarts that failed.
  std::vector<double> restart_elbos;
};

struct FitResult {
  ModelState state;
  FitReport report;
};

// Relative increase of the last step below tol: LB[-1] - LB[-2] < tol * |LB[-1]|.
bool has_converged(const std::vector<double>& trace, double tol);

// One restart. Iterates sweep -> prune -> ELBO until convergence or
// hp.max_iters.
FitResult fit_single(const ObservationSet& data, const Hyperparameters& hp,
                     std::size_t restart_index);

// hp.restarts independent fits; keeps the one with the highest final ELBO
// (lowest index on ties). Numeric errors are rethrown with the restart index
// in the message.
FitResult fit(const ObservationSet& data, const Hyperparameters& hp);

}  // namespace sshiba

#endif  // SSHIBA_ENGINE_HPP

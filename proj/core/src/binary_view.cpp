#include "sshiba/binary_view.hpp"

#include <cmath>
#include <numbers>

namespace sshiba {

double jaakkola_log_bound(double x, double t, double xi) {
  return x * t + log_sigmoid(xi) - 0.5 * (x + xi) - lambda_jj(xi) * (x * x - xi * xi);
}

double bernoulli_logit_loglik(double x, double t) { return x * t + log_sigmoid(-x); }

void update_pseudo_x_binary(ModelState& state, std::size_t m) {
  ViewState& v = state.views[m];
  const double tau = v.tau_mean();
  const Matrix fitted = expected_reconstruction(state, m);
  for (Eigen::Index i = 0; i < fitted.rows(); ++i) {
    for (Eigen::Index j = 0; j < fitted.cols(); ++j) {
      const double variance = 1.0 / (tau + 2.0 * lambda_jj(v.xi(i, j)));
      v.x.variance(i, j) = variance;
      v.x.mean(i, j) = (v.label_posterior(i, j) - 0.5 + tau * fitted(i, j)) * variance;
    }
  }
}

void update_xi(ModelState& state, std::size_t m) {
  ViewState& v = state.views[m];
  v.xi = (v.x.mean.cwiseAbs2() + v.x.variance).cwiseSqrt();
}

void impute_binary_labels(ModelState& state, const ObservationSet& data, std::size_t m) {
  ViewState& v = state.views[m];
  const Mask& missing = data.views[m].missing;
  for (Eigen::Index i = 0; i < missing.rows(); ++i) {
    for (Eigen::Index j = 0; j < missing.cols(); ++j) {
      if (missing(i, j)) v.label_posterior(i, j) = sigmoid(v.x.mean(i, j));
    }
  }
}

double binary_label_variance(double x_mean) {
  const double p = sigmoid(x_mean);
  return p * (1.0 - p);
}

namespace {

double bernoulli_entropy(double p) {
  double h = 0.0;
  if (p > 0.0) h -= p * std::log(p);
  if (p < 1.0) h -= (1.0 - p) * std::log1p(-p);
  return h;
}

}  // namespace

double binary_view_bound(const ModelState& state, const ObservationSet& data,
                         std::size_t m) {
  const ViewState& v = state.views[m];
  const Mask& missing = data.views[m].missing;
  const double log_2pi_e = std::log(2.0 * std::numbers::pi * std::numbers::e);
  double total = 0.0;
  for (Eigen::Index i = 0; i < v.x.mean.rows(); ++i) {
    for (Eigen::Index j = 0; j < v.x.mean.cols(); ++j) {
      const double mean = v.x.mean(i, j);
      const double var = v.x.variance(i, j);
      const double xi = v.xi(i, j);
      const double t = v.label_posterior(i, j);
      // E[ln h(X, xi)] under q(X) and q(t).
      total += log_sigmoid(xi) + mean * t - 0.5 * (mean + xi) -
               lambda_jj(xi) * (mean * mean + var - xi * xi);
      if (var > 0.0) total += 0.5 * (log_2pi_e + std::log(var));
      if (missing(i, j)) total += bernoulli_entropy(t);
    }
  }
  return total;
}

}  // namespace sshiba

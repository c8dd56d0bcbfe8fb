#ifndef SSHIBA_BINARY_VIEW_HPP
#define SSHIBA_BINARY_VIEW_HPP

#include <cstddef>

#include "sshiba/model.hpp"

namespace sshiba {

// Jaakkola-Jordan lower bound on ln p(t | x) = x t + ln sigmoid(-x):
//   x t + ln sigmoid(xi) - (x + xi) / 2 - lambda(xi) (x^2 - xi^2).
// `t` may be a soft label in [0, 1].
double jaakkola_log_bound(double x, double t, double xi);

// Exact Bernoulli-logit log-likelihood x t + ln sigmoid(-x).
double bernoulli_logit_loglik(double x, double t);

// q(X) for a binary view: diagonal precision <tau> + 2 lambda(xi) and mean
// (t - 1/2 + <tau> (<Z_n><W>^T + <b>)) / precision. Missing cells use the
// current label posterior in place of t.
void update_pseudo_x_binary(ModelState& state, std::size_t m);

// xi_nd = sqrt(<X_nd>^2 + Var[X_nd]).
void update_xi(ModelState& state, std::size_t m);

// q(t = 1) = sigmoid(<X>) for missing cells; observed cells are untouched.
void impute_binary_labels(ModelState& state, const ObservationSet& data, std::size_t m);

// Variance of the Bernoulli label posterior, e^x / (1 + e^x)^2.
double binary_label_variance(double x_mean);

// Likelihood-side ELBO terms of a binary view: sum of E[ln h(X, xi)], the
// entropy of q(X) and the entropy of the missing-label posteriors.
double binary_view_bound(const ModelState& state, const ObservationSet& data,
                         std::size_t m);

}  // namespace sshiba

#endif  // SSHIBA_BINARY_VIEW_HPP

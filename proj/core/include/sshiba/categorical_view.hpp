#ifndef SSHIBA_CATEGORICAL_VIEW_HPP
#define SSHIBA_CATEGORICAL_VIEW_HPP

#include <cstddef>
#include <optional>

#include "sshiba/model.hpp"

namespace sshiba {

// Class probabilities of the multinomial probit with unit noise:
//   p(t = i | y) = E_u[ prod_{j != i} Phi(u + y_i - y_j) ],  u ~ N(0, 1).
// Class indices are zero-based.
double probit_class_prob(const Vector& y, std::size_t i,
                         const QuadratureRule& rule = default_rule());

// All D class probabilities (not renormalized).
Vector probit_class_probs(const Vector& y, const QuadratureRule& rule = default_rule());

// Normalizer below which truncated_moments reports a degenerate class.
inline constexpr double kMinProbitNormalizer = 1e-12;

// Mean of N(y, I) truncated to {X_i > X_j for all j != i}. Throws
// Error(kDegenerateNormalizer) if p(t = i | y) < kMinProbitNormalizer.
Vector truncated_moments(const Vector& y, std::size_t i,
                         const QuadratureRule& rule = default_rule());

// Non-throwing form: std::nullopt for a degenerate normalizer.
std::optional<Vector> try_truncated_moments(const Vector& y, std::size_t i,
                                            const QuadratureRule& rule = default_rule());

// <y> = <Z><W>^T + <b> for view m.
Matrix categorical_linear_predictor(const ModelState& state, std::size_t m);

// Truncated-Gaussian means of the observed rows. Degenerate rows keep
// <X> = <y> and bump ViewState::degenerate_rows.
void update_pseudo_x_categorical(ModelState& state, const ObservationSet& data,
                                 std::size_t m,
                                 const QuadratureRule& rule = default_rule());

// Missing rows: q(t = i) proportional to p(t = i | <y>), and <X> as the
// q(t)-weighted mixture of truncated means.
void impute_categorical_labels(ModelState& state, const ObservationSet& data,
                               std::size_t m,
                               const QuadratureRule& rule = default_rule());

}  // namespace sshiba

#endif  // SSHIBA_CATEGORICAL_VIEW_HPP

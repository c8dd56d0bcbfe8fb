#ifndef SSHIBA_NUMERICS_HPP
#define SSHIBA_NUMERICS_HPP

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <vector>

namespace sshiba {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Logistic function 1 / (1 + exp(-a)), evaluated branch-wise so that neither
// tail overflows.
double sigmoid(double a);

// ln sigmoid(a) without cancellation in either tail.
double log_sigmoid(double a);

// Jaakkola-Jordan curvature (sigmoid(a) - 1/2) / (2a); 1/8 at a = 0.
double lambda_jj(double a);

double std_normal_pdf(double a);

// Standard normal CDF via erfc, accurate to ~1e-16 relative in both tails.
double std_normal_cdf(double a);

// Nodes and weights of a Gauss-Hermite rule rescaled to the standard normal
// measure: sum_i weights[i] * f(nodes[i]) ~= E[f(u)], u ~ N(0, 1).
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t order() const { return nodes.size(); }
};

inline constexpr std::size_t kDefaultQuadratureOrder = 50;

QuadratureRule gauss_hermite_rule(std::size_t order);

// Shared default rule (order 50), built once.
const QuadratureRule& default_rule();

double expect_std_normal(const std::function<double(double)>& f,
                         const QuadratureRule& rule);

// Symmetric positive-definite helpers. All of them throw
// Error(kNotPositiveDefinite) when the Cholesky factorization fails.
Matrix spd_solve(const Matrix& a, const Matrix& b);
Matrix spd_inverse(const Matrix& a);
double spd_logdet(const Matrix& a);

// Same as spd_inverse, but retries once with 1e-10 * I added before failing.
Matrix spd_inverse_jittered(const Matrix& a);

// Symmetric within 1e-10 relative and Cholesky succeeds.
bool is_spd(const Matrix& a);

}  // namespace sshiba

#endif  // SSHIBA_NUMERICS_HPP

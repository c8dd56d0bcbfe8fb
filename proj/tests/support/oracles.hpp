// Reference computations for the test suites. Everything here is written
// with plain loops and dense elimination so that it shares no code path
// with the library.
#ifndef SSHIBA_TESTS_ORACLES_HPP
#define SSHIBA_TESTS_ORACLES_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Gauss-Jordan elimination with partial pivoting.
inline Matrix gauss_jordan_inverse(const Matrix& a) {
  const Eigen::Index n = a.rows();
  Matrix work(n, 2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      work(i, j) = a(i, j);
      work(i, n + j) = i == j ? 1.0 : 0.0;
    }
  }
  for (Eigen::Index col = 0; col < n; ++col) {
    Eigen::Index pivot = col;
    for (Eigen::Index r = col + 1; r < n; ++r) {
      if (std::abs(work(r, col)) > std::abs(work(pivot, col))) pivot = r;
    }
    if (work(pivot, col) == 0.0) throw std::runtime_error("singular matrix");
    for (Eigen::Index j = 0; j < 2 * n; ++j) std::swap(work(col, j), work(pivot, j));
    const double p = work(col, col);
    for (Eigen::Index j = 0; j < 2 * n; ++j) work(col, j) /= p;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = work(r, col);
      if (f == 0.0) continue;
      for (Eigen::Index j = 0; j < 2 * n; ++j) work(r, j) -= f * work(col, j);
    }
  }
  Matrix inv(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) inv(i, j) = work(i, n + j);
  }
  return inv;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  }
  return out;
}

struct Gaussian {
  Vector mean;
  Matrix cov;
};

// z ~ N(0, I_K), x = W z + b + e with e ~ N(0, diag(noise_var)).
// Conditioning in data space: E[z|x] = W^T S^{-1} (x - b),
// Cov[z|x] = I - W^T S^{-1} W, S = W W^T + diag(noise_var).
inline Gaussian condition_latent(const Matrix& w, const Vector& b, const Vector& noise_var,
                                 const Vector& x) {
  const Eigen::Index d = w.rows();
  const Eigen::Index k = w.cols();
  Matrix s = matmul(w, w.transpose());
  for (Eigen::Index i = 0; i < d; ++i) s(i, i) += noise_var(i);
  const Matrix s_inv = gauss_jordan_inverse(s);
  const Matrix gain = matmul(w.transpose(), s_inv);  // K x D
  Gaussian out;
  out.mean = Vector::Zero(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) out.mean(i) += gain(i, j) * (x(j) - b(j));
  }
  out.cov = Matrix::Identity(k, k) - matmul(gain, w);
  return out;
}

// Bayesian linear regression y = X beta + e, e ~ N(0, 1/tau),
// beta ~ N(0, diag(prior_precision)^{-1}).
inline Gaussian ridge_posterior(const Matrix& x, const Vector& y, double tau,
                                const Vector& prior_precision) {
  const Eigen::Index p = x.cols();
  Matrix precision = Matrix::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      double s = 0.0;
      for (Eigen::Index n = 0; n < x.rows(); ++n) s += x(n, i) * x(n, j);
      precision(i, j) = tau * s;
    }
    precision(i, i) += prior_precision(i);
  }
  Gaussian out;
  out.cov = gauss_jordan_inverse(precision);
  Vector xty = Vector::Zero(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index n = 0; n < x.rows(); ++n) xty(i) += x(n, i) * y(n);
  }
  out.mean = Vector::Zero(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) out.mean(i) += tau * out.cov(i, j) * xty(j);
  }
  return out;
}

// Digamma by upward recurrence and the asymptotic series.
inline double digamma(double x) {
  double acc = 0.0;
  while (x < 10.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double f = 1.0 / (x * x);
  const double series =
      f * (-1.0 / 12 + f * (1.0 / 120 + f * (-1.0 / 252 + f * (1.0 / 240 + f * (-1.0 / 132)))));
  return acc + std::log(x) - 0.5 / x + series;
}

// E_q[ln Gamma(x | a, b)] + H[q] for q = Gamma(shape, rate).
inline double gamma_kl_terms(double shape, double rate, double a, double b) {
  const double mean = shape / rate;
  const double elog = digamma(shape) - std::log(rate);
  const double elog_prior = a * std::log(b) - std::lgamma(a) + (a - 1.0) * elog - b * mean;
  const double entropy = shape - std::log(rate) + std::lgamma(shape) + (1.0 - shape) * digamma(shape);
  return elog_prior + entropy;
}

// Evidence lower bound of x_nd ~ N(b_d, 1/tau), b_d ~ N(0, 1),
// tau ~ Gamma(a, b) under q(b_d) = N(m_d, s_d), q(tau) = Gamma(shape, rate).
inline double iid_gaussian_elbo(const Matrix& x, const Vector& m, const Vector& s, double shape,
                                double rate, double a, double b) {
  const double log2pi = std::log(2.0 * std::numbers::pi);
  const double tau = shape / rate;
  const double elog_tau = digamma(shape) - std::log(rate);
  double total = 0.0;
  for (Eigen::Index n = 0; n < x.rows(); ++n) {
    for (Eigen::Index d = 0; d < x.cols(); ++d) {
      const double r = x(n, d) - m(d);
      total += 0.5 * elog_tau - 0.5 * log2pi - 0.5 * tau * (r * r + s(d));
    }
  }
  for (Eigen::Index d = 0; d < x.cols(); ++d) {
    total += -0.5 * log2pi - 0.5 * (m(d) * m(d) + s(d));
    total += 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * s(d));
  }
  return total + gamma_kl_terms(shape, rate, a, b);
}

struct MonteCarloMean {
  Vector mean;
  Vector std_error;
  std::size_t accepted = 0;
};

// Mean of N(y, I) restricted to {x_i > x_j for all j != i}, by rejection.
inline MonteCarloMean truncated_mean_rejection(const Vector& y, Eigen::Index i,
                                               std::size_t draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const Eigen::Index d = y.size();
  Vector sum = Vector::Zero(d);
  Vector sum_sq = Vector::Zero(d);
  Vector x(d);
  std::size_t accepted = 0;
  for (std::size_t t = 0; t < draws; ++t) {
    for (Eigen::Index j = 0; j < d; ++j) x(j) = y(j) + normal(rng);
    bool keep = true;
    for (Eigen::Index j = 0; j < d && keep; ++j) keep = j == i || x(i) > x(j);
    if (!keep) continue;
    ++accepted;
    sum += x;
    sum_sq += x.cwiseProduct(x);
  }
  MonteCarloMean out;
  out.accepted = accepted;
  const auto n = static_cast<double>(accepted);
  out.mean = sum / n;
  const Vector var = sum_sq / n - out.mean.cwiseProduct(out.mean);
  out.std_error = (var / n).cwiseSqrt();
  return out;
}

// Maximizer of a unimodal f on [lo, hi].
inline double golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                                 double tol = 1e-13) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - g * (hi - lo);
  double d = lo + g * (hi - lo);
  double fc = f(c);
  double fd = f(d);
  while (hi - lo > tol) {
    if (fc > fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - g * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + g * (hi - lo);
      fd = f(d);
    }
  }
  return 0.5 * (lo + hi);
}

// Fraction of (positive, negative) pairs ranked correctly, ties count 1/2.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t p = 0; p < scores.size(); ++p) {
    if (labels[p] != 1) continue;
    for (std::size_t q = 0; q < scores.size(); ++q) {
      if (labels[q] != 0) continue;
      pairs += 1.0;
      if (scores[p] > scores[q]) wins += 1.0;
      else if (scores[p] == scores[q]) wins += 0.5;
    }
  }
  return wins / pairs;
}

inline double sorted_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return INFINITY;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) worst = std::max(worst, std::abs(a(i, j) - b(i, j)));
  }
  return worst;
}

// max |a - b| / max(1, max |b|)
inline double scaled_diff(const Matrix& a, const Matrix& b) {
  double scale = 1.0;
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.cols(); ++j) scale = std::max(scale, std::abs(b(i, j)));
  }
  return max_abs_diff(a, b) / scale;
}

}  // namespace oracle

#endif

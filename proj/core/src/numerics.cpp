#include "sshiba/numerics.hpp"

#include <cmath>
#include <numbers>

#include "sshiba/error.hpp"

namespace sshiba {

double sigmoid(double a) {
  if (a >= 0.0) {
    return 1.0 / (1.0 + std::exp(-a));
  }
  const double e = std::exp(a);
  return e / (1.0 + e);
}

double log_sigmoid(double a) {
  if (a >= 0.0) {
    return -std::log1p(std::exp(-a));
  }
  return a - std::log1p(std::exp(a));
}

double lambda_jj(double a) {
  const double x = std::abs(a);
  if (x < 1e-4) {
    // tanh(x/2)/(4x) = 1/8 - x^2/96 + x^4/960 - ...
    const double x2 = x * x;
    return 0.125 - x2 / 96.0 + x2 * x2 / 960.0;
  }
  return std::tanh(0.5 * x) / (4.0 * x);
}

double std_normal_pdf(double a) {
  return std::exp(-0.5 * a * a) / std::sqrt(2.0 * std::numbers::pi);
}

double std_normal_cdf(double a) {
  return 0.5 * std::erfc(-a / std::numbers::sqrt2);
}

QuadratureRule gauss_hermite_rule(std::size_t order) {
  if (order == 0) {
    raise(ErrorKind::kInvalidData, "quadrature order must be positive");
  }
  // Roots of the physicists' Hermite polynomial H_n by Newton iteration on
  // the orthonormal recurrence; only the non-negative half is searched and
  // mirrored, so the rule is exactly symmetric.
  const int n = static_cast<int>(order);
  const int half = (n + 1) / 2;
  const double pim4 = 1.0 / std::pow(std::numbers::pi, 0.25);
  std::vector<double> x(order), w(order);
  double z = 0.0;
  for (int i = 0; i < half; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * x[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * x[1];
    } else {
      z = 2.0 * z - x[i - 2];
    }
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = pim4;
      double p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1.0)) * p2 - std::sqrt(j / (j + 1.0)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double previous = z;
      z = previous - p1 / pp;
      if (std::abs(z - previous) <= 1e-15 * std::max(1.0, std::abs(z))) {
        break;
      }
    }
    if (n % 2 == 1 && i == half - 1) {
      z = 0.0;
    }
    x[i] = z;
    x[n - 1 - i] = -z;
    w[i] = 2.0 / (pp * pp);
    w[n - 1 - i] = w[i];
  }

  QuadratureRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  double total = 0.0;
  for (std::size_t i = 0; i < order; ++i) {
    // Ascending nodes: x[] is descending.
    const std::size_t src = order - 1 - i;
    rule.nodes[i] = std::numbers::sqrt2 * x[src];
    rule.weights[i] = w[src] / std::sqrt(std::numbers::pi);
    total += rule.weights[i];
  }
  for (double& weight : rule.weights) {
    weight /= total;
  }
  return rule;
}

const QuadratureRule& default_rule() {
  static const QuadratureRule rule = gauss_hermite_rule(kDefaultQuadratureOrder);
  return rule;
}

double expect_std_normal(const std::function<double(double)>& f,
                         const QuadratureRule& rule) {
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.order(); ++i) {
    sum += rule.weights[i] * f(rule.nodes[i]);
  }
  return sum;
}

namespace {

Eigen::LLT<Matrix> factor_or_throw(const Matrix& a) {
  if (a.rows() != a.cols()) {
    raise(ErrorKind::kNotPositiveDefinite, "matrix is not square");
  }
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    raise(ErrorKind::kNotPositiveDefinite,
          "Cholesky factorization failed for a " + std::to_string(a.rows()) +
              "x" + std::to_string(a.cols()) + " matrix");
  }
  const auto diag = llt.matrixLLT().diagonal();
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    if (!(diag(i) > 0.0) || !std::isfinite(diag(i))) {
      raise(ErrorKind::kNotPositiveDefinite, "non-positive Cholesky pivot");
    }
  }
  return llt;
}

}  // namespace

Matrix spd_solve(const Matrix& a, const Matrix& b) {
  return factor_or_throw(a).solve(b);
}

Matrix spd_inverse(const Matrix& a) {
  Matrix inv = factor_or_throw(a).solve(Matrix::Identity(a.rows(), a.cols()));
  return 0.5 * (inv + inv.transpose());
}

double spd_logdet(const Matrix& a) {
  const auto llt = factor_or_throw(a);
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Matrix spd_inverse_jittered(const Matrix& a) {
  try {
    return spd_inverse(a);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNotPositiveDefinite) {
      throw;
    }
  }
  Matrix jittered = a;
  jittered.diagonal().array() += 1e-10;
  return spd_inverse(jittered);
}

bool is_spd(const Matrix& a) {
  if (a.rows() != a.cols()) {
    return false;
  }
  if (a.size() == 0) {
    return true;
  }
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    return false;
  }
  Eigen::LLT<Matrix> llt(a);
  return llt.info() == Eigen::Success &&
         (llt.matrixLLT().diagonal().array() > 0.0).all();
}

}  // namespace sshiba

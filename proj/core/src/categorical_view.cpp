#include "sshiba/categorical_view.hpp"

#include "sshiba/error.hpp"

namespace sshiba {

double probit_class_prob(const Vector& y, std::size_t i, const QuadratureRule& rule) {
  const auto cls = static_cast<Eigen::Index>(i);
  double total = 0.0;
  for (std::size_t q = 0; q < rule.order(); ++q) {
    const double u = rule.nodes[q];
    double product = 1.0;
    for (Eigen::Index j = 0; j < y.size(); ++j) {
      if (j != cls) product *= std_normal_cdf(u + y(cls) - y(j));
    }
    total += rule.weights[q] * product;
  }
  return total;
}

Vector probit_class_probs(const Vector& y, const QuadratureRule& rule) {
  Vector out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    out(i) = probit_class_prob(y, static_cast<std::size_t>(i), rule);
  }
  return out;
}

std::optional<Vector> try_truncated_moments(const Vector& y, std::size_t i,
                                            const QuadratureRule& rule) {
  const auto cls = static_cast<Eigen::Index>(i);
  const Eigen::Index d = y.size();

  // cdf(q, j) = Phi(u_q + y_i - y_j)
  Matrix cdf(static_cast<Eigen::Index>(rule.order()), d);
  double normalizer = 0.0;
  for (std::size_t q = 0; q < rule.order(); ++q) {
    const auto row = static_cast<Eigen::Index>(q);
    double product = 1.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (j == cls) continue;
      cdf(row, j) = std_normal_cdf(rule.nodes[q] + y(cls) - y(j));
      product *= cdf(row, j);
    }
    normalizer += rule.weights[q] * product;
  }
  if (!(normalizer >= kMinProbitNormalizer)) return std::nullopt;

  Vector mean(d);
  double shift = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    if (j == cls) continue;
    double expectation = 0.0;
    for (std::size_t q = 0; q < rule.order(); ++q) {
      const auto row = static_cast<Eigen::Index>(q);
      double product = std_normal_pdf(rule.nodes[q] + y(cls) - y(j));
      for (Eigen::Index k = 0; k < d; ++k) {
        if (k != cls && k != j) product *= cdf(row, k);
      }
      expectation += rule.weights[q] * product;
    }
    mean(j) = y(j) - expectation / normalizer;
    shift += y(j) - mean(j);
  }
  mean(cls) = y(cls) + shift;
  return mean;
}

Vector truncated_moments(const Vector& y, std::size_t i, const QuadratureRule& rule) {
  auto mean = try_truncated_moments(y, i, rule);
  if (!mean) {
    raise(ErrorKind::kDegenerateNormalizer,
          "class " + std::to_string(i) + " has numerically zero probit probability");
  }
  return *std::move(mean);
}

Matrix categorical_linear_predictor(const ModelState& state, std::size_t m) {
  return expected_reconstruction(state, m);
}

void update_pseudo_x_categorical(ModelState& state, const ObservationSet& data,
                                 std::size_t m, const QuadratureRule& rule) {
  ViewState& v = state.views[m];
  const ViewData& view = data.views[m];
  const Matrix y = categorical_linear_predictor(state, m);
  for (Eigen::Index n = 0; n < y.rows(); ++n) {
    if (view.missing(n, 0)) continue;
    const auto label = static_cast<std::size_t>(view.values(n, 0));
    const Vector row = y.row(n).transpose();
    if (auto mean = try_truncated_moments(row, label, rule)) {
      v.x.mean.row(n) = mean->transpose();
    } else {
      v.x.mean.row(n) = y.row(n);
      ++v.degenerate_rows;
    }
  }
}

void impute_categorical_labels(ModelState& state, const ObservationSet& data,
                               std::size_t m, const QuadratureRule& rule) {
  ViewState& v = state.views[m];
  const ViewData& view = data.views[m];
  if (!view.any_missing()) return;
  const Matrix y = categorical_linear_predictor(state, m);
  for (Eigen::Index n = 0; n < y.rows(); ++n) {
    if (!view.missing(n, 0)) continue;
    const Vector row = y.row(n).transpose();
    Vector probs = probit_class_probs(row, rule);
    probs /= probs.sum();
    v.label_posterior.row(n) = probs.transpose();
    Vector mixture = Vector::Zero(row.size());
    for (Eigen::Index i = 0; i < row.size(); ++i) {
      auto mean = try_truncated_moments(row, static_cast<std::size_t>(i), rule);
      mixture += probs(i) * (mean ? *mean : row);
    }
    v.x.mean.row(n) = mixture.transpose();
  }
}

}  // namespace sshiba

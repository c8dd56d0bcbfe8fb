#include "sshiba/predictive.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "sshiba/categorical_view.hpp"
#include "sshiba/error.hpp"

namespace sshiba {

std::size_t PredictionRequest::sample_count() const {
  if (observed.empty()) return n_samples;
  return static_cast<std::size_t>(observed.begin()->second.rows());
}

namespace {

void check_view(const ModelState& model, std::size_t m) {
  if (m >= model.views.size()) {
    raise(ErrorKind::kUnknownView, "view " + std::to_string(m) + " is not in the model (" +
                                       std::to_string(model.views.size()) + " views)");
  }
}

// Real-valued representation of an observed input block.
Matrix encode_input(const ViewSpec& spec, const Matrix& rows) {
  const auto d = static_cast<Eigen::Index>(spec.dim);
  if (!rows.allFinite()) {
    raise(ErrorKind::kInvalidData, "view '" + spec.name + "': prediction inputs must be complete");
  }
  switch (spec.kind) {
    case ViewKind::kReal:
      if (rows.cols() != d) break;
      return rows;
    case ViewKind::kBinary:
      if (rows.cols() != d) break;
      if (((rows.array() != 0.0) && (rows.array() != 1.0)).any()) {
        raise(ErrorKind::kInvalidData, "view '" + spec.name + "': binary entries must be 0 or 1");
      }
      return (2.0 * rows.array() - 1.0).matrix();
    case ViewKind::kCategorical: {
      if (rows.cols() != 1) break;
      Matrix one_hot = Matrix::Zero(rows.rows(), d);
      for (Eigen::Index n = 0; n < rows.rows(); ++n) {
        const double label = rows(n, 0);
        if (label < 0.0 || label >= static_cast<double>(d) || label != std::floor(label)) {
          raise(ErrorKind::kInvalidData, "view '" + spec.name + "': label out of range");
        }
        one_hot(n, static_cast<Eigen::Index>(label)) = 1.0;
      }
      return one_hot;
    }
  }
  raise(ErrorKind::kInvalidData, "view '" + spec.name + "': input has " +
                                     std::to_string(rows.cols()) + " columns");
}

}  // namespace

LatentPosterior latent_posterior(const ModelState& model, const PredictionRequest& request) {
  std::set<std::size_t> targets;
  for (std::size_t m : request.targets) {
    check_view(model, m);
    targets.insert(m);
  }
  const auto s = static_cast<Eigen::Index>(request.sample_count());
  const auto k = static_cast<Eigen::Index>(model.k_current);
  Matrix precision = Matrix::Identity(k, k);
  Matrix rhs = Matrix::Zero(s, k);
  for (const auto& [m, rows] : request.observed) {
    check_view(model, m);
    if (targets.contains(m)) {
      raise(ErrorKind::kUnknownView, "view " + std::to_string(m) + " is both observed and a target");
    }
    if (rows.rows() != s) {
      raise(ErrorKind::kInvalidData, "observed views disagree on the number of samples");
    }
    const ViewState& v = model.views[m];
    const double tau = v.tau_mean();
    const Matrix& w = v.w.mean;
    precision += tau * w.transpose() * w;
    const Matrix x = encode_input(v.spec, rows);
    rhs += tau * (x.rowwise() - v.b.mean.row(0)) * w;
  }
  precision = 0.5 * (precision + precision.transpose());
  LatentPosterior latent;
  latent.cov = spd_inverse(precision);
  latent.mean = rhs * latent.cov;
  return latent;
}

ViewPrediction predict_view(const ModelState& model, const LatentPosterior& latent,
                            std::size_t m) {
  check_view(model, m);
  const ViewState& v = model.views[m];
  const auto d = static_cast<Eigen::Index>(v.spec.dim);
  const Matrix& w = v.w.mean;
  ViewPrediction out;
  out.view = m;
  out.mean = (latent.mean * w.transpose()).rowwise() + v.b.mean.row(0);
  out.cov = w * latent.cov * w.transpose();
  out.cov.diagonal().array() += 1.0 / v.tau_mean();
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  const Eigen::Index s = out.mean.rows();
  switch (v.spec.kind) {
    case ViewKind::kReal:
      break;
    case ViewKind::kBinary:
      out.probabilities = out.mean.unaryExpr([](double a) { return sigmoid(a); });
      out.labels = (out.mean.array() > 0.0).cast<double>().matrix();
      break;
    case ViewKind::kCategorical:
      out.probabilities.resize(s, d);
      out.labels.resize(s, 1);
      for (Eigen::Index n = 0; n < s; ++n) {
        Vector probs = probit_class_probs(out.mean.row(n).transpose());
        probs /= probs.sum();
        out.probabilities.row(n) = probs.transpose();
        Eigen::Index best = 0;
        probs.maxCoeff(&best);
        out.labels(n, 0) = static_cast<double>(best);
      }
      break;
  }
  return out;
}

PredictionResult predict(const ModelState& model, const PredictionRequest& request) {
  PredictionResult result;
  result.latent = latent_posterior(model, request);
  for (std::size_t m : request.targets) result.views.push_back(predict_view(model, result.latent, m));
  return result;
}

}  // namespace sshiba

#include "sshiba/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "sshiba/error.hpp"

namespace sshiba {

double auc_binary(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    raise(ErrorKind::kInvalidData, "scores and labels differ in length");
  }
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j + 1);  // ranks i+1 .. j
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == 1) {
        positive_rank_sum += midrank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    raise(ErrorKind::kSingleClass, "AUC needs both classes present");
  }
  const double p = static_cast<double>(positives);
  return (positive_rank_sum - 0.5 * p * (p + 1.0)) / (p * static_cast<double>(negatives));
}

double auc_multiclass_balanced(const Matrix& scores, std::span<const int> labels) {
  const auto n = static_cast<std::size_t>(scores.rows());
  if (labels.size() != n) raise(ErrorKind::kInvalidData, "scores and labels differ in length");
  std::map<int, std::size_t> counts;
  for (int label : labels) {
    if (label < 0 || label >= scores.cols()) {
      raise(ErrorKind::kInvalidData, "label outside the score columns");
    }
    ++counts[label];
  }
  if (counts.size() < 2) raise(ErrorKind::kSingleClass, "multiclass AUC needs two classes");
  double total = 0.0;
  std::vector<double> column(n);
  std::vector<int> one_vs_rest(n);
  for (const auto& [cls, count] : counts) {
    for (std::size_t i = 0; i < n; ++i) {
      column[i] = scores(static_cast<Eigen::Index>(i), cls);
      one_vs_rest[i] = labels[i] == cls ? 1 : 0;
    }
    total += static_cast<double>(count) * auc_binary(column, one_vs_rest);
  }
  return total / static_cast<double>(n);
}

double auc_multilabel_weighted(const Matrix& scores, const Matrix& labels) {
  if (scores.rows() != labels.rows() || scores.cols() != labels.cols()) {
    raise(ErrorKind::kInvalidData, "scores and labels are not conformal");
  }
  const auto n = static_cast<std::size_t>(scores.rows());
  double total = 0.0;
  double weight = 0.0;
  std::vector<double> column(n);
  std::vector<int> truth(n);
  for (Eigen::Index c = 0; c < scores.cols(); ++c) {
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n; ++i) {
      column[i] = scores(static_cast<Eigen::Index>(i), c);
      truth[i] = labels(static_cast<Eigen::Index>(i), c) > 0.5 ? 1 : 0;
      positives += static_cast<std::size_t>(truth[i]);
    }
    if (positives == 0 || positives == n) continue;
    total += static_cast<double>(positives) * auc_binary(column, truth);
    weight += static_cast<double>(positives);
  }
  if (weight == 0.0) raise(ErrorKind::kSingleClass, "no label column holds both classes");
  return total / weight;
}

Matrix impute_baseline(const Matrix& values, const Mask& missing, ImputeStrategy strategy) {
  if (values.rows() != missing.rows() || values.cols() != missing.cols()) {
    raise(ErrorKind::kShapeMismatch, "mask is not conformal with values");
  }
  Matrix out = values;
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    std::vector<double> observed;
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      if (!missing(i, j)) observed.push_back(values(i, j));
    }
    if (observed.empty()) {
      raise(ErrorKind::kEmptyColumn, "column " + std::to_string(j) + " has no observed entries");
    }
    double fill = 0.0;
    switch (strategy) {
      case ImputeStrategy::kMean:
        fill = std::accumulate(observed.begin(), observed.end(), 0.0) /
               static_cast<double>(observed.size());
        break;
      case ImputeStrategy::kMedian: {
        std::sort(observed.begin(), observed.end());
        const std::size_t h = observed.size() / 2;
        fill = observed.size() % 2 == 1 ? observed[h] : 0.5 * (observed[h - 1] + observed[h]);
        break;
      }
      case ImputeStrategy::kMostFrequent: {
        std::map<double, std::size_t> counts;
        for (double v : observed) ++counts[v];
        std::size_t best = 0;
        for (const auto& [value, count] : counts) {
          if (count > best) {
            best = count;
            fill = value;
          }
        }
        break;
      }
    }
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      if (missing(i, j)) out(i, j) = fill;
    }
  }
  return out;
}

double masked_rmse(const Matrix& estimate, const Matrix& truth, const Mask& cells) {
  double sum = 0.0;
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < truth.rows(); ++i) {
    for (Eigen::Index j = 0; j < truth.cols(); ++j) {
      if (!cells(i, j)) continue;
      const double diff = estimate(i, j) - truth(i, j);
      sum += diff * diff;
      ++count;
    }
  }
  if (count == 0) raise(ErrorKind::kInvalidData, "no cells selected for RMSE");
  return std::sqrt(sum / static_cast<double>(count));
}

SyntheticData generate_synthetic(const SyntheticConfig& config) {
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  auto draw = [&](Eigen::Index r, Eigen::Index c, double scale) {
    Matrix out(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < c; ++j) out(i, j) = scale * normal(rng);
    }
    return out;
  };

  const auto n = static_cast<Eigen::Index>(config.n);
  const auto k = static_cast<Eigen::Index>(config.k_true);
  SyntheticData out;
  out.z = draw(n, k, 1.0);
  out.data.n_samples = config.n;

  for (std::size_t m = 0; m < config.views.size(); ++m) {
    const SyntheticView& sv = config.views[m];
    const auto d = static_cast<Eigen::Index>(sv.dim);
    Matrix w = draw(d, k, config.loading_scale);
    std::vector<std::size_t> features(sv.dim);
    std::iota(features.begin(), features.end(), 0);
    std::shuffle(features.begin(), features.end(), rng);
    const auto inactive = static_cast<std::size_t>(
        std::llround(sv.inactive_fraction * static_cast<double>(sv.dim)));
    features.resize(std::min(inactive, sv.dim));
    std::sort(features.begin(), features.end());
    for (std::size_t f : features) w.row(static_cast<Eigen::Index>(f)).setZero();

    const RowVector b = draw(1, d, config.bias_scale);
    const double noise_sd =
        sv.kind == ViewKind::kCategorical ? 1.0 : 1.0 / std::sqrt(config.noise_tau);
    Matrix x = ((out.z * w.transpose()).rowwise() + b) + draw(n, d, noise_sd);

    ViewData view;
    view.spec.name = "view" + std::to_string(m);
    view.spec.kind = sv.kind;
    view.spec.dim = sv.dim;
    switch (sv.kind) {
      case ViewKind::kReal:
        view.values = x;
        break;
      case ViewKind::kBinary:
        view.values.resize(n, d);
        for (Eigen::Index i = 0; i < n; ++i) {
          for (Eigen::Index j = 0; j < d; ++j) {
            view.values(i, j) = uniform(rng) < sigmoid(x(i, j)) ? 1.0 : 0.0;
          }
        }
        break;
      case ViewKind::kCategorical:
        view.values.resize(n, 1);
        for (Eigen::Index i = 0; i < n; ++i) {
          Eigen::Index best = 0;
          x.row(i).maxCoeff(&best);
          view.values(i, 0) = static_cast<double>(best);
        }
        break;
    }
    view.missing = Mask::Constant(view.values.rows(), view.values.cols(), false);
    out.data.views.push_back(std::move(view));
    out.w.push_back(std::move(w));
    out.b.push_back(b);
    out.latent_x.push_back(std::move(x));
    out.inactive_features.push_back(std::move(features));
  }
  return out;
}

Mask mask_random_cells(ObservationSet& data, std::size_t m, double fraction,
                       std::uint64_t seed) {
  ViewData& view = data.views.at(m);
  const Eigen::Index rows = view.values.rows();
  const Eigen::Index cols = view.values.cols();
  std::vector<Eigen::Index> cells(static_cast<std::size_t>(rows * cols));
  std::iota(cells.begin(), cells.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(cells.begin(), cells.end(), rng);
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(cells.size())));
  Mask added = Mask::Constant(rows, cols, false);
  for (std::size_t c = 0; c < std::min(count, cells.size()); ++c) {
    const Eigen::Index i = cells[c] / cols;
    const Eigen::Index j = cells[c] % cols;
    added(i, j) = !view.missing(i, j);
    view.missing(i, j) = true;
  }
  return added;
}

std::vector<std::size_t> random_subsample(std::size_t n, double fraction, std::uint64_t seed) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(rows.begin(), rows.end(), rng);
  const auto keep = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  rows.resize(std::min(keep, n));
  std::sort(rows.begin(), rows.end());
  return rows;
}

ObservationSet select_rows(const ObservationSet& data, std::span<const std::size_t> rows) {
  ObservationSet out;
  out.n_samples = rows.size();
  for (const ViewData& view : data.views) {
    ViewData sub;
    sub.spec = view.spec;
    sub.values.resize(static_cast<Eigen::Index>(rows.size()), view.values.cols());
    sub.missing.resize(static_cast<Eigen::Index>(rows.size()), view.missing.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r] >= data.n_samples) raise(ErrorKind::kInvalidData, "row index out of range");
      sub.values.row(static_cast<Eigen::Index>(r)) = view.values.row(static_cast<Eigen::Index>(rows[r]));
      sub.missing.row(static_cast<Eigen::Index>(r)) = view.missing.row(static_cast<Eigen::Index>(rows[r]));
    }
    out.views.push_back(std::move(sub));
  }
  return out;
}

}  // namespace sshiba

#ifndef SSHIBA_EVALUATION_HPP
#define SSHIBA_EVALUATION_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sshiba/model.hpp"

namespace sshiba {

// Area under the ROC curve as the Mann-Whitney statistic with midranks for
// ties. Labels are 0/1. Throws Error(kSingleClass) unless both are present.
double auc_binary(std::span<const double> scores, std::span<const int> labels);

// Balanced multiclass AUC: (1/N) sum_c N_c AUC_c with one-vs-rest AUC_c
// computed from column c of `scores` (N x C). Classes absent from `labels`
// carry zero weight. Throws Error(kSingleClass) if fewer than two classes
// occur.
double auc_multiclass_balanced(const Matrix& scores, std::span<const int> labels);

// Multi-label analogue used for binary target views: one AUC per label
// column, weighted by its positive count. Columns holding a single class are
// skipped. Throws Error(kSingleClass) if no column has both classes.
double auc_multilabel_weighted(const Matrix& scores, const Matrix& labels);

enum class ImputeStrategy { kMean, kMedian, kMostFrequent };

// Replace masked cells by the column statistic over observed cells. Ties in
// most-frequent resolve to the smallest value; the median of an even count
// is the midpoint. Throws Error(kEmptyColumn) for a fully masked column.
Matrix impute_baseline(const Matrix& values, const Mask& missing, ImputeStrategy strategy);

// Root-mean-square difference over the cells selected by `cells`.
double masked_rmse(const Matrix& estimate, const Matrix& truth, const Mask& cells);

struct SyntheticView {
  ViewKind kind = ViewKind::kReal;
  std::size_t dim = 1;
  // Fraction of features whose loading rows are exactly zero.
  double inactive_fraction = 0.0;
};

struct SyntheticConfig {
  std::size_t n = 100;
  std::vector<SyntheticView> views;
  std::size_t k_true = 2;
  // Noise precision of real and binary views (categorical views use 1).
  double noise_tau = 1.0;
  std::uint64_t seed = 0;
  double loading_scale = 1.0;
  double bias_scale = 1.0;
};

struct SyntheticData {
  ObservationSet data;
  Matrix z;
  std::vector<Matrix> w;
  std::vector<RowVector> b;
  // Noisy real-valued matrix behind each view before any link function.
  std::vector<Matrix> latent_x;
  // Sorted indices of the zeroed loading rows, per view.
  std::vector<std::vector<std::size_t>> inactive_features;
};

// Forward sample of the generative model: Z ~ N(0, I), x = Z W^T + b + eps;
// binary labels ~ Bernoulli(sigmoid(x)); categorical labels = argmax of x.
SyntheticData generate_synthetic(const SyntheticConfig& config);

// Marks a uniformly random `fraction` of the cells of view m as missing
// (rows for categorical views). Returns the newly masked cells.
Mask mask_random_cells(ObservationSet& data, std::size_t m, double fraction,
                       std::uint64_t seed);

// Seeded random subsample of round(fraction * n) sorted row indices.
std::vector<std::size_t> random_subsample(std::size_t n, double fraction, std::uint64_t seed);

ObservationSet select_rows(const ObservationSet& data, std::span<const std::size_t> rows);

}  // namespace sshiba

#endif  // SSHIBA_EVALUATION_HPP

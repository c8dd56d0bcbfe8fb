#ifndef SSHIBA_PREDICTIVE_HPP
#define SSHIBA_PREDICTIVE_HPP

#include <cstddef>
#include <map>
#include <vector>

#include "sshiba/model.hpp"

namespace sshiba {

// Test-time request. `observed` maps a view index to its S x D data rows
// (S x 1 zero-based labels for categorical views); every observed matrix
// must have the same number of rows S. `targets` lists the views to predict.
struct PredictionRequest {
  std::map<std::size_t, Matrix> observed;
  std::vector<std::size_t> targets;
  // Only the point-estimate mode (Theta at its variational means) exists.
  bool point_estimate = true;
  // Number of samples when `observed` is empty.
  std::size_t n_samples = 1;

  std::size_t sample_count() const;
};

// Gaussian posterior of the latent projection of the new samples. The
// covariance is shared by every sample.
struct LatentPosterior {
  Matrix mean;  // S x K
  Matrix cov;   // K x K
};

struct ViewPrediction {
  std::size_t view = 0;
  Matrix mean;  // S x D
  Matrix cov;   // D x D, shared by every sample
  // Binary: sigmoid(mean), S x D. Categorical: probit class simplex, S x D.
  Matrix probabilities;
  // Binary: 0/1 decisions at 0.5, S x D. Categorical: argmax class, S x 1.
  Matrix labels;
};

struct PredictionResult {
  LatentPosterior latent;
  std::vector<ViewPrediction> views;
};

// Sigma^{-1} = I + sum_{m in M_in} tau W^T W,
// <z*> = sum_{m in M_in} tau (x - <b>) W Sigma.
// Binary inputs enter as 2t - 1, categorical inputs as one-hot rows.
// Throws Error(kUnknownView) for out-of-range or overlapping view indices,
// Error(kInvalidData) for malformed rows.
LatentPosterior latent_posterior(const ModelState& model, const PredictionRequest& request);

// Sigma = tau^{-1} I + W Sigma_z W^T, mu = <z*> W^T + <b>.
ViewPrediction predict_view(const ModelState& model, const LatentPosterior& latent,
                            std::size_t m);

PredictionResult predict(const ModelState& model, const PredictionRequest& request);

}  // namespace sshiba

#endif  // SSHIBA_PREDICTIVE_HPP

#ifndef SSHIBA_TESTS_FIXTURES_HPP
#define SSHIBA_TESTS_FIXTURES_HPP

#include <string>

#include "sshiba/model.hpp"

namespace fixtures {

inline sshiba::ViewData view(std::string name, sshiba::ViewKind kind, sshiba::Matrix values,
                             std::size_t dim = 0, bool feature_selection = true) {
  sshiba::ViewData v;
  v.spec.name = std::move(name);
  v.spec.kind = kind;
  v.spec.dim = dim != 0 ? dim : static_cast<std::size_t>(values.cols());
  v.spec.feature_selection = feature_selection;
  v.missing = sshiba::Mask::Constant(values.rows(), values.cols(), false);
  v.values = std::move(values);
  return v;
}

inline sshiba::ObservationSet observations(std::vector<sshiba::ViewData> views) {
  sshiba::ObservationSet out;
  out.n_samples = views.empty() ? 0 : static_cast<std::size_t>(views.front().values.rows());
  out.views = std::move(views);
  return out;
}

// Removes every latent column, leaving a K = 0 state.
inline void drop_all_columns(sshiba::ModelState& s) {
  std::vector<std::size_t> all;
  for (std::size_t k = 0; k < s.k_current; ++k) all.push_back(k);
  s.z.drop_columns(all);
  for (auto& v : s.views) {
    v.w.drop_columns(all);
    v.alpha.drop(all);
  }
  s.k_current = 0;
}

inline sshiba::Hyperparameters small_hp(std::size_t k, std::uint64_t seed = 0) {
  sshiba::Hyperparameters hp;
  hp.k_init = k;
  hp.restarts = 1;
  hp.seed = seed;
  hp.threads = 1;
  return hp;
}

}  // namespace fixtures

#endif

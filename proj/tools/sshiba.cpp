// sshiba command-line front end.
//
//   sshiba fit       --manifest M --out DIR [fit flags]
//   sshiba predict   --model F --manifest M --out DIR [--target NAME ...]
//   sshiba impute    --manifest M --out DIR [--model F | fit flags]
//   sshiba relevance --model F --out DIR
//   sshiba report    --model F --out DIR [--manifest M]
//   sshiba synth     --out DIR --view real:30 [--view binary:5:0.5 ...]
//
// Errors go to stderr as a single "Kind: message" line.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sshiba/engine.hpp"
#include "sshiba/error.hpp"
#include "sshiba/evaluation.hpp"
#include "sshiba/io.hpp"
#include "sshiba/predictive.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace sshiba;

namespace {

constexpr int kExitParse = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitUsage = 4;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNotPositiveDefinite:
    case ErrorKind::kNegativeRate:
    case ErrorKind::kAllPruned:
    case ErrorKind::kDegenerateNormalizer:
      return kExitNumeric;
    case ErrorKind::kUnknownView:
    case ErrorKind::kUsage:
      return kExitUsage;
    default:
      return kExitParse;
  }
}

struct FitFlags {
  std::size_t k_init = 100;
  std::size_t restarts = 10;
  std::size_t max_iter = 50000;
  double prune_threshold = 1e-6;
  double tol = 1e-8;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  bool no_feature_selection = false;
};

void add_fit_flags(CLI::App* cmd, FitFlags& f) {
  cmd->add_option("--k-init", f.k_init, "Initial latent dimension")->capture_default_str();
  cmd->add_option("--restarts", f.restarts, "Independent random restarts")->capture_default_str();
  cmd->add_option("--max-iter", f.max_iter, "Iteration cap per restart")->capture_default_str();
  cmd->add_option("--prune-threshold", f.prune_threshold, "Column pruning threshold")
      ->capture_default_str();
  cmd->add_option("--tol", f.tol, "Relative ELBO convergence tolerance")->capture_default_str();
  cmd->add_option("--seed", f.seed, "Base RNG seed")->capture_default_str();
  cmd->add_option("--threads", f.threads, "Restart workers (0 = hardware)")->capture_default_str();
  cmd->add_flag("--no-feature-selection", f.no_feature_selection,
                "Disable the per-feature ARD prior on every view");
}

Hyperparameters to_hyperparameters(const FitFlags& f) {
  Hyperparameters hp;
  hp.k_init = f.k_init;
  hp.restarts = f.restarts;
  hp.max_iters = f.max_iter;
  hp.prune_threshold = f.prune_threshold;
  hp.convergence_rel_tol = f.tol;
  hp.seed = f.seed;
  hp.threads = f.threads;
  return hp;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::kParseError, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json report_json(const FitReport& r, const Hyperparameters& hp) {
  json pruned = json::array();
  for (const auto& [it, cols] : r.pruned_at) pruned.push_back({{"iteration", it}, {"columns", cols}});
  return json{{"iterations", r.iterations},   {"final_elbo", r.final_elbo},
              {"k_init", hp.k_init},          {"k_final", r.k_final},
              {"converged", r.converged},     {"restart_chosen", r.restart_chosen},
              {"restart_elbos", r.restart_elbos}, {"pruned_at", pruned}};
}

std::size_t find_view(const ModelState& model, const std::string& name) {
  for (std::size_t m = 0; m < model.views.size(); ++m) {
    if (model.views[m].spec.name == name) return m;
  }
  raise(ErrorKind::kUnknownView, "view '" + name + "' is not in the model");
}

FitResult run_fit(Dataset& dataset, const FitFlags& flags) {
  if (flags.no_feature_selection) {
    for (ViewData& v : dataset.data.views) v.spec.feature_selection = false;
  }
  return fit(dataset.data, to_hyperparameters(flags));
}

void save_fit(const FitResult& result, const fs::path& out) {
  fs::create_directories(out);
  save_model(result.state, out / "model.sshiba");
  write_json(out / "fit_report.json", report_json(result.report, result.state.hp));
}

std::string dims(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

// Rows of every input view of `dataset` matched against `model`, keyed by
// model view index. Views tagged as targets are skipped.
std::map<std::size_t, Matrix> observed_inputs(const ModelState& model, const Dataset& dataset) {
  std::map<std::size_t, Matrix> observed;
  for (std::size_t i = 0; i < dataset.data.views.size(); ++i) {
    if (dataset.roles[i] == ViewRole::kTarget) continue;
    const ViewData& v = dataset.data.views[i];
    const std::size_t m = find_view(model, v.spec.name);
    if (v.spec.kind != model.views[m].spec.kind) {
      raise(ErrorKind::kShapeMismatch, "view '" + v.spec.name + "' is " +
                                           std::string(to_string(v.spec.kind)) + " in the manifest but " +
                                           std::string(to_string(model.views[m].spec.kind)) + " in the model");
    }
    if (v.any_missing()) {
      raise(ErrorKind::kInvalidData, "view '" + v.spec.name + "': prediction inputs must be complete");
    }
    observed.emplace(m, v.values);
  }
  return observed;
}

void write_prediction(const ModelState& model, const ViewPrediction& p, const fs::path& out) {
  const std::string& name = model.views[p.view].spec.name;
  write_csv(out / (name + "_mean.csv"), p.mean);
  if (p.probabilities.size() > 0) write_csv(out / (name + "_prob.csv"), p.probabilities);
  if (p.labels.size() > 0) write_csv(out / (name + "_labels.csv"), p.labels);
}

// --- commands --------------------------------------------------------------

void cmd_fit(const fs::path& manifest, const fs::path& out, const FitFlags& flags) {
  Dataset dataset = load_dataset(manifest);
  const FitResult result = run_fit(dataset, flags);
  save_fit(result, out);
}

void cmd_predict(const fs::path& model_path, const fs::path& manifest, const fs::path& out,
                 const std::vector<std::string>& target_names) {
  const ModelState model = load_model(model_path);
  PredictionRequest request;
  std::set<std::size_t> targets;
  for (const std::string& name : target_names) targets.insert(find_view(model, name));
  std::optional<Dataset> dataset;
  if (!manifest.empty()) {
    dataset = load_dataset(DatasetManifest::parse(manifest));
    request.observed = observed_inputs(model, *dataset);
    if (target_names.empty()) {
      for (std::size_t i = 0; i < dataset->data.views.size(); ++i) {
        if (dataset->roles[i] == ViewRole::kTarget) {
          targets.insert(find_view(model, dataset->data.views[i].spec.name));
        }
      }
    }
  }
  if (targets.empty()) {
    for (std::size_t m = 0; m < model.views.size(); ++m) {
      if (!request.observed.count(m)) targets.insert(m);
    }
  }
  request.targets.assign(targets.begin(), targets.end());
  const PredictionResult result = predict(model, request);
  fs::create_directories(out);
  write_csv(out / "latent_mean.csv", result.latent.mean);
  for (const ViewPrediction& p : result.views) write_prediction(model, p, out);
}

void cmd_impute(const fs::path& manifest, const fs::path& out, const fs::path& model_path,
                const FitFlags& flags) {
  Dataset dataset = load_dataset(manifest);
  ModelState model;
  if (model_path.empty()) {
    const FitResult result = run_fit(dataset, flags);
    save_fit(result, out);
    model = result.state;
  } else {
    model = load_model(model_path);
  }
  if (model.n_samples() != dataset.data.n_samples) {
    raise(ErrorKind::kShapeMismatch, "model was fit on " + std::to_string(model.n_samples()) +
                                         " samples, manifest has " +
                                         std::to_string(dataset.data.n_samples));
  }
  fs::create_directories(out);
  for (const ViewData& view : dataset.data.views) {
    const std::size_t m = find_view(model, view.spec.name);
    const ViewState& v = model.views[m];
    if (v.spec.kind != view.spec.kind || (view.spec.kind != ViewKind::kCategorical &&
                                          v.x.mean.cols() != view.values.cols())) {
      raise(ErrorKind::kShapeMismatch, "view '" + view.spec.name + "' does not match the model (" +
                                           dims(view.values) + ")");
    }
    Matrix completed = view.values;
    for (Eigen::Index i = 0; i < completed.rows(); ++i) {
      for (Eigen::Index j = 0; j < completed.cols(); ++j) {
        if (!view.missing(i, j)) continue;
        switch (view.spec.kind) {
          case ViewKind::kReal:
            completed(i, j) = v.x.mean(i, j);
            break;
          case ViewKind::kBinary:
            completed(i, j) = v.label_posterior(i, j) > 0.5 ? 1.0 : 0.0;
            break;
          case ViewKind::kCategorical: {
            Eigen::Index best = 0;
            v.label_posterior.row(i).maxCoeff(&best);
            completed(i, j) = static_cast<double>(best);
            break;
          }
        }
      }
    }
    write_csv(out / (view.spec.name + "_imputed.csv"), completed);
    if (view.spec.kind != ViewKind::kReal) {
      write_csv(out / (view.spec.name + "_prob.csv"), v.label_posterior);
    }
  }
}

// Indices sorting `score` in descending order, ties by index.
std::vector<Eigen::Index> descending(const Vector& score) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(score.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return score(a) > score(b); });
  return order;
}

void cmd_relevance(const fs::path& model_path, const fs::path& out) {
  const ModelState model = load_model(model_path);
  fs::create_directories(out);
  std::ofstream csv(out / "relevance.csv", std::ios::binary);
  csv << "view,feature,relevance,rank\n";
  for (const ViewState& v : model.views) {
    if (!v.spec.feature_selection) continue;
    const Vector relevance = v.gamma.mean().cwiseInverse();
    const auto order = descending(relevance);
    for (std::size_t r = 0; r < order.size(); ++r) {
      csv << v.spec.name << ',' << order[r] << ',' << format_double(relevance(order[r])) << ','
          << r + 1 << '\n';
    }
  }
}

json evaluate_targets(const ModelState& model, const Dataset& dataset) {
  json scores = json::object();
  std::vector<std::size_t> rows;
  for (std::size_t n = 0; n < dataset.data.n_samples; ++n) {
    bool complete = true;
    for (std::size_t i = 0; i < dataset.data.views.size(); ++i) {
      complete = complete && !dataset.data.views[i].missing.row(static_cast<Eigen::Index>(n)).any();
    }
    if (complete) rows.push_back(n);
  }
  const Dataset subset{select_rows(dataset.data, rows), dataset.roles};
  PredictionRequest request;
  request.observed = observed_inputs(model, subset);
  for (std::size_t i = 0; i < subset.data.views.size(); ++i) {
    if (subset.roles[i] != ViewRole::kTarget) continue;
    const ViewData& truth = subset.data.views[i];
    const std::size_t m = find_view(model, truth.spec.name);
    request.targets = {m};
    const ViewPrediction p = predict(model, request).views.front();
    json entry{{"kind", to_string(truth.spec.kind)}, {"samples", rows.size()}};
    switch (truth.spec.kind) {
      case ViewKind::kReal:
        entry["rmse"] = masked_rmse(p.mean, truth.values,
                                    Mask::Constant(truth.values.rows(), truth.values.cols(), true));
        break;
      case ViewKind::kBinary:
        entry["auc_weighted"] = auc_multilabel_weighted(p.probabilities, truth.values);
        break;
      case ViewKind::kCategorical: {
        std::vector<int> labels(static_cast<std::size_t>(truth.values.rows()));
        for (Eigen::Index n = 0; n < truth.values.rows(); ++n) {
          labels[static_cast<std::size_t>(n)] = static_cast<int>(truth.values(n, 0));
        }
        entry["auc_mc"] = auc_multiclass_balanced(p.probabilities, labels);
        break;
      }
    }
    scores[truth.spec.name] = entry;
  }
  return scores;
}

void cmd_report(const fs::path& model_path, const fs::path& out, const fs::path& manifest) {
  const ModelState model = load_model(model_path);
  fs::create_directories(out);
  json summary{{"k_current", model.k_current},
               {"iterations", model.elbo_trace.size()},
               {"final_elbo", model.elbo_trace.empty() ? 0.0 : model.elbo_trace.back()}};
  json views = json::array();
  for (const ViewState& v : model.views) {
    const Vector relevance = v.alpha.mean().cwiseInverse();
    const auto order = descending(relevance);
    Matrix sorted(v.w.rows(), static_cast<Eigen::Index>(order.size()));
    std::vector<std::string> header;
    for (std::size_t c = 0; c < order.size(); ++c) {
      sorted.col(static_cast<Eigen::Index>(c)) = v.w.mean.col(order[c]);
      header.push_back("factor_" + std::to_string(order[c]));
    }
    write_csv(out / (v.spec.name + "_W.csv"), sorted, header);
    {
      std::ofstream csv(out / (v.spec.name + "_alpha.csv"), std::ios::binary);
      csv << "factor,alpha,relevance\n";
      for (Eigen::Index k : order) {
        csv << k << ',' << format_double(v.alpha.mean()(k)) << ',' << format_double(relevance(k)) << '\n';
      }
    }
    if (v.spec.feature_selection) {
      std::ofstream csv(out / (v.spec.name + "_gamma.csv"), std::ios::binary);
      csv << "feature,gamma,relevance\n";
      const Vector gamma = v.gamma.mean();
      for (Eigen::Index d = 0; d < gamma.size(); ++d) {
        csv << d << ',' << format_double(gamma(d)) << ',' << format_double(1.0 / gamma(d)) << '\n';
      }
    }
    views.push_back({{"name", v.spec.name},
                     {"kind", to_string(v.spec.kind)},
                     {"dim", v.spec.dim},
                     {"tau", v.tau_mean()},
                     {"feature_selection", v.spec.feature_selection}});
  }
  summary["views"] = views;
  if (!manifest.empty()) summary["scores"] = evaluate_targets(model, load_dataset(manifest));
  write_json(out / "report.json", summary);
}

SyntheticView parse_synth_view(const std::string& text) {
  SyntheticView view;
  const auto first = text.find(':');
  if (first == std::string::npos) {
    raise(ErrorKind::kUsage, "--view expects kind:dim[:inactive_fraction], got '" + text + "'");
  }
  try {
    view.kind = parse_view_kind(text.substr(0, first));
    const auto second = text.find(':', first + 1);
    view.dim = std::stoul(text.substr(first + 1, second - first - 1));
    if (second != std::string::npos) view.inactive_fraction = std::stod(text.substr(second + 1));
  } catch (const std::exception&) {
    raise(ErrorKind::kUsage, "--view expects kind:dim[:inactive_fraction], got '" + text + "'");
  }
  return view;
}

struct SynthFlags {
  std::size_t n = 100;
  std::size_t k = 4;
  double noise_tau = 100.0;
  std::uint64_t seed = 0;
  double missing = 0.0;
  std::vector<std::string> views;
  std::vector<std::size_t> targets;
};

void cmd_synth(const SynthFlags& f, const fs::path& out) {
  SyntheticConfig config;
  config.n = f.n;
  config.k_true = f.k;
  config.noise_tau = f.noise_tau;
  config.seed = f.seed;
  for (const std::string& v : f.views) config.views.push_back(parse_synth_view(v));
  SyntheticData syn = generate_synthetic(config);
  Dataset dataset{syn.data, std::vector<ViewRole>(syn.data.views.size(), ViewRole::kInput)};
  for (std::size_t t : f.targets) {
    if (t >= dataset.roles.size()) raise(ErrorKind::kUsage, "--target index out of range");
    dataset.roles[t] = ViewRole::kTarget;
  }
  if (f.missing > 0.0) {
    for (std::size_t m = 0; m < dataset.data.views.size(); ++m) {
      mask_random_cells(dataset.data, m, f.missing, f.seed + 1000003 * (m + 1));
    }
  }
  save_dataset(dataset, out);
  write_csv(out / "truth_z.csv", syn.z);
  for (std::size_t m = 0; m < syn.w.size(); ++m) {
    write_csv(out / ("truth_w_" + dataset.data.views[m].spec.name + ".csv"), syn.w[m]);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse semi-supervised Bayesian inter-battery factor analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "sshiba 0.1.0");

  FitFlags fit_flags;
  fs::path manifest, out, model_path;
  std::vector<std::string> targets;
  SynthFlags synth;

  auto* fit_cmd = app.add_subcommand("fit", "Fit a model and write model.sshiba + fit_report.json");
  fit_cmd->add_option("--manifest", manifest, "Dataset manifest")->required();
  fit_cmd->add_option("--out", out, "Output directory")->required();
  add_fit_flags(fit_cmd, fit_flags);

  auto* predict_cmd = app.add_subcommand("predict", "Predict target views from observed views");
  predict_cmd->add_option("--model", model_path, "Model file")->required();
  predict_cmd->add_option("--manifest", manifest, "Manifest of the observed (input) views");
  predict_cmd->add_option("--target,--targets", targets, "Target view name(s)")->delimiter(',');
  predict_cmd->add_option("--out", out, "Output directory")->required();

  auto* impute_cmd = app.add_subcommand("impute", "Write completed matrices for every view");
  impute_cmd->add_option("--manifest", manifest, "Dataset manifest")->required();
  impute_cmd->add_option("--model", model_path, "Model fit on this dataset (fits one if omitted)");
  impute_cmd->add_option("--out", out, "Output directory")->required();
  add_fit_flags(impute_cmd, fit_flags);

  auto* relevance_cmd = app.add_subcommand("relevance", "Rank features by 1/<gamma_d>");
  relevance_cmd->add_option("--model", model_path, "Model file")->required();
  relevance_cmd->add_option("--out", out, "Output directory")->required();

  auto* report_cmd = app.add_subcommand("report", "Write W columns, ARD masks and scores");
  report_cmd->add_option("--model", model_path, "Model file")->required();
  report_cmd->add_option("--out", out, "Output directory")->required();
  report_cmd->add_option("--manifest", manifest, "Held-out data with target views for scoring");

  auto* synth_cmd = app.add_subcommand("synth", "Sample a dataset from the generative model");
  synth_cmd->add_option("--out", out, "Output directory")->required();
  synth_cmd->add_option("--n", synth.n, "Samples")->capture_default_str();
  synth_cmd->add_option("--k", synth.k, "True latent dimension")->capture_default_str();
  synth_cmd->add_option("--noise-tau", synth.noise_tau, "Noise precision")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "RNG seed")->capture_default_str();
  synth_cmd->add_option("--missing", synth.missing, "Fraction of masked cells per view")
      ->capture_default_str();
  synth_cmd->add_option("--view", synth.views, "kind:dim[:inactive_fraction]")->required();
  synth_cmd->add_option("--target", synth.targets, "Index of a view to tag as target");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "Usage: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*fit_cmd) {
      cmd_fit(manifest, out, fit_flags);
    } else if (*predict_cmd) {
      cmd_predict(model_path, manifest, out, targets);
    } else if (*impute_cmd) {
      cmd_impute(manifest, out, model_path, fit_flags);
    } else if (*relevance_cmd) {
      cmd_relevance(model_path, out);
    } else if (*report_cmd) {
      cmd_report(model_path, out, manifest);
    } else if (*synth_cmd) {
      cmd_synth(synth, out);
    }
  } catch (const Error& e) {
    std::cerr << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "ParseError: " << e.what() << "\n";
    return kExitParse;
  } catch (const std::exception& e) {
    std::cerr << "InternalError: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

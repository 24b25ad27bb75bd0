#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "carhhmm/decode.hpp"
#include "carhhmm/inference.hpp"
#include "carhhmm/parallel.hpp"
#include "carhhmm/simulate.hpp"

namespace carhhmm {

// ===========================================================================
// Simulation study
// ===========================================================================
//
// For every replicate: draw an independent training and test set from the
// generating model, fit each candidate variant on the training set, then
// score hidden-state decoding on the test set and collect parameter
// estimates with their information-matrix standard errors.

struct StudyConfig {
  int n_replicates = 10;
  int n_train_dives = 100;
  int n_test_dives = 100;
  std::vector<Variant> variants = {Variant::kCarHhmmDft, Variant::kHhmmDft, Variant::kCarHhmm,
                                   Variant::kCarHmmDft};
  HierModel generating_model = default_generating_model();
  std::uint64_t seed = 1;
  int restarts = 4;
  int max_iters = 500;
  int threads = 0;  // 0 = resolve from HHMM_THREADS / hardware
  bool compute_se = true;
};

struct StudyCell {
  Variant variant = Variant::kCarHhmmDft;
  int replicate = 0;
  bool converged = false;
  double nll = std::numeric_limits<double>::quiet_NaN();
  double fit_seconds = 0.0;
  // decoding accuracy on the test set; dive_accuracy is absent for the
  // non-hierarchical variant
  std::optional<double> dive_accuracy;
  double subdive_accuracy = std::numeric_limits<double>::quiet_NaN();
  std::map<int, double> dive_accuracy_by_type;                       // true type -> accuracy
  std::map<std::pair<int, int>, double> subdive_accuracy_by_truth;   // (type, state) -> accuracy
  // parameter estimates and estimated standard errors, keyed by name
  std::map<std::string, double> estimates;
  std::map<std::string, double> std_errors;
};

struct StudyResult {
  StudyConfig config;
  std::vector<StudyCell> cells;

  std::vector<const StudyCell*> cells_for(Variant v) const {
    std::vector<const StudyCell*> out;
    for (const auto& c : cells)
      if (c.variant == v) out.push_back(&c);
    return out;
  }
};

namespace detail {

struct AccuracyBreakdown {
  double overall_dive = 0.0;
  double overall_subdive = 0.0;
  std::map<int, double> dive_by_type;
  std::map<std::pair<int, int>, double> subdive_by_truth;
};

inline AccuracyBreakdown accuracy_breakdown(const SimDataset& test, const CoarsePosterior& coarse,
                                            const FinePosterior& fine, bool hierarchical) {
  AccuracyBreakdown acc;
  std::map<int, std::pair<double, long>> dive_acc;
  std::map<std::pair<int, int>, std::pair<double, long>> sub_acc;
  double dive_sum = 0.0;
  double sub_sum = 0.0;
  long sub_count = 0;
  for (std::size_t t = 0; t < test.dives.size(); ++t) {
    const int type = test.coarse_states[t];
    if (hierarchical) {
      const double p = coarse.probs(static_cast<int>(t), type);
      dive_sum += p;
      auto& cell = dive_acc[type];
      cell.first += p;
      ++cell.second;
    }
    for (std::size_t w = 0; w < test.fine_states[t].size(); ++w) {
      const int state = test.fine_states[t][w];
      const double p = fine.probs[t](static_cast<int>(w), state);
      sub_sum += p;
      ++sub_count;
      auto& cell = sub_acc[{type, state}];
      cell.first += p;
      ++cell.second;
    }
  }
  acc.overall_dive = dive_sum / static_cast<double>(test.dives.size());
  acc.overall_subdive = sub_sum / static_cast<double>(std::max<long>(sub_count, 1));
  for (const auto& [k, v] : dive_acc) acc.dive_by_type[k] = v.first / static_cast<double>(v.second);
  for (const auto& [k, v] : sub_acc) acc.subdive_by_truth[k] = v.first / static_cast<double>(v.second);
  return acc;
}

}  // namespace detail

/// Train/test dataset pair of one replicate (exposed so the study and any
/// external check derive identical data from a seed).
inline SimDataset study_dataset(const StudyConfig& config, int replicate, bool test_set) {
  SimConfig sim;
  sim.model = config.generating_model;
  sim.n_dives = test_set ? config.n_test_dives : config.n_train_dives;
  sim.seed = SplitRng::keyed(config.seed,
                             static_cast<std::uint64_t>(test_set ? RngPurpose::kStudyTest
                                                                 : RngPurpose::kStudyTrain),
                             static_cast<std::uint64_t>(replicate))
                 .next_u64();
  return simulate_dataset(sim);
}

inline StudyResult simulation_study(const StudyConfig& config) {
  validate_model(config.generating_model);
  StudyResult result;
  result.config = config;
  const int n_units = config.n_replicates * static_cast<int>(config.variants.size());
  result.cells.resize(static_cast<std::size_t>(n_units));

  parallel_for(n_units, resolve_threads(config.threads), [&](int unit) {
    const int replicate = unit / static_cast<int>(config.variants.size());
    const Variant variant =
        config.variants[static_cast<std::size_t>(unit) % config.variants.size()];
    const SimDataset train = study_dataset(config, replicate, false);
    const SimDataset test = study_dataset(config, replicate, true);

    StudyCell cell;
    cell.variant = variant;
    cell.replicate = replicate;

    const ModelSpec spec = make_model_spec(variant, config.generating_model.spec.coarse.n_states,
                                           config.generating_model.spec.fine.n_states,
                                           config.generating_model.spec.n_channels);
    FitOptions opts;
    opts.restarts = config.restarts;
    opts.max_iters = config.max_iters;
    opts.seed = SplitRng::keyed(config.seed, 0xf17, static_cast<std::uint64_t>(unit)).next_u64();
    opts.threads = 1;  // parallelism lives at the unit level

    const auto t0 = std::chrono::steady_clock::now();
    FitResult fit_result = fit(train.dives, spec, std::nullopt, opts);
    cell.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    cell.converged = fit_result.converged;
    cell.nll = fit_result.nll;

    const CoarsePosterior coarse = coarse_posterior(test.dives, fit_result.model);
    const FinePosterior fine = fine_posterior(test.dives, fit_result.model, coarse);
    const bool hierarchical = spec.coarse.structure == CoarseStructure::kHmm;
    const detail::AccuracyBreakdown acc =
        detail::accuracy_breakdown(test, coarse, fine, hierarchical);
    if (hierarchical) cell.dive_accuracy = acc.overall_dive;
    cell.subdive_accuracy = acc.overall_subdive;
    cell.dive_accuracy_by_type = acc.dive_by_type;
    cell.subdive_accuracy_by_truth = acc.subdive_by_truth;

    const NaturalParams nat = natural_params(fit_result.model.params, spec);
    for (std::size_t i = 0; i < nat.names.size(); ++i)
      cell.estimates[nat.names[i]] = nat.values(static_cast<Eigen::Index>(i));
    if (config.compute_se && fit_result.converged) {
      const StdErrors se = observed_fisher_se(fit_result, train.dives, opts);
      for (std::size_t i = 0; i < se.names.size(); ++i)
        cell.std_errors[se.names[i]] = se.se(static_cast<Eigen::Index>(i));
    }
    result.cells[static_cast<std::size_t>(unit)] = std::move(cell);
  });
  return result;
}

// ===========================================================================
// Aggregation
// ===========================================================================

struct VariantSummary {
  Variant variant = Variant::kCarHhmmDft;
  int n_replicates = 0;
  int n_converged = 0;
  std::optional<double> mean_dive_accuracy;
  std::optional<double> sd_dive_accuracy;
  double mean_subdive_accuracy = 0.0;
  double sd_subdive_accuracy = 0.0;
  double mean_fit_seconds = 0.0;
  std::map<std::pair<int, int>, double> mean_subdive_by_truth;
  std::map<int, double> mean_dive_by_type;
  // per parameter name: mean estimate, empirical sd across replicates, and
  // mean estimated standard error
  std::map<std::string, double> mean_estimate;
  std::map<std::string, double> empirical_se;
  std::map<std::string, double> mean_estimated_se;
};

inline VariantSummary summarize_variant(const StudyResult& result, Variant variant) {
  VariantSummary s;
  s.variant = variant;
  const auto cells = result.cells_for(variant);
  s.n_replicates = static_cast<int>(cells.size());
  std::vector<double> dive, sub;
  std::map<std::pair<int, int>, std::vector<double>> sub_by;
  std::map<int, std::vector<double>> dive_by;
  std::map<std::string, std::vector<double>> est, se;
  for (const auto* c : cells) {
    if (c->converged) ++s.n_converged;
    if (c->dive_accuracy) dive.push_back(*c->dive_accuracy);
    sub.push_back(c->subdive_accuracy);
    s.mean_fit_seconds += c->fit_seconds;
    for (const auto& [k, v] : c->subdive_accuracy_by_truth) sub_by[k].push_back(v);
    for (const auto& [k, v] : c->dive_accuracy_by_type) dive_by[k].push_back(v);
    for (const auto& [k, v] : c->estimates) est[k].push_back(v);
    for (const auto& [k, v] : c->std_errors) se[k].push_back(v);
  }
  auto mean = [](const std::vector<double>& x) {
    double m = 0.0;
    for (double v : x) m += v;
    return m / static_cast<double>(x.size());
  };
  auto sd = [&](const std::vector<double>& x) {
    if (x.size() < 2) return 0.0;
    const double m = mean(x);
    double acc = 0.0;
    for (double v : x) acc += (v - m) * (v - m);
    return std::sqrt(acc / static_cast<double>(x.size() - 1));
  };
  if (!dive.empty()) {
    s.mean_dive_accuracy = mean(dive);
    s.sd_dive_accuracy = sd(dive);
  }
  s.mean_subdive_accuracy = mean(sub);
  s.sd_subdive_accuracy = sd(sub);
  s.mean_fit_seconds /= static_cast<double>(std::max(1, s.n_replicates));
  for (const auto& [k, v] : sub_by) s.mean_subdive_by_truth[k] = mean(v);
  for (const auto& [k, v] : dive_by) s.mean_dive_by_type[k] = mean(v);
  for (const auto& [k, v] : est) {
    s.mean_estimate[k] = mean(v);
    s.empirical_se[k] = sd(v);
  }
  for (const auto& [k, v] : se) s.mean_estimated_se[k] = mean(v);
  return s;
}

}  // namespace carhhmm

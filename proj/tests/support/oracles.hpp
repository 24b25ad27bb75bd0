#pragma once

// Brute-force reference implementations used to pin expected values in tests.
// Everything here works in plain probability space by exhaustive path
// enumeration and stays deliberately independent of the library's log-space
// forward/backward code paths.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "carhhmm/models.hpp"

namespace oracle {

using carhhmm::DiveRecord;
using carhhmm::FineEmission;
using carhhmm::FineSpec;
using carhhmm::HierModel;
using carhhmm::TransitionMatrix;
using carhhmm::WindowFeatures;

/// Stationary distribution by power iteration (independent of the linear solve).
inline Eigen::RowVectorXd power_stationary(const TransitionMatrix& gamma, int iters = 20000) {
  const int n = gamma.n_states();
  Eigen::RowVectorXd d = Eigen::RowVectorXd::Constant(n, 1.0 / n);
  for (int it = 0; it < iters; ++it) d = d * gamma.probs;
  return d / d.sum();
}

/// Enumerates all N^T state paths of a path-weighted emission product.
/// `emission(t, state)` must return the plain (not log) emission factor.
inline long double enumerate_likelihood(
    int t_len, const TransitionMatrix& gamma, const Eigen::RowVectorXd& delta,
    const std::function<long double(int t, int state)>& emission) {
  const int n = gamma.n_states();
  long double total = 0.0L;
  std::vector<int> path(static_cast<std::size_t>(t_len), 0);
  const long long n_paths = static_cast<long long>(std::pow(n, t_len) + 0.5);
  for (long long code = 0; code < n_paths; ++code) {
    long long c = code;
    for (int t = 0; t < t_len; ++t) {
      path[static_cast<std::size_t>(t)] = static_cast<int>(c % n);
      c /= n;
    }
    long double w = static_cast<long double>(delta(path[0]));
    for (int t = 1; t < t_len; ++t)
      w *= static_cast<long double>(gamma.probs(path[static_cast<std::size_t>(t - 1)],
                                                 path[static_cast<std::size_t>(t)]));
    for (int t = 0; t < t_len; ++t) w *= emission(t, path[static_cast<std::size_t>(t)]);
    total += w;
  }
  return total;
}

/// Same enumeration but returning the posterior Pr(state at position t) matrix.
inline Eigen::MatrixXd enumerate_posterior(
    int t_len, const TransitionMatrix& gamma, const Eigen::RowVectorXd& delta,
    const std::function<long double(int t, int state)>& emission) {
  const int n = gamma.n_states();
  Eigen::MatrixXd post = Eigen::MatrixXd::Zero(t_len, n);
  long double total = 0.0L;
  std::vector<int> path(static_cast<std::size_t>(t_len), 0);
  const long long n_paths = static_cast<long long>(std::pow(n, t_len) + 0.5);
  for (long long code = 0; code < n_paths; ++code) {
    long long c = code;
    for (int t = 0; t < t_len; ++t) {
      path[static_cast<std::size_t>(t)] = static_cast<int>(c % n);
      c /= n;
    }
    long double w = static_cast<long double>(delta(path[0]));
    for (int t = 1; t < t_len; ++t)
      w *= static_cast<long double>(gamma.probs(path[static_cast<std::size_t>(t - 1)],
                                                 path[static_cast<std::size_t>(t)]));
    for (int t = 0; t < t_len; ++t) w *= emission(t, path[static_cast<std::size_t>(t)]);
    total += w;
    for (int t = 0; t < t_len; ++t)
      post(t, path[static_cast<std::size_t>(t)]) += static_cast<double>(w);
  }
  post /= static_cast<double>(total);
  return post;
}

/// Plain emission factor of window w in fine state i under the fine-model
/// conventions: with use_car the first window's average carries no factor.
inline long double fine_emission_factor(const std::vector<WindowFeatures>& windows, int w, int state,
                                        std::span<const FineEmission> emissions,
                                        const FineSpec& spec) {
  const FineEmission& e = emissions[static_cast<std::size_t>(state)];
  long double f = 1.0L;
  auto normal_pdf = [](double x, double mean, double sd) -> long double {
    const long double z = (x - mean) / sd;
    return std::exp(-0.5L * z * z) / (sd * std::sqrt(2.0L * 3.14159265358979323846264338328L));
  };
  const auto& win = windows[static_cast<std::size_t>(w)];
  if (spec.use_car) {
    if (w == 0) {
      if (spec.model_first_avg)
        for (int c = 0; c < win.avg.size(); ++c)
          f *= normal_pdf(win.avg(c), e.avg.mean(c), e.avg.sd(c));
    } else {
      const auto& prev = windows[static_cast<std::size_t>(w - 1)];
      for (int c = 0; c < win.avg.size(); ++c)
        f *= normal_pdf(win.avg(c), e.avg.phi * prev.avg(c) + (1.0 - e.avg.phi) * e.avg.mean(c),
                        e.avg.sd(c));
    }
  } else {
    for (int c = 0; c < win.avg.size(); ++c) f *= normal_pdf(win.avg(c), e.avg.mean(c), e.avg.sd(c));
  }
  if (spec.has_wiggle) {
    const double a = e.wiggle->shape();
    const double s = e.wiggle->scale();
    const double x = win.wiggliness;
    f *= x > 0.0 ? std::exp(static_cast<long double>((a - 1.0) * std::log(x) - x / s -
                                                     std::lgamma(a) - a * std::log(s)))
                 : 0.0L;
  }
  return f;
}

inline long double gamma_pdf(double x, const carhhmm::GammaMeanSd& g) {
  if (!(x > 0.0)) return 0.0L;
  const double a = g.shape();
  const double s = g.scale();
  return std::exp(static_cast<long double>((a - 1.0) * std::log(x) - x / s - std::lgamma(a) -
                                           a * std::log(s)));
}

inline long double enumerate_fine_likelihood(const std::vector<WindowFeatures>& windows,
                                             const TransitionMatrix& fine_gamma,
                                             std::span<const FineEmission> emissions,
                                             const FineSpec& spec) {
  if (windows.empty()) return 1.0L;
  return enumerate_likelihood(static_cast<int>(windows.size()), fine_gamma,
                              power_stationary(fine_gamma), [&](int w, int state) {
                                return fine_emission_factor(windows, w, state, emissions, spec);
                              });
}

/// Bundled coarse emission factor of one dive: coarse duration density times
/// the enumerated fine likelihood of its windows.
inline long double hier_dive_factor(const DiveRecord& dive, const HierModel& model, int coarse_state) {
  const long double coarse =
      gamma_pdf(dive.duration_s, model.params.coarse_emissions[static_cast<std::size_t>(coarse_state)]);
  const long double fine = enumerate_fine_likelihood(
      dive.windows, model.params.fine_gammas[static_cast<std::size_t>(coarse_state)],
      model.fine_emissions_for(coarse_state), model.spec.fine);
  return coarse * fine;
}

inline long double enumerate_hier_likelihood(std::span<const DiveRecord> dives,
                                             const HierModel& model) {
  if (model.spec.coarse.structure == carhhmm::CoarseStructure::kIid) {
    long double total = 1.0L;
    for (const auto& dive : dives) total *= hier_dive_factor(dive, model, 0);
    return total;
  }
  return enumerate_likelihood(static_cast<int>(dives.size()), *model.params.coarse_gamma,
                              power_stationary(*model.params.coarse_gamma), [&](int t, int state) {
                                return hier_dive_factor(dives[static_cast<std::size_t>(t)], model,
                                                        state);
                              });
}

/// Coarse posterior by enumeration over coarse paths (fine likelihoods enter
/// as bundled per-dive factors).
inline Eigen::MatrixXd enumerate_coarse_posterior(std::span<const DiveRecord> dives,
                                                  const HierModel& model) {
  return enumerate_posterior(static_cast<int>(dives.size()), *model.params.coarse_gamma,
                             power_stationary(*model.params.coarse_gamma), [&](int t, int state) {
                               return hier_dive_factor(dives[static_cast<std::size_t>(t)], model,
                                                       state);
                             });
}

/// Fine posterior for one dive by mixing the per-coarse-state enumerated
/// within-dive posterior with the coarse posterior of that dive.
inline Eigen::MatrixXd enumerate_fine_posterior(std::span<const DiveRecord> dives,
                                                const HierModel& model, int dive_index,
                                                const Eigen::MatrixXd& coarse_posterior) {
  const DiveRecord& dive = dives[static_cast<std::size_t>(dive_index)];
  const int n_fine = model.spec.fine.n_states;
  const int n_windows = static_cast<int>(dive.windows.size());
  Eigen::MatrixXd post = Eigen::MatrixXd::Zero(n_windows, n_fine);
  for (int i = 0; i < model.spec.coarse.n_states; ++i) {
    const Eigen::MatrixXd within = enumerate_posterior(
        n_windows, model.params.fine_gammas[static_cast<std::size_t>(i)],
        power_stationary(model.params.fine_gammas[static_cast<std::size_t>(i)]),
        [&](int w, int state) {
          return fine_emission_factor(dive.windows, w, state, model.fine_emissions_for(i),
                                      model.spec.fine);
        });
    post += coarse_posterior(dive_index, i) * within;
  }
  return post;
}

}  // namespace oracle

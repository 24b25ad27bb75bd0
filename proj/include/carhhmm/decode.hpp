#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "carhhmm/models.hpp"
#include "carhhmm/special.hpp"

namespace carhhmm {

// ===========================================================================
// Forward-backward smoothing at both scales
// ===========================================================================

/// Row t holds Pr(dive type of dive t | all data); rows sum to 1.
struct CoarsePosterior {
  Eigen::MatrixXd probs;
};

/// One matrix per dive; row w holds Pr(subdive state of window w | all data).
struct FinePosterior {
  std::vector<Eigen::MatrixXd> probs;
};

namespace detail {

/// Shared state of the coarse-scale recursions: the bundled log emissions
/// split into the duration part and the fine part, plus the forward, backward
/// and predictive lattices. For the iid structure the chain is a single state.
struct CoarseLattices {
  TransitionMatrix gamma;     // effective coarse chain (one state when iid)
  Eigen::MatrixXd dur_lem;    // T x N, duration log-densities
  Eigen::MatrixXd fine_lem;   // T x N, per-dive fine log-likelihoods
  Eigen::MatrixXd lalpha;     // forward, includes both emission parts
  Eigen::MatrixXd lbeta;      // backward
  Eigen::MatrixXd lpred;      // log sum_k alpha_{t-1,k} Gamma_ki (log delta at t = 0)
  double loglik = 0.0;
};

inline CoarseLattices coarse_lattices(std::span<const DiveRecord> dives, const HierModel& model) {
  validate_model(model);
  if (dives.empty()) throw std::invalid_argument("decode: no dives");
  CoarseLattices lat;
  lat.gamma = model.spec.coarse.structure == CoarseStructure::kIid
                  ? TransitionMatrix(Eigen::MatrixXd::Ones(1, 1))
                  : *model.params.coarse_gamma;
  const int n = lat.gamma.n_states();
  const int t_len = static_cast<int>(dives.size());

  const Eigen::MatrixXd lem = hier_log_emissions(dives, model);
  lat.dur_lem.resize(t_len, n);
  lat.fine_lem.resize(t_len, n);
  for (int t = 0; t < t_len; ++t)
    for (int i = 0; i < n; ++i) {
      lat.dur_lem(t, i) = gamma_logpdf(dives[static_cast<std::size_t>(t)].duration_s,
                                       model.params.coarse_emissions[static_cast<std::size_t>(i)]);
      lat.fine_lem(t, i) = lem(t, i) - lat.dur_lem(t, i);
    }

  const Eigen::MatrixXd log_gamma = log_matrix(lat.gamma);
  const Eigen::RowVectorXd log_delta = log_row(stationary(lat.gamma));
  lat.lalpha = forward_lattice(lem, log_gamma, log_delta);
  lat.lbeta = backward_lattice(lem, log_gamma);
  lat.lpred.resize(t_len, n);
  lat.lpred.row(0) = log_delta;
  std::vector<double> scratch(static_cast<std::size_t>(n));
  for (int t = 1; t < t_len; ++t)
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i)
        scratch[static_cast<std::size_t>(i)] = lat.lalpha(t - 1, i) + log_gamma(i, j);
      lat.lpred(t, j) = log_sum_exp(scratch);
    }
  lat.loglik = log_sum_exp(Eigen::VectorXd(lat.lalpha.row(t_len - 1).transpose()));
  return lat;
}

inline Eigen::MatrixXd normalize_log_rows(const Eigen::MatrixXd& log_weights) {
  Eigen::MatrixXd out(log_weights.rows(), log_weights.cols());
  for (int t = 0; t < log_weights.rows(); ++t) {
    const double z = log_sum_exp(Eigen::VectorXd(log_weights.row(t).transpose()));
    for (int j = 0; j < log_weights.cols(); ++j) out(t, j) = std::exp(log_weights(t, j) - z);
  }
  return out;
}

/// Per-dive fine-scale lattices under the fine chain of one coarse state.
struct FineLattices {
  Eigen::MatrixXd lem;  // windows x N*
  Eigen::MatrixXd lalpha;
  Eigen::MatrixXd lbeta;
  Eigen::MatrixXd lpred;
};

inline FineLattices fine_lattices(const Eigen::MatrixXd& fine_lem, const TransitionMatrix& gamma) {
  FineLattices lat;
  lat.lem = fine_lem;
  const Eigen::MatrixXd log_gamma = log_matrix(gamma);
  const Eigen::RowVectorXd log_delta = log_row(stationary(gamma));
  lat.lalpha = forward_lattice(fine_lem, log_gamma, log_delta);
  lat.lbeta = backward_lattice(fine_lem, log_gamma);
  const int n = static_cast<int>(fine_lem.cols());
  lat.lpred.resize(fine_lem.rows(), n);
  lat.lpred.row(0) = log_delta;
  std::vector<double> scratch(static_cast<std::size_t>(n));
  for (int w = 1; w < fine_lem.rows(); ++w)
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i)
        scratch[static_cast<std::size_t>(i)] = lat.lalpha(w - 1, i) + log_gamma(i, j);
      lat.lpred(w, j) = log_sum_exp(scratch);
    }
  return lat;
}

}  // namespace detail

/// Smoothing probabilities of the dive types given the full data set.
inline CoarsePosterior coarse_posterior(std::span<const DiveRecord> dives, const HierModel& model) {
  const detail::CoarseLattices lat = detail::coarse_lattices(dives, model);
  return CoarsePosterior{detail::normalize_log_rows(lat.lalpha + lat.lbeta)};
}

/// Smoothing probabilities of the subdive states: the coarse posterior mixes
/// the within-dive forward-backward posteriors computed under each coarse
/// state's fine chain.
inline FinePosterior fine_posterior(std::span<const DiveRecord> dives, const HierModel& model,
                                    const CoarsePosterior& coarse) {
  const int n = model.spec.coarse.n_states;
  FinePosterior out;
  out.probs.reserve(dives.size());
  for (std::size_t t = 0; t < dives.size(); ++t) {
    const auto& windows = dives[t].windows;
    if (windows.empty()) {
      out.probs.emplace_back(0, model.spec.fine.n_states);
      continue;
    }
    Eigen::MatrixXd mixed =
        Eigen::MatrixXd::Zero(static_cast<int>(windows.size()), model.spec.fine.n_states);
    for (int i = 0; i < n; ++i) {
      const Eigen::MatrixXd lem =
          detail::fine_log_emissions(windows, model.fine_emissions_for(i), model.spec.fine);
      const detail::FineLattices lat =
          detail::fine_lattices(lem, model.params.fine_gammas[static_cast<std::size_t>(i)]);
      mixed += coarse.probs(static_cast<int>(t), i) *
               detail::normalize_log_rows(lat.lalpha + lat.lbeta);
    }
    out.probs.push_back(std::move(mixed));
  }
  return out;
}

// ===========================================================================
// Decoding summaries
// ===========================================================================

/// Average posterior probability assigned to the true states.
inline double decoding_accuracy(const Eigen::MatrixXd& posterior, std::span<const int> truth) {
  if (static_cast<std::size_t>(posterior.rows()) != truth.size())
    throw std::invalid_argument("decoding_accuracy: length mismatch");
  double acc = 0.0;
  for (int t = 0; t < posterior.rows(); ++t) {
    const int s = truth[static_cast<std::size_t>(t)];
    if (s < 0 || s >= posterior.cols())
      throw std::invalid_argument("decoding_accuracy: state out of range");
    acc += posterior(t, s);
  }
  return acc / static_cast<double>(posterior.rows());
}

/// Subdive version: averages over all dives and windows.
inline double decoding_accuracy(const FinePosterior& posterior,
                                const std::vector<std::vector<int>>& truth) {
  if (posterior.probs.size() != truth.size())
    throw std::invalid_argument("decoding_accuracy: dive count mismatch");
  double acc = 0.0;
  long count = 0;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    const auto& post = posterior.probs[t];
    if (static_cast<std::size_t>(post.rows()) != truth[t].size())
      throw std::invalid_argument("decoding_accuracy: window count mismatch");
    for (int w = 0; w < post.rows(); ++w) {
      acc += post(w, truth[t][static_cast<std::size_t>(w)]);
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("decoding_accuracy: no windows");
  return acc / static_cast<double>(count);
}

/// Per-row argmax with ties broken toward the lower state index.
inline std::vector<int> most_probable_states(const Eigen::MatrixXd& posterior) {
  std::vector<int> states(static_cast<std::size_t>(posterior.rows()));
  for (int t = 0; t < posterior.rows(); ++t) {
    int best = 0;
    for (int j = 1; j < posterior.cols(); ++j)
      if (posterior(t, j) > posterior(t, best)) best = j;
    states[static_cast<std::size_t>(t)] = best;
  }
  return states;
}

// ===========================================================================
// Pseudoresiduals
// ===========================================================================

enum class ResidualTarget { kDuration, kAvgChannel, kWiggliness };

/// One pseudoresidual: the standard-Normal quantile of the observation's
/// leave-one-out conditional CDF. `defined` is false where the model assigns
/// the observation no density factor (the first window's average under the
/// autoregressive convention); `infinite` flags CDF values that collapsed to
/// 0 or 1 in double precision.
struct ResidualEntry {
  int dive_id = 0;
  int window_idx = -1;  // -1 for dive-duration residuals
  int channel = -1;     // -1 unless an average-channel residual
  double value = 0.0;
  double residual = 0.0;
  bool defined = true;
  bool infinite = false;
};

namespace detail {

/// Log emission term contributed by the residual target itself at window w
/// in fine state s (the term removed for leave-one-out weighting), plus its
/// conditional CDF under that state.
struct TargetDensity {
  double log_term = 0.0;
  double cdf = 0.0;
  bool defined = true;
};

inline TargetDensity fine_target_density(const std::vector<WindowFeatures>& windows, int w,
                                         const FineEmission& e, const FineSpec& spec,
                                         ResidualTarget target, int channel) {
  TargetDensity out;
  const auto& win = windows[static_cast<std::size_t>(w)];
  if (target == ResidualTarget::kWiggliness) {
    out.log_term = gamma_logpdf(win.wiggliness, *e.wiggle);
    out.cdf = gamma_cdf(win.wiggliness, *e.wiggle);
    return out;
  }
  // average channel
  double mean;
  if (spec.use_car) {
    if (w == 0) {
      if (!spec.model_first_avg) {
        out.defined = false;
        return out;
      }
      mean = e.avg.mean(channel);
    } else {
      mean = e.avg.phi * windows[static_cast<std::size_t>(w - 1)].avg(channel) +
             (1.0 - e.avg.phi) * e.avg.mean(channel);
    }
  } else {
    mean = e.avg.mean(channel);
  }
  out.log_term = normal_logpdf(win.avg(channel), mean, e.avg.sd(channel));
  out.cdf = normal_cdf(win.avg(channel), mean, e.avg.sd(channel));
  return out;
}

}  // namespace detail

/// Leave-one-out pseudoresiduals for dive durations, one average channel, or
/// wiggliness. The target's own emission factor is dropped from the
/// forward-backward weighting; every other factor (including later windows
/// that condition on the target's value) is retained.
inline std::vector<ResidualEntry> pseudoresiduals(std::span<const DiveRecord> dives,
                                                  const HierModel& model, ResidualTarget target) {
  const detail::CoarseLattices lat = detail::coarse_lattices(dives, model);
  const int n = lat.gamma.n_states();
  std::vector<ResidualEntry> out;

  if (target == ResidualTarget::kDuration) {
    for (int t = 0; t < static_cast<int>(dives.size()); ++t) {
      // coarse weights with dive t's duration factor replaced by 1
      Eigen::VectorXd logw(n);
      for (int i = 0; i < n; ++i) logw(i) = lat.lpred(t, i) + lat.fine_lem(t, i) + lat.lbeta(t, i);
      const double z = log_sum_exp(logw);
      double cdf = 0.0;
      for (int i = 0; i < n; ++i)
        cdf += std::exp(logw(i) - z) *
               gamma_cdf(dives[static_cast<std::size_t>(t)].duration_s,
                         model.params.coarse_emissions[static_cast<std::size_t>(i)]);
      ResidualEntry entry;
      entry.dive_id = dives[static_cast<std::size_t>(t)].dive_id;
      entry.value = dives[static_cast<std::size_t>(t)].duration_s;
      entry.residual = normal_quantile(cdf);
      entry.infinite = !std::isfinite(entry.residual);
      out.push_back(entry);
    }
    return out;
  }

  const int n_channels = target == ResidualTarget::kAvgChannel ? model.spec.n_channels : 1;
  for (int t = 0; t < static_cast<int>(dives.size()); ++t) {
    const auto& windows = dives[static_cast<std::size_t>(t)].windows;
    if (windows.empty()) continue;
    const int n_windows = static_cast<int>(windows.size());
    const int n_fine = model.spec.fine.n_states;

    std::vector<detail::FineLattices> lattices;
    lattices.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const Eigen::MatrixXd lem =
          detail::fine_log_emissions(windows, model.fine_emissions_for(i), model.spec.fine);
      lattices.push_back(
          detail::fine_lattices(lem, model.params.fine_gammas[static_cast<std::size_t>(i)]));
    }

    for (int w = 0; w < n_windows; ++w) {
      for (int c = 0; c < n_channels; ++c) {
        ResidualEntry entry;
        entry.dive_id = dives[static_cast<std::size_t>(t)].dive_id;
        entry.window_idx = w;
        entry.channel = target == ResidualTarget::kAvgChannel ? c : -1;
        entry.value = target == ResidualTarget::kAvgChannel
                          ? windows[static_cast<std::size_t>(w)].avg(c)
                          : windows[static_cast<std::size_t>(w)].wiggliness;

        // per coarse state: leave-one-out fine weights and CDF mix
        Eigen::VectorXd coarse_logw(n);
        Eigen::VectorXd state_cdf(n);
        bool defined = true;
        for (int i = 0; i < n; ++i) {
          const auto& emissions = model.fine_emissions_for(i);
          const detail::FineLattices& fl = lattices[static_cast<std::size_t>(i)];
          Eigen::VectorXd logw(n_fine);
          double cdf_mix = 0.0;
          bool state_defined = true;
          for (int s = 0; s < n_fine; ++s) {
            const detail::TargetDensity td = detail::fine_target_density(
                windows, w, emissions[static_cast<std::size_t>(s)], model.spec.fine, target, c);
            if (!td.defined) {
              state_defined = false;
              break;
            }
            logw(s) = fl.lpred(w, s) + (fl.lem(w, s) - td.log_term) + fl.lbeta(w, s);
          }
          if (!state_defined) {
            defined = false;
            break;
          }
          const double zf = log_sum_exp(logw);
          for (int s = 0; s < n_fine; ++s) {
            const detail::TargetDensity td = detail::fine_target_density(
                windows, w, emissions[static_cast<std::size_t>(s)], model.spec.fine, target, c);
            cdf_mix += std::exp(logw(s) - zf) * td.cdf;
          }
          state_cdf(i) = cdf_mix;
          coarse_logw(i) = lat.lpred(t, i) + lat.dur_lem(t, i) + zf + lat.lbeta(t, i);
        }
        if (!defined) {
          entry.defined = false;
          out.push_back(entry);
          continue;
        }
        const double zc = log_sum_exp(coarse_logw);
        double cdf = 0.0;
        for (int i = 0; i < n; ++i) cdf += std::exp(coarse_logw(i) - zc) * state_cdf(i);
        entry.residual = normal_quantile(cdf);
        entry.infinite = !std::isfinite(entry.residual);
        out.push_back(entry);
      }
    }
  }
  return out;
}

/// Summary statistics of one residual family against its standard-Normal
/// reference: finite residuals only enter the moments and the KS distance.
struct ResidualSummary {
  long n_total = 0;
  long n_finite = 0;
  long n_undefined = 0;
  long n_infinite = 0;
  double mean = 0.0;
  double sd = 0.0;
  double skewness = 0.0;
  double ks_distance = 0.0;
};

inline ResidualSummary residual_summary(const std::vector<ResidualEntry>& entries) {
  ResidualSummary s;
  std::vector<double> finite;
  for (const auto& e : entries) {
    ++s.n_total;
    if (!e.defined) {
      ++s.n_undefined;
      continue;
    }
    if (e.infinite) {
      ++s.n_infinite;
      continue;
    }
    finite.push_back(e.residual);
  }
  s.n_finite = static_cast<long>(finite.size());
  if (finite.empty()) return s;
  double m = 0.0;
  for (double v : finite) m += v;
  m /= static_cast<double>(finite.size());
  double m2 = 0.0, m3 = 0.0;
  for (double v : finite) {
    const double d = v - m;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= static_cast<double>(finite.size());
  m3 /= static_cast<double>(finite.size());
  s.mean = m;
  s.sd = std::sqrt(m2 * static_cast<double>(finite.size()) /
                   std::max<double>(1.0, static_cast<double>(finite.size() - 1)));
  s.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;

  std::sort(finite.begin(), finite.end());
  double d_stat = 0.0;
  const double n = static_cast<double>(finite.size());
  for (std::size_t i = 0; i < finite.size(); ++i) {
    const double cdf = normal_cdf(finite[i]);
    d_stat = std::max(d_stat, std::abs(cdf - static_cast<double>(i) / n));
    d_stat = std::max(d_stat, std::abs(static_cast<double>(i + 1) / n - cdf));
  }
  s.ks_distance = d_stat;
  return s;
}

}  // namespace carhhmm

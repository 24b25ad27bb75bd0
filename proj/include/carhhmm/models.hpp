#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "carhhmm/features.hpp"
#include "carhhmm/numkernels.hpp"

namespace carhhmm {

// ===========================================================================
// Model structure
// ===========================================================================

/// Coarse-scale structure: a Markov chain over dive types, or a single dive
/// type with independent draws.
enum class CoarseStructure { kHmm, kIid };

struct CoarseSpec {
  int n_states = 1;
  CoarseStructure structure = CoarseStructure::kHmm;
};

/// Fine-scale structure switches.
///
/// use_car: window averages are conditionally autoregressive on the previous
///   window; the first window's average then acts as a fixed initial value and
///   contributes no density factor (the wiggliness of every window, including
///   the first, is always modeled when present).
/// model_first_avg: opt-in alternative convention that also assigns the first
///   window's average its unconditional Normal density under use_car. Off by
///   default; it changes the log-likelihood by one emission term per dive.
struct FineSpec {
  int n_states = 1;
  bool use_car = true;
  bool has_wiggle = true;
  bool shared_across_coarse = true;
  bool model_first_avg = false;
};

struct ModelSpec {
  CoarseSpec coarse;
  FineSpec fine;
  int n_channels = 1;
};

/// The four candidate model variants.
enum class Variant { kCarHhmmDft, kHhmmDft, kCarHhmm, kCarHmmDft };

inline std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kCarHhmmDft: return "carhhmm-dft";
    case Variant::kHhmmDft: return "hhmm-dft";
    case Variant::kCarHhmm: return "carhhmm";
    case Variant::kCarHmmDft: return "carhmm-dft";
  }
  throw std::logic_error("variant_name: unknown variant");
}

inline Variant parse_variant(const std::string& name) {
  if (name == "carhhmm-dft") return Variant::kCarHhmmDft;
  if (name == "hhmm-dft") return Variant::kHhmmDft;
  if (name == "carhhmm") return Variant::kCarHhmm;
  if (name == "carhmm-dft") return Variant::kCarHmmDft;
  throw std::invalid_argument("unknown model variant: " + name);
}

/// Maps a variant name onto the exact structure switches it implies.
inline ModelSpec make_model_spec(Variant v, int n_coarse, int n_fine, int n_channels) {
  ModelSpec spec;
  spec.n_channels = n_channels;
  spec.fine.n_states = n_fine;
  spec.fine.shared_across_coarse = true;
  switch (v) {
    case Variant::kCarHhmmDft:
      spec.coarse = {n_coarse, CoarseStructure::kHmm};
      spec.fine.use_car = true;
      spec.fine.has_wiggle = true;
      break;
    case Variant::kHhmmDft:
      spec.coarse = {n_coarse, CoarseStructure::kHmm};
      spec.fine.use_car = false;
      spec.fine.has_wiggle = true;
      break;
    case Variant::kCarHhmm:
      spec.coarse = {n_coarse, CoarseStructure::kHmm};
      spec.fine.use_car = true;
      spec.fine.has_wiggle = false;
      break;
    case Variant::kCarHmmDft:
      // single dive type, dives independent
      spec.coarse = {1, CoarseStructure::kIid};
      spec.fine.use_car = true;
      spec.fine.has_wiggle = true;
      break;
  }
  return spec;
}

// ===========================================================================
// Parameters
// ===========================================================================

/// Emission parameters of one fine-scale state.
struct FineEmission {
  CarNormalParams avg;
  std::optional<GammaMeanSd> wiggle;
};

/// Complete parameter set of the hierarchical model.
struct HierModelParams {
  std::optional<TransitionMatrix> coarse_gamma;            // absent for iid coarse structure
  std::vector<GammaMeanSd> coarse_emissions;               // one per coarse state
  std::vector<TransitionMatrix> fine_gammas;               // one per coarse state
  std::vector<std::vector<FineEmission>> fine_emissions;   // [coarse (1 if shared)][fine]
};

struct HierModel {
  ModelSpec spec;
  HierModelParams params;

  /// Fine emission set used when the coarse state is `i`.
  const std::vector<FineEmission>& fine_emissions_for(int i) const {
    return spec.fine.shared_across_coarse ? params.fine_emissions.front()
                                          : params.fine_emissions[static_cast<std::size_t>(i)];
  }
};

inline void validate_model(const HierModel& model) {
  const auto& [spec, params] = model;
  const int n = spec.coarse.n_states;
  const int n_fine = spec.fine.n_states;
  if (n < 1 || n_fine < 1) throw std::invalid_argument("model: state counts must be >= 1");
  if (spec.coarse.structure == CoarseStructure::kIid && n != 1)
    throw std::invalid_argument("model: iid coarse structure implies a single state");
  if (spec.coarse.structure == CoarseStructure::kHmm) {
    if (!params.coarse_gamma) throw std::invalid_argument("model: coarse transition matrix missing");
    if (params.coarse_gamma->n_states() != n)
      throw std::invalid_argument("model: coarse transition matrix has wrong size");
  }
  if (static_cast<int>(params.coarse_emissions.size()) != n)
    throw std::invalid_argument("model: wrong number of coarse emissions");
  if (static_cast<int>(params.fine_gammas.size()) != n)
    throw std::invalid_argument("model: one fine transition matrix per coarse state required");
  const std::size_t n_emission_sets = spec.fine.shared_across_coarse ? 1u : static_cast<std::size_t>(n);
  if (params.fine_emissions.size() != n_emission_sets)
    throw std::invalid_argument("model: wrong number of fine emission sets");
  for (const auto& set : params.fine_emissions) {
    if (static_cast<int>(set.size()) != n_fine)
      throw std::invalid_argument("model: wrong number of fine emission states");
    for (const auto& e : set) {
      e.avg.validate();
      if (e.avg.dim() != spec.n_channels)
        throw std::invalid_argument("model: emission dimension differs from n_channels");
      if (e.wiggle.has_value() != spec.fine.has_wiggle)
        throw std::invalid_argument("model: wiggle emission presence disagrees with spec");
    }
  }
  for (const auto& g : params.fine_gammas)
    if (g.n_states() != n_fine)
      throw std::invalid_argument("model: fine transition matrix has wrong size");
}

// ===========================================================================
// Forward recursion (log space)
// ===========================================================================

namespace detail {

inline Eigen::MatrixXd log_matrix(const TransitionMatrix& gamma) {
  return gamma.probs.array().log().matrix();
}

inline Eigen::RowVectorXd log_row(const StationaryDist& delta) {
  return delta.probs.array().log().matrix();
}

/// Forward pass over a T x N log-emission matrix. Returns the full lattice of
/// log forward weights; the log-likelihood is log_sum_exp of the last row.
inline Eigen::MatrixXd forward_lattice(const Eigen::MatrixXd& log_emissions,
                                       const Eigen::MatrixXd& log_gamma,
                                       const Eigen::RowVectorXd& log_delta) {
  const int t_len = static_cast<int>(log_emissions.rows());
  const int n = static_cast<int>(log_emissions.cols());
  Eigen::MatrixXd lalpha(t_len, n);
  lalpha.row(0) = log_delta + log_emissions.row(0);
  std::vector<double> scratch(static_cast<std::size_t>(n));
  for (int t = 1; t < t_len; ++t) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) scratch[static_cast<std::size_t>(i)] = lalpha(t - 1, i) + log_gamma(i, j);
      lalpha(t, j) = log_sum_exp(scratch) + log_emissions(t, j);
    }
  }
  return lalpha;
}

inline double forward_loglik(const Eigen::MatrixXd& log_emissions, const Eigen::MatrixXd& log_gamma,
                             const Eigen::RowVectorXd& log_delta) {
  const Eigen::MatrixXd lalpha = forward_lattice(log_emissions, log_gamma, log_delta);
  return log_sum_exp(Eigen::VectorXd(lalpha.row(lalpha.rows() - 1).transpose()));
}

/// Backward pass companion to forward_lattice.
inline Eigen::MatrixXd backward_lattice(const Eigen::MatrixXd& log_emissions,
                                        const Eigen::MatrixXd& log_gamma) {
  const int t_len = static_cast<int>(log_emissions.rows());
  const int n = static_cast<int>(log_emissions.cols());
  Eigen::MatrixXd lbeta(t_len, n);
  lbeta.row(t_len - 1).setZero();
  std::vector<double> scratch(static_cast<std::size_t>(n));
  for (int t = t_len - 2; t >= 0; --t) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j)
        scratch[static_cast<std::size_t>(j)] = log_gamma(i, j) + log_emissions(t + 1, j) + lbeta(t + 1, j);
      lbeta(t, i) = log_sum_exp(scratch);
    }
  }
  return lbeta;
}

inline void check_finite_or_neg_inf(const Eigen::MatrixXd& log_emissions, const char* what) {
  for (int t = 0; t < log_emissions.rows(); ++t)
    for (int j = 0; j < log_emissions.cols(); ++j)
      if (std::isnan(log_emissions(t, j))) {
        std::ostringstream msg;
        msg << what << ": NaN log-emission at index " << t << ", state " << j;
        throw NumericalError(msg.str());
      }
}

}  // namespace detail

// ===========================================================================
// Likelihoods
// ===========================================================================

/// Plain HMM log-likelihood via the forward recursion; the initial state
/// distribution is the stationary distribution of gamma.
inline double hmm_loglik(std::span<const double> y, const TransitionMatrix& gamma,
                         const std::function<double(int state, double value)>& log_emission) {
  if (y.empty()) throw std::invalid_argument("hmm_loglik: empty observation sequence");
  const int n = gamma.n_states();
  Eigen::MatrixXd lem(static_cast<int>(y.size()), n);
  for (int t = 0; t < lem.rows(); ++t)
    for (int i = 0; i < n; ++i) lem(t, i) = log_emission(i, y[static_cast<std::size_t>(t)]);
  detail::check_finite_or_neg_inf(lem, "hmm_loglik");
  return detail::forward_loglik(lem, detail::log_matrix(gamma), detail::log_row(stationary(gamma)));
}

/// Conditionally autoregressive HMM log-likelihood. The first emission is a
/// fixed initial value: the density product starts at t = 2, and a length-1
/// sequence has log-likelihood 0.
inline double carhmm_loglik(
    std::span<const double> y, const TransitionMatrix& gamma,
    const std::function<double(int state, double value, double prev)>& log_emission) {
  if (y.empty()) throw std::invalid_argument("carhmm_loglik: empty observation sequence");
  if (y.size() == 1) return 0.0;
  const int n = gamma.n_states();
  Eigen::MatrixXd lem(static_cast<int>(y.size()), n);
  lem.row(0).setZero();  // y_1 conditions but carries no density factor
  for (int t = 1; t < lem.rows(); ++t)
    for (int i = 0; i < n; ++i)
      lem(t, i) = log_emission(i, y[static_cast<std::size_t>(t)], y[static_cast<std::size_t>(t - 1)]);
  detail::check_finite_or_neg_inf(lem, "carhmm_loglik");
  return detail::forward_loglik(lem, detail::log_matrix(gamma), detail::log_row(stationary(gamma)));
}

namespace detail {

/// T~ x N* matrix of per-window log emission terms under the fine model
/// conventions (see FineSpec).
inline Eigen::MatrixXd fine_log_emissions(const std::vector<WindowFeatures>& windows,
                                          std::span<const FineEmission> emissions,
                                          const FineSpec& spec) {
  const int n = static_cast<int>(emissions.size());
  Eigen::MatrixXd lem(static_cast<int>(windows.size()), n);
  for (int w = 0; w < lem.rows(); ++w) {
    const auto& win = windows[static_cast<std::size_t>(w)];
    for (int i = 0; i < n; ++i) {
      const FineEmission& e = emissions[static_cast<std::size_t>(i)];
      double ll = 0.0;
      if (spec.use_car) {
        if (w == 0) {
          if (spec.model_first_avg) ll += plain_normal_logpdf(win.avg, e.avg);
        } else {
          ll += car_normal_logpdf(win.avg, windows[static_cast<std::size_t>(w - 1)].avg, e.avg);
        }
      } else {
        ll += plain_normal_logpdf(win.avg, e.avg);
      }
      if (spec.has_wiggle) ll += gamma_logpdf(win.wiggliness, *e.wiggle);
      lem(w, i) = ll;
    }
  }
  return lem;
}

}  // namespace detail

/// Fine-scale log-likelihood of one dive's window sequence. A dive with no
/// windows contributes 0.
inline double fine_loglik(const std::vector<WindowFeatures>& windows,
                          const TransitionMatrix& fine_gamma,
                          std::span<const FineEmission> emissions, const FineSpec& spec) {
  if (windows.empty()) return 0.0;
  const Eigen::MatrixXd lem = detail::fine_log_emissions(windows, emissions, spec);
  detail::check_finite_or_neg_inf(lem, "fine_loglik");
  return detail::forward_loglik(lem, detail::log_matrix(fine_gamma),
                                detail::log_row(stationary(fine_gamma)));
}

namespace detail {

/// T x N matrix whose (t, i) entry bundles the coarse log-density of dive t
/// under state i with the fine log-likelihood of its windows under Gamma*(i).
inline Eigen::MatrixXd hier_log_emissions(std::span<const DiveRecord> dives,
                                          const HierModel& model) {
  const int n = model.spec.coarse.n_states;
  Eigen::MatrixXd lem(static_cast<int>(dives.size()), n);
  std::vector<Eigen::MatrixXd> log_fine_gammas;
  std::vector<Eigen::RowVectorXd> log_fine_deltas;
  log_fine_gammas.reserve(static_cast<std::size_t>(n));
  log_fine_deltas.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    log_fine_gammas.push_back(log_matrix(model.params.fine_gammas[static_cast<std::size_t>(i)]));
    log_fine_deltas.push_back(log_row(stationary(model.params.fine_gammas[static_cast<std::size_t>(i)])));
  }

  for (int t = 0; t < lem.rows(); ++t) {
    const DiveRecord& dive = dives[static_cast<std::size_t>(t)];
    for (const auto& win : dive.windows)
      if (win.avg.size() != model.spec.n_channels) {
        std::ostringstream msg;
        msg << "hier_loglik: dive " << dive.dive_id << " has window dimension " << win.avg.size()
            << ", expected " << model.spec.n_channels;
        throw std::invalid_argument(msg.str());
      }
    // shared emissions: the per-window emission matrix is identical across
    // coarse states, only the fine chain differs
    Eigen::MatrixXd shared_lem;
    if (model.spec.fine.shared_across_coarse && !dive.windows.empty())
      shared_lem = fine_log_emissions(dive.windows, model.fine_emissions_for(0), model.spec.fine);
    for (int i = 0; i < n; ++i) {
      double fine_ll = 0.0;
      if (!dive.windows.empty()) {
        const Eigen::MatrixXd& fl =
            model.spec.fine.shared_across_coarse
                ? shared_lem
                : fine_log_emissions(dive.windows, model.fine_emissions_for(i), model.spec.fine);
        fine_ll = forward_loglik(fl, log_fine_gammas[static_cast<std::size_t>(i)],
                                 log_fine_deltas[static_cast<std::size_t>(i)]);
      }
      lem(t, i) =
          gamma_logpdf(dive.duration_s, model.params.coarse_emissions[static_cast<std::size_t>(i)]) +
          fine_ll;
    }
    for (int i = 0; i < n; ++i)
      if (std::isnan(lem(t, i))) {
        std::ostringstream msg;
        msg << "hier_loglik: NaN emission for dive " << dive.dive_id << ", coarse state " << i;
        throw NumericalError(msg.str());
      }
  }
  return lem;
}

}  // namespace detail

/// Log-likelihood of the full hierarchical model over a dive sequence.
inline double hier_loglik(std::span<const DiveRecord> dives, const HierModel& model) {
  if (dives.empty()) throw std::invalid_argument("hier_loglik: no dives");
  validate_model(model);
  const Eigen::MatrixXd lem = detail::hier_log_emissions(dives, model);
  if (model.spec.coarse.structure == CoarseStructure::kIid) return lem.col(0).sum();
  return detail::forward_loglik(lem, detail::log_matrix(*model.params.coarse_gamma),
                                detail::log_row(stationary(*model.params.coarse_gamma)));
}

}  // namespace carhhmm

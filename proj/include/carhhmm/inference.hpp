#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "carhhmm/models.hpp"
#include "carhhmm/optim.hpp"
#include "carhhmm/parallel.hpp"
#include "carhhmm/rng.hpp"

namespace carhhmm {

// ===========================================================================
// Unconstrained parameterization
// ===========================================================================
//
// The flat optimization vector stacks, in order:
//   coarse eta off-diagonals (row-major) | log coarse durations (mu then sd,
//   per state) | fine eta off-diagonals per coarse state | per emission set,
//   per fine state: avg mu (identity), log avg sd, logit phi (if
//   autoregressive), log wiggle mu, log wiggle sd (if present).
// The map is a bijection between the interior of the constraint set and the
// full real vector.

namespace detail {

inline double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("pack: phi on the boundary of (0, 1)");
  return std::log(p / (1.0 - p));
}

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline double log_positive(double v, const char* what) {
  if (!(v > 0.0)) throw std::domain_error(std::string("pack: nonpositive ") + what);
  return std::log(v);
}

}  // namespace detail

/// Dimension bookkeeping for the packed vector of a given model structure.
struct ParamLayout {
  ModelSpec spec;

  int n_coarse_eta() const {
    return spec.coarse.structure == CoarseStructure::kHmm
               ? spec.coarse.n_states * (spec.coarse.n_states - 1)
               : 0;
  }
  int n_fine_eta() const {
    return spec.coarse.n_states * spec.fine.n_states * (spec.fine.n_states - 1);
  }
  int n_emission_sets() const { return spec.fine.shared_across_coarse ? 1 : spec.coarse.n_states; }
  int per_fine_state() const {
    return 2 * spec.n_channels + (spec.fine.use_car ? 1 : 0) + (spec.fine.has_wiggle ? 2 : 0);
  }
  int dim() const {
    return n_coarse_eta() + 2 * spec.coarse.n_states + n_fine_eta() +
           n_emission_sets() * spec.fine.n_states * per_fine_state();
  }
};

namespace detail {

inline void pack_eta(const TransitionMatrix& gamma, Eigen::VectorXd& v, int& pos) {
  const UnconstrainedTransition eta = gamma_to_eta(gamma);
  const int n = gamma.n_states();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) v(pos++) = eta.etas(i, j);
}

inline TransitionMatrix unpack_eta(const Eigen::VectorXd& v, int& pos, int n) {
  Eigen::MatrixXd etas = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) etas(i, j) = v(pos++);
  return eta_to_gamma(UnconstrainedTransition{std::move(etas)});
}

}  // namespace detail

/// Maps natural-scale parameters into the unconstrained vector.
inline Eigen::VectorXd pack(const HierModelParams& params, const ModelSpec& spec) {
  const ParamLayout layout{spec};
  Eigen::VectorXd v(layout.dim());
  int pos = 0;
  if (spec.coarse.structure == CoarseStructure::kHmm) detail::pack_eta(*params.coarse_gamma, v, pos);
  for (const auto& g : params.coarse_emissions) {
    v(pos++) = detail::log_positive(g.mean, "duration mean");
    v(pos++) = detail::log_positive(g.sd, "duration sd");
  }
  for (const auto& g : params.fine_gammas) detail::pack_eta(g, v, pos);
  for (const auto& set : params.fine_emissions) {
    for (const auto& e : set) {
      for (int c = 0; c < spec.n_channels; ++c) v(pos++) = e.avg.mean(c);
      for (int c = 0; c < spec.n_channels; ++c)
        v(pos++) = detail::log_positive(e.avg.sd(c), "avg sd");
      if (spec.fine.use_car) v(pos++) = detail::logit(e.avg.phi);
      if (spec.fine.has_wiggle) {
        v(pos++) = detail::log_positive(e.wiggle->mean, "wiggle mean");
        v(pos++) = detail::log_positive(e.wiggle->sd, "wiggle sd");
      }
    }
  }
  return v;
}

/// Inverse of pack; every finite vector maps to a valid parameter set.
inline HierModelParams unpack(const Eigen::VectorXd& v, const ModelSpec& spec) {
  const ParamLayout layout{spec};
  if (v.size() != layout.dim()) throw std::invalid_argument("unpack: wrong vector length");
  HierModelParams params;
  int pos = 0;
  if (spec.coarse.structure == CoarseStructure::kHmm)
    params.coarse_gamma = detail::unpack_eta(v, pos, spec.coarse.n_states);
  for (int i = 0; i < spec.coarse.n_states; ++i) {
    const double mean = std::exp(v(pos++));
    const double sd = std::exp(v(pos++));
    params.coarse_emissions.emplace_back(mean, sd);
  }
  for (int i = 0; i < spec.coarse.n_states; ++i)
    params.fine_gammas.push_back(detail::unpack_eta(v, pos, spec.fine.n_states));
  for (int s = 0; s < layout.n_emission_sets(); ++s) {
    std::vector<FineEmission> set;
    for (int k = 0; k < spec.fine.n_states; ++k) {
      FineEmission e;
      Eigen::VectorXd mean(spec.n_channels), sd(spec.n_channels);
      for (int c = 0; c < spec.n_channels; ++c) mean(c) = v(pos++);
      for (int c = 0; c < spec.n_channels; ++c) sd(c) = std::exp(v(pos++));
      const double phi = spec.fine.use_car ? detail::sigmoid(v(pos++)) : 0.0;
      e.avg = CarNormalParams(std::move(mean), std::move(sd), phi);
      if (spec.fine.has_wiggle) {
        const double wm = std::exp(v(pos++));
        const double ws = std::exp(v(pos++));
        e.wiggle = GammaMeanSd(wm, ws);
      }
      set.push_back(std::move(e));
    }
    params.fine_emissions.push_back(std::move(set));
  }
  return params;
}

// ===========================================================================
// Natural-scale parameter listing (for reporting and standard errors)
// ===========================================================================

struct NaturalParams {
  std::vector<std::string> names;
  Eigen::VectorXd values;
};

/// Canonical flat listing of all natural-scale parameters, including full
/// transition matrices.
inline NaturalParams natural_params(const HierModelParams& params, const ModelSpec& spec) {
  NaturalParams out;
  std::vector<double> vals;
  auto push = [&](std::string name, double v) {
    out.names.push_back(std::move(name));
    vals.push_back(v);
  };
  if (spec.coarse.structure == CoarseStructure::kHmm) {
    const auto& g = params.coarse_gamma->probs;
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j)
        push("gamma." + std::to_string(i + 1) + "." + std::to_string(j + 1), g(i, j));
  }
  for (std::size_t i = 0; i < params.coarse_emissions.size(); ++i) {
    push("duration.mu." + std::to_string(i + 1), params.coarse_emissions[i].mean);
    push("duration.sigma." + std::to_string(i + 1), params.coarse_emissions[i].sd);
  }
  for (std::size_t c = 0; c < params.fine_gammas.size(); ++c) {
    const auto& g = params.fine_gammas[c].probs;
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j)
        push("fine_gamma" + std::to_string(c + 1) + "." + std::to_string(i + 1) + "." +
                 std::to_string(j + 1),
             g(i, j));
  }
  for (std::size_t s = 0; s < params.fine_emissions.size(); ++s) {
    const std::string set_tag =
        spec.fine.shared_across_coarse ? "" : ".set" + std::to_string(s + 1);
    for (std::size_t k = 0; k < params.fine_emissions[s].size(); ++k) {
      const auto& e = params.fine_emissions[s][k];
      const std::string state = std::to_string(k + 1);
      for (int c = 0; c < spec.n_channels; ++c)
        push("avg.mu." + state + "." + std::to_string(c + 1) + set_tag, e.avg.mean(c));
      for (int c = 0; c < spec.n_channels; ++c)
        push("avg.sigma." + state + "." + std::to_string(c + 1) + set_tag, e.avg.sd(c));
      if (spec.fine.use_car) push("avg.phi." + state + set_tag, e.avg.phi);
      if (spec.fine.has_wiggle) {
        push("wiggle.mu." + state + set_tag, e.wiggle->mean);
        push("wiggle.sigma." + state + set_tag, e.wiggle->sd);
      }
    }
  }
  out.values = Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  return out;
}

/// Analytic Jacobian of the natural-parameter listing with respect to the
/// packed vector, used for delta-method standard errors. Row order matches
/// natural_params; column order matches pack.
inline Eigen::MatrixXd natural_jacobian(const Eigen::VectorXd& v, const ModelSpec& spec) {
  const ParamLayout layout{spec};
  const HierModelParams params = unpack(v, spec);
  const NaturalParams nat = natural_params(params, spec);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(nat.values.size(), v.size());
  int row = 0;
  int col = 0;

  // softmax rows: dGamma_ij / deta_ik = Gamma_ij (1{j==k} - Gamma_ik), k != i.
  // The eta block of row i occupies n-1 consecutive columns (j != i in order).
  auto transition_block = [&](const TransitionMatrix& gamma) {
    const int n = gamma.n_states();
    // row of natural entries (i, j) vs columns of etas (i, k)
    for (int i = 0; i < n; ++i) {
      std::vector<int> eta_col;
      for (int k = 0; k < n; ++k)
        if (k != i) eta_col.push_back(col + static_cast<int>(eta_col.size()));
      for (int j = 0; j < n; ++j) {
        int cidx = 0;
        for (int k = 0; k < n; ++k) {
          if (k == i) continue;
          jac(row + i * n + j, eta_col[static_cast<std::size_t>(cidx)]) =
              gamma.probs(i, j) * ((j == k ? 1.0 : 0.0) - gamma.probs(i, k));
          ++cidx;
        }
      }
      col += n - 1;
    }
    row += n * n;
  };

  if (spec.coarse.structure == CoarseStructure::kHmm) transition_block(*params.coarse_gamma);
  for (const auto& g : params.coarse_emissions) {
    jac(row++, col++) = g.mean;  // exp link
    jac(row++, col++) = g.sd;
  }
  for (const auto& g : params.fine_gammas) transition_block(g);
  for (const auto& set : params.fine_emissions) {
    for (const auto& e : set) {
      for (int c = 0; c < spec.n_channels; ++c) jac(row++, col++) = 1.0;  // identity link
      for (int c = 0; c < spec.n_channels; ++c) jac(row++, col++) = e.avg.sd(c);
      if (spec.fine.use_car) jac(row++, col++) = e.avg.phi * (1.0 - e.avg.phi);
      if (spec.fine.has_wiggle) {
        jac(row++, col++) = e.wiggle->mean;
        jac(row++, col++) = e.wiggle->sd;
      }
    }
  }
  (void)layout;
  return jac;
}

// ===========================================================================
// Initialization
// ===========================================================================

namespace detail {

struct MomentPair {
  double mean;
  double sd;
};

/// Mean/sd of quantile groups of a sorted copy of x; groups are never empty
/// and degenerate spreads are floored.
inline std::vector<MomentPair> quantile_moments(std::vector<double> x, int n_groups) {
  std::sort(x.begin(), x.end());
  std::vector<MomentPair> out;
  const std::size_t n = x.size();
  for (int g = 0; g < n_groups; ++g) {
    const std::size_t lo = n * static_cast<std::size_t>(g) / static_cast<std::size_t>(n_groups);
    std::size_t hi =
        n * static_cast<std::size_t>(g + 1) / static_cast<std::size_t>(n_groups);
    hi = std::max(hi, lo + 1);
    hi = std::min(hi, n);
    double mean = 0.0;
    for (std::size_t i = lo; i < hi; ++i) mean += x[i];
    mean /= static_cast<double>(hi - lo);
    double var = 0.0;
    for (std::size_t i = lo; i < hi; ++i) var += (x[i] - mean) * (x[i] - mean);
    var /= static_cast<double>(std::max<std::size_t>(hi - lo, 2) - 1);
    double sd = std::sqrt(var);
    if (!(sd > 1e-8 * std::max(1.0, std::abs(mean)))) sd = 0.25 * std::max(std::abs(mean), 1e-3);
    out.push_back({mean, sd});
  }
  return out;
}

inline TransitionMatrix sticky_uniform(int n, double diag = 0.8) {
  if (n == 1) return TransitionMatrix(Eigen::MatrixXd::Ones(1, 1));
  Eigen::MatrixXd p = Eigen::MatrixXd::Constant(n, n, (1.0 - diag) / (n - 1));
  for (int i = 0; i < n; ++i) p(i, i) = diag;
  return TransitionMatrix(std::move(p));
}

}  // namespace detail

/// Moment-based starting point: dive durations and windows are split into
/// quantile groups to seed the emissions; transitions start sticky-uniform.
inline HierModelParams moment_init(std::span<const DiveRecord> dives, const ModelSpec& spec) {
  HierModelParams params;
  const int n = spec.coarse.n_states;
  const int n_fine = spec.fine.n_states;
  if (spec.coarse.structure == CoarseStructure::kHmm)
    params.coarse_gamma = detail::sticky_uniform(n);

  std::vector<double> durations;
  for (const auto& d : dives) durations.push_back(std::max(d.duration_s, 1e-6));
  for (const auto& m : detail::quantile_moments(durations, n))
    params.coarse_emissions.emplace_back(std::max(m.mean, 1e-6), m.sd);

  for (int i = 0; i < n; ++i) params.fine_gammas.push_back(detail::sticky_uniform(n_fine));

  // group windows by wiggliness when modeled, otherwise by the magnitude of
  // successive average changes (a proxy for the emission spread)
  std::vector<double> split_stat;
  std::vector<const WindowFeatures*> windows;
  for (const auto& d : dives) {
    for (std::size_t w = 0; w < d.windows.size(); ++w) {
      windows.push_back(&d.windows[w]);
      if (spec.fine.has_wiggle)
        split_stat.push_back(d.windows[w].wiggliness);
      else
        split_stat.push_back(w == 0 ? 0.0 : (d.windows[w].avg - d.windows[w - 1].avg).norm());
    }
  }

  std::vector<FineEmission> set;
  if (windows.empty()) {
    for (int k = 0; k < n_fine; ++k) {
      FineEmission e;
      e.avg = CarNormalParams(Eigen::VectorXd::Zero(spec.n_channels),
                              Eigen::VectorXd::Ones(spec.n_channels), spec.fine.use_car ? 0.5 : 0.0);
      if (spec.fine.has_wiggle) e.wiggle = GammaMeanSd(1.0 + k, 1.0);
      set.push_back(std::move(e));
    }
  } else {
    std::vector<std::size_t> order(windows.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return split_stat[a] < split_stat[b]; });
    for (int k = 0; k < n_fine; ++k) {
      const std::size_t lo = windows.size() * static_cast<std::size_t>(k) / n_fine;
      std::size_t hi = windows.size() * static_cast<std::size_t>(k + 1) / n_fine;
      hi = std::min(std::max(hi, lo + 1), windows.size());
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(spec.n_channels);
      for (std::size_t i = lo; i < hi; ++i) mean += windows[order[i]]->avg;
      mean /= static_cast<double>(hi - lo);
      Eigen::VectorXd var = Eigen::VectorXd::Zero(spec.n_channels);
      std::vector<double> wiggles;
      for (std::size_t i = lo; i < hi; ++i) {
        var += (windows[order[i]]->avg - mean).cwiseAbs2();
        wiggles.push_back(std::max(windows[order[i]]->wiggliness, 1e-8));
      }
      var /= static_cast<double>(std::max<std::size_t>(hi - lo, 2) - 1);
      Eigen::VectorXd sd = var.cwiseSqrt();
      for (int c = 0; c < spec.n_channels; ++c)
        if (!(sd(c) > 1e-8)) sd(c) = 0.1 + 0.05 * k;
      FineEmission e;
      e.avg = CarNormalParams(std::move(mean), std::move(sd), spec.fine.use_car ? 0.5 : 0.0);
      if (spec.fine.has_wiggle) {
        const auto m = detail::quantile_moments(wiggles, 1).front();
        e.wiggle = GammaMeanSd(std::max(m.mean, 1e-6), m.sd);
      }
      set.push_back(std::move(e));
    }
  }
  const ParamLayout layout{spec};
  for (int s = 0; s < layout.n_emission_sets(); ++s) params.fine_emissions.push_back(set);
  return params;
}

// ===========================================================================
// Canonical state ordering
// ===========================================================================

namespace detail {

inline Eigen::MatrixXd permute_square(const Eigen::MatrixXd& m, const std::vector<int>& perm) {
  const int n = static_cast<int>(perm.size());
  Eigen::MatrixXd out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out(i, j) = m(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  return out;
}

template <typename T>
std::vector<T> permute_vector(const std::vector<T>& v, const std::vector<int>& perm) {
  std::vector<T> out;
  out.reserve(v.size());
  for (int p : perm) out.push_back(v[static_cast<std::size_t>(p)]);
  return out;
}

}  // namespace detail

/// Fixes label switching: coarse states sorted by ascending mean duration,
/// fine states by ascending wiggliness mean (falling back to the average-sd
/// norm when wiggliness is not modeled).
inline void canonicalize_states(HierModel& model) {
  const int n = model.spec.coarse.n_states;
  std::vector<int> coarse_perm(static_cast<std::size_t>(n));
  std::iota(coarse_perm.begin(), coarse_perm.end(), 0);
  std::stable_sort(coarse_perm.begin(), coarse_perm.end(), [&](int a, int b) {
    return model.params.coarse_emissions[static_cast<std::size_t>(a)].mean <
           model.params.coarse_emissions[static_cast<std::size_t>(b)].mean;
  });
  if (model.params.coarse_gamma)
    model.params.coarse_gamma =
        TransitionMatrix(detail::permute_square(model.params.coarse_gamma->probs, coarse_perm));
  model.params.coarse_emissions = detail::permute_vector(model.params.coarse_emissions, coarse_perm);
  model.params.fine_gammas = detail::permute_vector(model.params.fine_gammas, coarse_perm);
  if (!model.spec.fine.shared_across_coarse)
    model.params.fine_emissions = detail::permute_vector(model.params.fine_emissions, coarse_perm);

  const int n_fine = model.spec.fine.n_states;
  for (std::size_t s = 0; s < model.params.fine_emissions.size(); ++s) {
    auto& set = model.params.fine_emissions[s];
    std::vector<int> fine_perm(static_cast<std::size_t>(n_fine));
    std::iota(fine_perm.begin(), fine_perm.end(), 0);
    std::stable_sort(fine_perm.begin(), fine_perm.end(), [&](int a, int b) {
      const auto& ea = set[static_cast<std::size_t>(a)];
      const auto& eb = set[static_cast<std::size_t>(b)];
      if (model.spec.fine.has_wiggle) return ea.wiggle->mean < eb.wiggle->mean;
      return ea.avg.sd.norm() < eb.avg.sd.norm();
    });
    set = detail::permute_vector(set, fine_perm);
    if (model.spec.fine.shared_across_coarse) {
      for (auto& fg : model.params.fine_gammas)
        fg = TransitionMatrix(detail::permute_square(fg.probs, fine_perm));
    } else {
      model.params.fine_gammas[s] =
          TransitionMatrix(detail::permute_square(model.params.fine_gammas[s].probs, fine_perm));
    }
  }
}

// ===========================================================================
// Maximum likelihood fitting
// ===========================================================================

struct FitOptions {
  int restarts = 10;
  std::uint64_t seed = 1;
  int threads = 1;
  double grad_tol_rel = 1e-5;
  double step_tol_rel = 1e-9;
  int max_iters = 500;
  double fd_step_rel = 1e-6;
  double hessian_step_rel = 1e-4;
  double restart_jitter = 1.0;
  bool canonicalize = true;
};

struct RestartRecord {
  int restart = 0;
  double nll = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  long n_evals = 0;
};

struct FitResult {
  HierModel model;
  double nll = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  long n_evals = 0;
  int best_of_restarts = -1;
  double grad_inf_norm = std::numeric_limits<double>::quiet_NaN();
  std::vector<RestartRecord> restart_log;
  std::optional<Eigen::MatrixXd> hessian;  // of the nll, unconstrained scale
};

/// Maximum likelihood fit by quasi-Newton minimization of the negative
/// log-likelihood over the packed vector, with jittered restarts. The best
/// converged restart wins (ties broken by restart index); if none converge
/// the best attempt is returned with converged = false.
inline FitResult fit(std::span<const DiveRecord> dives, const ModelSpec& spec,
                     const std::optional<HierModelParams>& init = std::nullopt,
                     const FitOptions& options = {}) {
  if (dives.empty()) throw std::invalid_argument("fit: no dives");
  const ParamLayout layout{spec};

  // extreme coordinates (exp underflow to zero scales, degenerate chains)
  // are invalid rather than fatal: the line search treats them as +inf
  auto nll = [&](const Eigen::VectorXd& v) -> double {
    try {
      HierModel model{spec, unpack(v, spec)};
      return -hier_loglik(dives, model);
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    } catch (const std::invalid_argument&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  const HierModelParams start_params = init ? *init : moment_init(dives, spec);
  const Eigen::VectorXd v0 = pack(start_params, spec);
  if (!std::isfinite(nll(v0)))
    throw std::invalid_argument("fit: likelihood is not finite at the initial parameters");

  OptimOptions opt;
  opt.grad_tol_rel = options.grad_tol_rel;
  opt.step_tol_rel = options.step_tol_rel;
  opt.max_iters = options.max_iters;
  opt.fd_step_rel = options.fd_step_rel;

  const int n_restarts = std::max(1, options.restarts);
  std::vector<OptimResult> results(static_cast<std::size_t>(n_restarts));
  parallel_for(n_restarts, resolve_threads(options.threads), [&](int r) {
    Eigen::VectorXd vr = v0;
    if (r > 0) {
      SplitRng rng = purpose_rng(options.seed, RngPurpose::kRestartJitter, static_cast<std::uint64_t>(r));
      for (int i = 0; i < vr.size(); ++i)
        vr(i) += rng.uniform(-options.restart_jitter, options.restart_jitter);
    }
    results[static_cast<std::size_t>(r)] = bfgs_minimize(nll, vr, opt);
  });

  FitResult out;
  long total_evals = 0;
  int best = -1;
  for (int r = 0; r < n_restarts; ++r) {
    const OptimResult& res = results[static_cast<std::size_t>(r)];
    out.restart_log.push_back({r, res.f, res.converged, res.n_evals});
    total_evals += res.n_evals;
    if (best < 0) {
      best = r;
    } else {
      const OptimResult& cur = results[static_cast<std::size_t>(best)];
      // converged results dominate; otherwise lower nll wins, ties to lower index
      const bool better = (res.converged && !cur.converged) ||
                          (res.converged == cur.converged && res.f < cur.f);
      if (better) best = r;
    }
  }
  const OptimResult& winner = results[static_cast<std::size_t>(best)];
  out.model = HierModel{spec, unpack(winner.x, spec)};
  out.nll = winner.f;
  out.converged = winner.converged;
  out.n_evals = total_evals;
  out.best_of_restarts = best;
  out.grad_inf_norm = winner.grad_inf_norm;
  if (options.canonicalize) canonicalize_states(out.model);
  return out;
}

// ===========================================================================
// Standard errors from the observed Fisher information
// ===========================================================================

struct StdErrors {
  std::vector<std::string> names;
  Eigen::VectorXd estimates;  // natural scale
  Eigen::VectorXd se;         // natural scale; NaN where the information matrix is singular
  bool hessian_positive_definite = false;
  bool any_undefined = false;
};

/// Delta-method standard errors: numerical Hessian of the nll at the MLE in
/// unconstrained coordinates, inverted and pushed through the link Jacobian.
/// The Hessian is stored back into the fit result.
inline StdErrors observed_fisher_se(FitResult& fit_result, std::span<const DiveRecord> dives,
                                    const FitOptions& options = {}) {
  if (!fit_result.converged)
    throw std::invalid_argument("observed_fisher_se: fit did not converge");
  const ModelSpec& spec = fit_result.model.spec;
  auto nll = [&](const Eigen::VectorXd& v) -> double {
    try {
      HierModel model{spec, unpack(v, spec)};
      return -hier_loglik(dives, model);
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    } catch (const std::invalid_argument&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  const Eigen::VectorXd v = pack(fit_result.model.params, spec);
  const Eigen::MatrixXd hess = central_hessian(nll, v, options.hessian_step_rel);
  fit_result.hessian = hess;

  const NaturalParams nat = natural_params(fit_result.model.params, spec);
  StdErrors out;
  out.names = nat.names;
  out.estimates = nat.values;
  out.se = Eigen::VectorXd::Constant(nat.values.size(), std::numeric_limits<double>::quiet_NaN());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hess);
  const double max_eig = eig.eigenvalues().cwiseAbs().maxCoeff();
  out.hessian_positive_definite =
      eig.eigenvalues().minCoeff() > 1e-10 * std::max(max_eig, 1.0);
  if (!out.hessian_positive_definite) {
    out.any_undefined = true;
    return out;
  }
  const Eigen::MatrixXd cov_unc = eig.eigenvectors() *
                                  eig.eigenvalues().cwiseInverse().asDiagonal() *
                                  eig.eigenvectors().transpose();
  const Eigen::MatrixXd jac = natural_jacobian(v, spec);
  const Eigen::MatrixXd cov_nat = jac * cov_unc * jac.transpose();
  for (int i = 0; i < out.se.size(); ++i) {
    const double var = cov_nat(i, i);
    if (var >= 0.0 && std::isfinite(var))
      out.se(i) = std::sqrt(var);
    else
      out.any_undefined = true;
  }
  return out;
}

}  // namespace carhhmm

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "carhhmm/models.hpp"
#include "carhhmm/rng.hpp"

namespace carhhmm {

// ===========================================================================
// Generative model
// ===========================================================================

/// How to draw per-window wiggliness. The lognormal option keeps the first
/// two moments but has a heavier right tail; it exists to probe model
/// misspecification diagnostics.
enum class WiggleFamily { kGamma, kLognormal };

struct SimConfig {
  int n_dives = 100;
  HierModel model;
  std::uint64_t seed = 1;
  double window_seconds = 2.0;
  int samples_per_window = 100;
  WiggleFamily wiggle_family = WiggleFamily::kGamma;

  void validate() const {
    if (n_dives < 1) throw std::invalid_argument("SimConfig: n_dives must be >= 1");
    if (!(window_seconds > 0.0)) throw std::invalid_argument("SimConfig: window_seconds must be > 0");
    validate_model(model);
    // every chain must admit a unique stationary distribution
    if (model.spec.coarse.structure == CoarseStructure::kHmm) stationary(*model.params.coarse_gamma);
    for (const auto& g : model.params.fine_gammas) stationary(g);
  }
};

struct SimDataset {
  std::vector<int> coarse_states;             // per dive
  std::vector<DiveRecord> dives;              // durations + window features
  std::vector<std::vector<int>> fine_states;  // per dive, per window
};

/// Stock two-type generating model used by the simulation study and as the
/// default for the simulate command (scalar average channel).
inline HierModel default_generating_model() {
  HierModel model;
  model.spec = make_model_spec(Variant::kCarHhmmDft, 2, 2, 1);
  Eigen::MatrixXd gamma(2, 2);
  gamma << 0.79, 0.21, 0.81, 0.19;
  model.params.coarse_gamma = TransitionMatrix(gamma);
  model.params.coarse_emissions = {GammaMeanSd(25.7, 9.6), GammaMeanSd(104.6, 64.7)};
  Eigen::MatrixXd f1(2, 2), f2(2, 2);
  f1 << 0.68, 0.32, 0.05, 0.95;
  f2 << 0.86, 0.14, 0.15, 0.85;
  model.params.fine_gammas = {TransitionMatrix(f1), TransitionMatrix(f2)};
  std::vector<FineEmission> emissions(2);
  emissions[0].avg = CarNormalParams(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 0.034), 0.98);
  emissions[0].wiggle = GammaMeanSd(23.3, 13.0);
  emissions[1].avg = CarNormalParams(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 0.079), 0.87);
  emissions[1].wiggle = GammaMeanSd(301.2, 330.1);
  model.params.fine_emissions = {std::move(emissions)};
  return model;
}

namespace detail {

inline int draw_from_row(SplitRng& rng, const Eigen::RowVectorXd& probs) {
  return rng.categorical(std::span<const double>(probs.data(), static_cast<std::size_t>(probs.size())));
}

inline int draw_from_row(SplitRng& rng, const Eigen::MatrixXd& gamma, int state) {
  Eigen::RowVectorXd row = gamma.row(state);
  return draw_from_row(rng, row);
}

}  // namespace detail

/// Coarse chain and dive durations. The chain starts from the stationary
/// distribution; durations are Gamma draws keyed per dive.
inline void simulate_coarse(const SimConfig& config, std::vector<int>& states,
                            std::vector<double>& durations) {
  const HierModel& model = config.model;
  states.resize(static_cast<std::size_t>(config.n_dives));
  durations.resize(static_cast<std::size_t>(config.n_dives));
  SplitRng chain = purpose_rng(config.seed, RngPurpose::kCoarseChain);
  const bool iid = model.spec.coarse.structure == CoarseStructure::kIid;
  const StationaryDist delta =
      iid ? StationaryDist{Eigen::RowVectorXd::Ones(1)} : stationary(*model.params.coarse_gamma);
  for (int t = 0; t < config.n_dives; ++t) {
    if (iid)
      states[static_cast<std::size_t>(t)] = 0;
    else if (t == 0)
      states[0] = detail::draw_from_row(chain, delta.probs);
    else
      states[static_cast<std::size_t>(t)] = detail::draw_from_row(
          chain, model.params.coarse_gamma->probs, states[static_cast<std::size_t>(t - 1)]);
    SplitRng dur = purpose_rng(config.seed, RngPurpose::kDuration, static_cast<std::uint64_t>(t));
    const GammaMeanSd& g =
        model.params.coarse_emissions[static_cast<std::size_t>(states[static_cast<std::size_t>(t)])];
    durations[static_cast<std::size_t>(t)] = dur.gamma(g.shape(), g.scale());
  }
}

/// Fine chains and window features for given coarse states and durations.
/// Dive t gets floor(duration / window_seconds) windows; a dive shorter than
/// one window is emitted with an empty feature list. Draws are keyed per dive
/// so generation order (or parallelism) cannot change the output.
inline void simulate_fine(const SimConfig& config, std::span<const int> coarse_states,
                          std::span<const double> durations, std::vector<DiveRecord>& dives,
                          std::vector<std::vector<int>>& fine_states) {
  const HierModel& model = config.model;
  const int n_dives = static_cast<int>(coarse_states.size());
  dives.resize(static_cast<std::size_t>(n_dives));
  fine_states.resize(static_cast<std::size_t>(n_dives));
  for (int t = 0; t < n_dives; ++t) {
    const int coarse = coarse_states[static_cast<std::size_t>(t)];
    const auto& fine_gamma = model.params.fine_gammas[static_cast<std::size_t>(coarse)];
    const auto& emissions = model.fine_emissions_for(coarse);
    DiveRecord& dive = dives[static_cast<std::size_t>(t)];
    dive.dive_id = t;
    dive.duration_s = durations[static_cast<std::size_t>(t)];
    dive.windows.clear();
    auto& states = fine_states[static_cast<std::size_t>(t)];
    states.clear();
    const int n_windows = static_cast<int>(std::floor(dive.duration_s / config.window_seconds));
    if (n_windows <= 0) continue;

    SplitRng chain = purpose_rng(config.seed, RngPurpose::kFineChain, static_cast<std::uint64_t>(t));
    SplitRng avg_rng = purpose_rng(config.seed, RngPurpose::kAvgEmission, static_cast<std::uint64_t>(t));
    SplitRng wig_rng =
        purpose_rng(config.seed, RngPurpose::kWiggleEmission, static_cast<std::uint64_t>(t));
    const StationaryDist delta = stationary(fine_gamma);
    const int d = model.spec.n_channels;
    Eigen::VectorXd prev_avg;
    for (int w = 0; w < n_windows; ++w) {
      const int s = w == 0 ? detail::draw_from_row(chain, delta.probs)
                           : detail::draw_from_row(chain, fine_gamma.probs, states.back());
      states.push_back(s);
      const FineEmission& e = emissions[static_cast<std::size_t>(s)];
      WindowFeatures feat;
      feat.avg = Eigen::VectorXd::Zero(d);
      for (int c = 0; c < d; ++c) {
        const double mean = w == 0 ? e.avg.mean(c)
                                   : e.avg.phi * prev_avg(c) + (1.0 - e.avg.phi) * e.avg.mean(c);
        feat.avg(c) = avg_rng.normal(mean, e.avg.sd(c));
      }
      if (model.spec.fine.has_wiggle) {
        feat.wiggliness = config.wiggle_family == WiggleFamily::kGamma
                              ? wig_rng.gamma(e.wiggle->shape(), e.wiggle->scale())
                              : wig_rng.lognormal_mean_sd(e.wiggle->mean, e.wiggle->sd);
      } else {
        feat.wiggliness = 0.0;
      }
      prev_avg = feat.avg;
      dive.windows.push_back(std::move(feat));
    }
  }
}

inline SimDataset simulate_dataset(const SimConfig& config) {
  config.validate();
  SimDataset data;
  std::vector<double> durations;
  simulate_coarse(config, data.coarse_states, durations);
  simulate_fine(config, data.coarse_states, durations, data.dives, data.fine_states);
  return data;
}

// ===========================================================================
// Raw-curve reconstruction
// ===========================================================================

/// Spectral recipe of one fine state: the DC coefficient follows an
/// autoregression with scale h * sigma_dc, and the energy at frequency k is
/// Gamma(shape_base / k^3, scale).
struct ReconStateParams {
  double sigma_dc = 0.034;
  double phi_dc = 0.98;
  double shape_base = 16.38;
  double scale = 36.23;
};

struct ReconstructionParams {
  std::vector<ReconStateParams> states;
  int samples_per_window = 100;
};

/// Stock spectral parameters paired with default_generating_model. Note that
/// the implied wiggliness moments of these energies are intentionally NOT
/// matched to the direct feature simulation (see the repository README);
/// reconstruction is visualization-grade.
inline ReconstructionParams default_reconstruction_params() {
  ReconstructionParams p;
  p.states = {{0.034, 0.98, 16.38, 36.23}, {0.079, 0.87, 4.20, 1825.53}};
  p.samples_per_window = 100;
  return p;
}

/// Fourier description of one reconstructed window: the DC coefficient plus
/// sign/energy pairs for frequencies 1..h/2-1. Coefficient k is
/// sign_k * i * sqrt(energy_k); k = h/2 is zero and the upper half is the
/// negated mirror, which makes the inverse transform real-valued and
/// sine-only.
struct SpectralCoeffs {
  double dc = 0.0;
  std::vector<int> signs;
  std::vector<double> energies;
};

struct ReconstructedDive {
  std::vector<double> samples;          // h * n_windows values
  std::vector<SpectralCoeffs> windows;  // spectral description per window
};

/// Expands a spectral description into the full length-h coefficient vector
/// (zero at h/2, negated mirror above it).
inline std::vector<std::complex<double>> spectral_coefficient_vector(const SpectralCoeffs& coeffs,
                                                                     int h) {
  if (h % 2 != 0) throw std::invalid_argument("spectral_coefficient_vector: h must be even");
  if (static_cast<int>(coeffs.energies.size()) != h / 2 - 1 ||
      coeffs.signs.size() != coeffs.energies.size())
    throw std::invalid_argument("spectral_coefficient_vector: need h/2 - 1 sign/energy pairs");
  std::vector<std::complex<double>> y_hat(static_cast<std::size_t>(h), {0.0, 0.0});
  y_hat[0] = {coeffs.dc, 0.0};
  for (int k = 1; k <= h / 2 - 1; ++k) {
    const std::complex<double> c(0.0, coeffs.signs[static_cast<std::size_t>(k - 1)] *
                                          std::sqrt(coeffs.energies[static_cast<std::size_t>(k - 1)]));
    y_hat[static_cast<std::size_t>(k)] = c;
    y_hat[static_cast<std::size_t>(h - k)] = -c;
  }
  return y_hat;
}

/// 1/h-normalized inverse DFT of a spectral window; the construction makes
/// the result real-valued up to rounding.
inline std::vector<double> spectral_window_samples(const SpectralCoeffs& coeffs, int h) {
  const auto y_hat = spectral_coefficient_vector(coeffs, h);
  std::vector<double> samples(static_cast<std::size_t>(h));
  const double two_pi_over_h = 6.283185307179586476925286766559 / h;
  for (int n = 0; n < h; ++n) {
    std::complex<double> acc(0.0, 0.0);
    for (int k = 0; k < h; ++k) {
      const double a = two_pi_over_h * k * n;
      acc += y_hat[static_cast<std::size_t>(k)] * std::complex<double>(std::cos(a), std::sin(a));
    }
    samples[static_cast<std::size_t>(n)] = acc.real() / h;
  }
  return samples;
}

/// Generates a 1/h-normalized inverse DFT curve whose window averages follow
/// the DC autoregression and whose wiggliness equals the sum of the drawn
/// energies up to the feature cutoff.
inline ReconstructedDive reconstruct_raw(std::span<const int> fine_states,
                                         const ReconstructionParams& params, std::uint64_t seed,
                                         std::uint64_t dive_key = 0) {
  const int h = params.samples_per_window;
  if (h % 2 != 0) throw std::invalid_argument("reconstruct_raw: window length must be even");
  ReconstructedDive out;
  out.samples.reserve(fine_states.size() * static_cast<std::size_t>(h));
  SplitRng dc_rng = purpose_rng(seed, RngPurpose::kReconDc, dive_key);
  double prev_dc = 0.0;
  for (std::size_t w = 0; w < fine_states.size(); ++w) {
    const ReconStateParams& sp = params.states[static_cast<std::size_t>(fine_states[w])];
    SpectralCoeffs coeffs;
    const double dc_sd = h * sp.sigma_dc;
    coeffs.dc = w == 0 ? dc_rng.normal(0.0, dc_sd) : dc_rng.normal(sp.phi_dc * prev_dc, dc_sd);
    prev_dc = coeffs.dc;

    SplitRng sign_rng = purpose_rng(seed, RngPurpose::kReconSigns, dive_key, w);
    SplitRng energy_rng = purpose_rng(seed, RngPurpose::kReconEnergy, dive_key, w);
    for (int k = 1; k <= h / 2 - 1; ++k) {
      coeffs.signs.push_back(sign_rng.bernoulli(0.5) ? 1 : -1);
      coeffs.energies.push_back(
          energy_rng.gamma(sp.shape_base / (static_cast<double>(k) * k * k), sp.scale));
    }
    const std::vector<double> window = spectral_window_samples(coeffs, h);
    out.samples.insert(out.samples.end(), window.begin(), window.end());
    out.windows.push_back(std::move(coeffs));
  }
  return out;
}

}  // namespace carhhmm

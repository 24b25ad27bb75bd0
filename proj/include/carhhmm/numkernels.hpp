#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace carhhmm {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

/// Thrown when a linear-algebra step cannot produce a usable answer
/// (singular system, reducible chain, non-finite intermediate).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ===========================================================================
// Log-domain accumulation
// ===========================================================================

/// log(sum_i exp(v_i)), exact for the maximum element.
/// All -inf inputs yield -inf; an empty input is a usage error.
inline double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("log_sum_exp: empty input");
  double max_v = kNegInf;
  for (double v : values) max_v = std::max(max_v, v);
  if (max_v == kNegInf) return kNegInf;
  if (!std::isfinite(max_v)) return max_v;  // +inf dominates
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - max_v);
  return max_v + std::log(sum);
}

inline double log_sum_exp(std::initializer_list<double> values) {
  return log_sum_exp(std::span<const double>(values.begin(), values.size()));
}

inline double log_sum_exp(const Eigen::VectorXd& values) {
  return log_sum_exp(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())));
}

/// Two-argument form used in the forward recursions.
inline double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

// ===========================================================================
// Transition matrices and stationary distributions
// ===========================================================================

/// Row-stochastic N x N transition matrix.
struct TransitionMatrix {
  Eigen::MatrixXd probs;

  TransitionMatrix() = default;
  explicit TransitionMatrix(Eigen::MatrixXd p) : probs(std::move(p)) { validate(); }

  int n_states() const { return static_cast<int>(probs.rows()); }

  void validate() const {
    if (probs.rows() == 0 || probs.rows() != probs.cols())
      throw std::invalid_argument("TransitionMatrix: matrix must be square and nonempty");
    for (int i = 0; i < probs.rows(); ++i) {
      double row_sum = 0.0;
      for (int j = 0; j < probs.cols(); ++j) {
        const double p = probs(i, j);
        if (!(p >= -1e-15 && p <= 1.0 + 1e-12))
          throw std::invalid_argument("TransitionMatrix: entry outside [0, 1]");
        row_sum += p;
      }
      if (std::abs(row_sum - 1.0) > 1e-12)
        throw std::invalid_argument("TransitionMatrix: row does not sum to 1");
    }
  }
};

/// Unconstrained transition parameters; Gamma_ij = exp(eta_ij) / sum_k exp(eta_ik)
/// with eta_ii fixed at zero for identifiability.
struct UnconstrainedTransition {
  Eigen::MatrixXd etas;

  UnconstrainedTransition() = default;
  explicit UnconstrainedTransition(Eigen::MatrixXd e) : etas(std::move(e)) { validate(); }

  int n_states() const { return static_cast<int>(etas.rows()); }

  void validate() const {
    if (etas.rows() == 0 || etas.rows() != etas.cols())
      throw std::invalid_argument("UnconstrainedTransition: matrix must be square and nonempty");
    for (int i = 0; i < etas.rows(); ++i)
      if (etas(i, i) != 0.0)
        throw std::invalid_argument("UnconstrainedTransition: diagonal must be exactly zero");
  }
};

struct StationaryDist {
  Eigen::RowVectorXd probs;

  int n_states() const { return static_cast<int>(probs.size()); }
};

/// Row-wise softmax of eta with the diagonal pinned at zero. Always produces
/// a strictly positive row-stochastic matrix for finite eta.
inline TransitionMatrix eta_to_gamma(const UnconstrainedTransition& eta) {
  eta.validate();
  const int n = eta.n_states();
  Eigen::MatrixXd gamma(n, n);
  for (int i = 0; i < n; ++i) {
    // factor out the row max so large etas cannot overflow
    double row_max = 0.0;
    for (int j = 0; j < n; ++j) row_max = std::max(row_max, eta.etas(i, j));
    double denom = 0.0;
    for (int j = 0; j < n; ++j) denom += std::exp(eta.etas(i, j) - row_max);
    for (int j = 0; j < n; ++j) gamma(i, j) = std::exp(eta.etas(i, j) - row_max) / denom;
  }
  return TransitionMatrix(std::move(gamma));
}

/// Inverse of eta_to_gamma with the reference-to-diagonal convention
/// eta_ij = log(Gamma_ij / Gamma_ii). Undefined for matrices with zero entries.
inline UnconstrainedTransition gamma_to_eta(const TransitionMatrix& gamma) {
  const int n = gamma.n_states();
  Eigen::MatrixXd etas(n, n);
  for (int i = 0; i < n; ++i) {
    if (!(gamma.probs(i, i) > 0.0))
      throw std::domain_error("gamma_to_eta: zero entry, map undefined");
    for (int j = 0; j < n; ++j) {
      if (!(gamma.probs(i, j) > 0.0))
        throw std::domain_error("gamma_to_eta: zero entry, map undefined");
      etas(i, j) = (i == j) ? 0.0 : std::log(gamma.probs(i, j) / gamma.probs(i, i));
    }
  }
  return UnconstrainedTransition(std::move(etas));
}

/// Solves delta * Gamma = delta, sum(delta) = 1 via delta (I - Gamma + U) = 1
/// with U the all-ones matrix. Reducible or otherwise degenerate chains are
/// reported as a NumericalError.
inline StationaryDist stationary(const TransitionMatrix& gamma) {
  const int n = gamma.n_states();
  if (n == 1) return StationaryDist{Eigen::RowVectorXd::Ones(1)};
  Eigen::MatrixXd a =
      Eigen::MatrixXd::Identity(n, n) - gamma.probs + Eigen::MatrixXd::Ones(n, n);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a.transpose());
  if (!lu.isInvertible())
    throw NumericalError("stationary: chain is reducible or singular, no unique solution");
  Eigen::VectorXd delta = lu.solve(Eigen::VectorXd::Ones(n));
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    if (delta(i) < -1e-9 || !std::isfinite(delta(i)))
      throw NumericalError("stationary: solution has negative or non-finite entries");
    delta(i) = std::max(delta(i), 0.0);
    sum += delta(i);
  }
  delta /= sum;
  Eigen::RowVectorXd d = delta.transpose();
  const double residual = (d * gamma.probs - d).cwiseAbs().maxCoeff();
  if (residual > 1e-10) {
    std::ostringstream msg;
    msg << "stationary: fixed-point residual " << residual << " exceeds 1e-10";
    throw NumericalError(msg.str());
  }
  return StationaryDist{std::move(d)};
}

// ===========================================================================
// Emission density families
// ===========================================================================

/// Gamma distribution specified by its mean and standard deviation.
/// Internally shape = (mean/sd)^2 and scale = sd^2/mean.
struct GammaMeanSd {
  double mean = 1.0;
  double sd = 1.0;

  GammaMeanSd() = default;
  GammaMeanSd(double mean_, double sd_) : mean(mean_), sd(sd_) {
    if (!(mean > 0.0) || !(sd > 0.0))
      throw std::invalid_argument("GammaMeanSd: mean and sd must be positive");
  }

  double shape() const { return (mean / sd) * (mean / sd); }
  double scale() const { return sd * sd / mean; }
};

/// Log-density of the mean/sd Gamma family; -inf outside the support.
inline double gamma_logpdf(double x, const GammaMeanSd& params) {
  if (!(x > 0.0)) return kNegInf;
  const double a = params.shape();
  const double s = params.scale();
  return (a - 1.0) * std::log(x) - x / s - std::lgamma(a) - a * std::log(s);
}

inline double normal_logpdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * kLogTwoPi;
}

/// Conditionally autoregressive Normal emission: given the previous value y_prev,
/// component c is Normal(phi * y_prev_c + (1 - phi) * mean_c, sd_c). Components
/// are conditionally independent and share phi.
struct CarNormalParams {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
  double phi = 0.0;

  CarNormalParams() = default;
  CarNormalParams(Eigen::VectorXd mean_, Eigen::VectorXd sd_, double phi_)
      : mean(std::move(mean_)), sd(std::move(sd_)), phi(phi_) {
    validate();
  }

  int dim() const { return static_cast<int>(mean.size()); }

  void validate() const {
    if (mean.size() == 0 || mean.size() != sd.size())
      throw std::invalid_argument("CarNormalParams: mean and sd must be nonempty and equal length");
    for (int c = 0; c < sd.size(); ++c)
      if (!(sd(c) > 0.0)) throw std::invalid_argument("CarNormalParams: sd must be positive");
    if (!(phi >= 0.0 && phi <= 1.0))
      throw std::invalid_argument("CarNormalParams: phi must lie in [0, 1]");
  }
};

inline double car_normal_logpdf(const Eigen::VectorXd& y, const Eigen::VectorXd& y_prev,
                                const CarNormalParams& params) {
  if (y.size() != y_prev.size() || y.size() != params.mean.size())
    throw std::invalid_argument("car_normal_logpdf: dimension mismatch");
  double ll = 0.0;
  for (int c = 0; c < y.size(); ++c) {
    const double m = params.phi * y_prev(c) + (1.0 - params.phi) * params.mean(c);
    ll += normal_logpdf(y(c), m, params.sd(c));
  }
  return ll;
}

/// Unconditional form (phi plays no role); used for first-window emissions
/// and non-autoregressive variants.
inline double plain_normal_logpdf(const Eigen::VectorXd& y, const CarNormalParams& params) {
  if (y.size() != params.mean.size())
    throw std::invalid_argument("plain_normal_logpdf: dimension mismatch");
  double ll = 0.0;
  for (int c = 0; c < y.size(); ++c) ll += normal_logpdf(y(c), params.mean(c), params.sd(c));
  return ll;
}

// ===========================================================================
// Discrete Fourier transform
// ===========================================================================

/// Unnormalized forward DFT coefficient: sum_n y_n exp(-i 2 pi k n / h).
/// Direct evaluation of the defining sum; window lengths here are ~100 and
/// only a handful of frequencies are ever needed.
inline std::complex<double> dft(std::span<const double> window, int k) {
  const int h = static_cast<int>(window.size());
  if (h == 0) throw std::invalid_argument("dft: empty window");
  if (k < 0 || k > h - 1) throw std::invalid_argument("dft: frequency index out of range");
  const double w = -6.283185307179586476925286766559 * static_cast<double>(k) / h;
  std::complex<double> acc(0.0, 0.0);
  for (int n = 0; n < h; ++n)
    acc += window[static_cast<std::size_t>(n)] * std::complex<double>(std::cos(w * n), std::sin(w * n));
  return acc;
}

inline std::complex<double> dft(const std::vector<double>& window, int k) {
  return dft(std::span<const double>(window.data(), window.size()), k);
}

}  // namespace carhhmm

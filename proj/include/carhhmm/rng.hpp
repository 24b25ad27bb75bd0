#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>

namespace carhhmm {

/// Splittable counter-style random stream.
///
/// Streams are derived by hashing a user seed together with up to three
/// key integers (dive index, window index, purpose tag, ...). Two streams
/// with different keys are statistically independent, so simulation code
/// can draw for each dive/window in any order - or in parallel - and still
/// produce identical output for a given seed.
class SplitRng {
 public:
  explicit SplitRng(std::uint64_t state) : state_(state) {}

  static SplitRng keyed(std::uint64_t seed, std::uint64_t k1, std::uint64_t k2 = 0,
                        std::uint64_t k3 = 0) {
    std::uint64_t s = mix(seed ^ 0x9e3779b97f4a7c15ULL);
    s = mix(s ^ mix(k1 + 0xbf58476d1ce4e5b9ULL));
    s = mix(s ^ mix(k2 + 0x94d049bb133111ebULL));
    s = mix(s ^ mix(k3 + 0x2545f4914f6cdd1dULL));
    return SplitRng(s);
  }

  // splitmix64 step
  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1); never returns an exact endpoint.
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller; the antithetic pair member is cached.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Gamma(shape, scale) via Marsaglia-Tsang squeeze; shape < 1 handled by
  /// boosting to shape + 1 and scaling with U^{1/shape}.
  double gamma(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0))
      throw std::invalid_argument("gamma sampler requires shape > 0 and scale > 0");
    if (shape < 1.0) {
      const double u = uniform_open();
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_open();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
    }
  }

  /// Lognormal with the given mean and standard deviation on the natural
  /// scale (moment-matched; heavier right tail than a Gamma with the same
  /// first two moments).
  double lognormal_mean_sd(double mean, double sd) {
    const double s2 = std::log(1.0 + (sd / mean) * (sd / mean));
    const double m = std::log(mean) - 0.5 * s2;
    return std::exp(normal(m, std::sqrt(s2)));
  }

  /// Draws an index from an unnormalized nonnegative weight vector.
  int categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      u -= weights[i];
      if (u < 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

/// Purpose tags used to key simulation streams. Keeping them in one place
/// guarantees two different draws never share a stream.
enum class RngPurpose : std::uint64_t {
  kCoarseChain = 1,
  kDuration = 2,
  kFineChain = 3,
  kAvgEmission = 4,
  kWiggleEmission = 5,
  kReconDc = 6,
  kReconSigns = 7,
  kReconEnergy = 8,
  kRestartJitter = 9,
  kStudyTrain = 10,
  kStudyTest = 11,
};

inline SplitRng purpose_rng(std::uint64_t seed, RngPurpose purpose, std::uint64_t k1 = 0,
                            std::uint64_t k2 = 0) {
  return SplitRng::keyed(seed, static_cast<std::uint64_t>(purpose), k1, k2);
}

}  // namespace carhhmm

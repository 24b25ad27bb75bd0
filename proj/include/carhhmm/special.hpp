#pragma once

// Thin wrappers over boost::math for the distribution functions the decoding
// diagnostics need.

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>

#include "carhhmm/numkernels.hpp"

namespace carhhmm {

inline double normal_cdf(double x, double mean = 0.0, double sd = 1.0) {
  return boost::math::cdf(boost::math::normal_distribution<double>(mean, sd), x);
}

/// Standard Normal quantile; maps 0 and 1 to -inf/+inf instead of throwing.
inline double normal_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), p);
}

/// CDF of the mean/sd Gamma family; 0 at and below the support boundary.
inline double gamma_cdf(double x, const GammaMeanSd& params) {
  if (!(x > 0.0)) return 0.0;
  return boost::math::cdf(boost::math::gamma_distribution<double>(params.shape(), params.scale()), x);
}

}  // namespace carhhmm

#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "carhhmm/numkernels.hpp"

namespace carhhmm {

// ===========================================================================
// Raw series and windowed features
// ===========================================================================

/// High-frequency multichannel recording. Depth is positive-down in meters
/// when present; channels are typically acceleration components in m/s^2.
struct RawSeries {
  double sample_rate_hz = 0.0;
  std::optional<std::vector<double>> depth;
  std::vector<std::vector<double>> channels;

  std::size_t n_samples() const { return channels.empty() ? 0 : channels.front().size(); }

  void validate() const {
    if (!(sample_rate_hz > 0.0))
      throw std::invalid_argument("RawSeries: sample rate must be positive");
    if (channels.empty()) throw std::invalid_argument("RawSeries: no channels");
    for (const auto& c : channels)
      if (c.size() != channels.front().size())
        throw std::invalid_argument("RawSeries: channels have unequal lengths");
    if (depth && depth->size() != n_samples())
      throw std::invalid_argument("RawSeries: depth length differs from channels");
  }
};

struct FeatureConfig {
  int window_h = 100;
  int stride = 0;        // 0 means "equal to window_h"
  int max_freq_omega = 10;

  int effective_stride() const { return stride > 0 ? stride : window_h; }

  void validate() const {
    if (window_h <= 0) throw std::invalid_argument("FeatureConfig: window_h must be positive");
    if (stride < 0) throw std::invalid_argument("FeatureConfig: stride must be positive");
    if (max_freq_omega <= 0 || max_freq_omega > window_h - 1)
      throw std::invalid_argument("FeatureConfig: max_freq_omega must lie in [1, window_h - 1]");
  }
};

/// Per-window transformed observation: the per-channel window mean and the
/// spectral energy at frequencies 1..omega summed over channels.
struct WindowFeatures {
  Eigen::VectorXd avg;
  double wiggliness = 0.0;
};

/// One curve of the coarse-scale sequence: its duration and its sequence of
/// windowed fine-scale observations.
struct DiveRecord {
  int dive_id = 0;
  double duration_s = 0.0;
  std::vector<WindowFeatures> windows;
};

// ===========================================================================
// Preprocessing
// ===========================================================================

/// Centered moving average per channel (and depth). Windows are truncated at
/// the series edges, so output length equals input length.
inline RawSeries smooth(const RawSeries& series, double window_seconds) {
  series.validate();
  if (series.n_samples() == 0) throw std::invalid_argument("smooth: empty series");
  const int w = static_cast<int>(std::lround(window_seconds * series.sample_rate_hz));
  if (w < 1) throw std::invalid_argument("smooth: window shorter than one sample");
  const int half = w / 2;
  const int n = static_cast<int>(series.n_samples());

  auto smooth_one = [&](const std::vector<double>& x) {
    std::vector<double> out(x.size());
    for (int i = 0; i < n; ++i) {
      const int lo = std::max(0, i - half);
      const int hi = std::min(n - 1, i + half);
      double acc = 0.0;
      for (int j = lo; j <= hi; ++j) acc += x[static_cast<std::size_t>(j)];
      out[static_cast<std::size_t>(i)] = acc / static_cast<double>(hi - lo + 1);
    }
    return out;
  };

  RawSeries out;
  out.sample_rate_hz = series.sample_rate_hz;
  if (series.depth) out.depth = smooth_one(*series.depth);
  out.channels.reserve(series.channels.size());
  for (const auto& c : series.channels) out.channels.push_back(smooth_one(c));
  return out;
}

/// Maximal contiguous runs with depth strictly below the surface threshold
/// (depth value > depth_threshold_m, positive-down) lasting at least
/// min_duration_s. Returned intervals are half-open [start, end), disjoint,
/// and in time order.
inline std::vector<std::pair<std::size_t, std::size_t>> segment_dives(const RawSeries& series,
                                                                      double depth_threshold_m,
                                                                      double min_duration_s) {
  series.validate();
  if (!series.depth) throw std::invalid_argument("segment_dives: depth channel missing");
  const auto& depth = *series.depth;
  const std::size_t min_samples =
      static_cast<std::size_t>(std::ceil(min_duration_s * series.sample_rate_hz));
  std::vector<std::pair<std::size_t, std::size_t>> dives;
  std::size_t i = 0;
  while (i < depth.size()) {
    if (depth[i] > depth_threshold_m) {
      std::size_t j = i;
      while (j < depth.size() && depth[j] > depth_threshold_m) ++j;
      if (j - i >= min_samples && min_samples > 0) dives.emplace_back(i, j);
      i = j;
    } else {
      ++i;
    }
  }
  return dives;
}

/// Moving-window transform. Produces floor((T* - h) / stride) + 1 windows
/// (the trailing partial window is dropped); an input shorter than one
/// window yields an empty sequence.
inline std::vector<WindowFeatures> window_transform(
    const std::vector<std::vector<double>>& channels, const FeatureConfig& config) {
  config.validate();
  if (channels.empty()) throw std::invalid_argument("window_transform: no channels");
  const std::size_t t_star = channels.front().size();
  for (const auto& c : channels)
    if (c.size() != t_star)
      throw std::invalid_argument("window_transform: channels have unequal lengths");

  const int h = config.window_h;
  const int stride = config.effective_stride();
  std::vector<WindowFeatures> out;
  if (t_star < static_cast<std::size_t>(h)) return out;

  const std::size_t n_windows = (t_star - static_cast<std::size_t>(h)) / stride + 1;
  out.reserve(n_windows);
  const int d = static_cast<int>(channels.size());
  for (std::size_t w = 0; w < n_windows; ++w) {
    const std::size_t start = w * static_cast<std::size_t>(stride);
    WindowFeatures feat;
    feat.avg = Eigen::VectorXd::Zero(d);
    feat.wiggliness = 0.0;
    for (int c = 0; c < d; ++c) {
      std::span<const double> window(channels[static_cast<std::size_t>(c)].data() + start,
                                     static_cast<std::size_t>(h));
      double mean = 0.0;
      for (double v : window) mean += v;
      feat.avg(c) = mean / h;
      for (int k = 1; k <= config.max_freq_omega; ++k) feat.wiggliness += std::norm(dft(window, k));
    }
    out.push_back(std::move(feat));
  }
  return out;
}

}  // namespace carhhmm

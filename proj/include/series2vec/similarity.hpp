#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "series2vec/common.hpp"
#include "series2vec/ndarray.hpp"
#include "series2vec/spectral.hpp"

namespace s2v {

struct SoftDtwConfig {
  double alpha = 0.1;  // Gaussian locality weight on |i-j|
  double gamma = 0.0;  // soft-min temperature; 0 means hard min

  void validate() const {
    check_arg(alpha >= 0.0, "SoftDtwConfig: alpha must be >= 0");
    check_arg(gamma >= 0.0, "SoftDtwConfig: gamma must be >= 0");
  }
};

/// Monotone alignment between two series; 0-based index pairs from (0,0)
/// to (L_a-1, L_b-1) with steps in {(1,0),(0,1),(1,1)}.
struct WarpingPath {
  std::vector<std::pair<std::size_t, std::size_t>> steps;

  bool valid(std::size_t la, std::size_t lb) const {
    if (steps.empty() || la == 0 || lb == 0) return false;
    if (steps.front() != std::pair<std::size_t, std::size_t>{0, 0}) return false;
    if (steps.back() != std::pair<std::size_t, std::size_t>{la - 1, lb - 1}) return false;
    for (std::size_t k = 1; k < steps.size(); ++k) {
      const std::size_t di = steps[k].first - steps[k - 1].first;
      const std::size_t dj = steps[k].second - steps[k - 1].second;
      if (steps[k].first < steps[k - 1].first) return false;
      if (steps[k].second < steps[k - 1].second) return false;
      if (di > 1 || dj > 1 || (di == 0 && dj == 0)) return false;
    }
    return true;
  }
};

/// Aligned-element cost of the locality-weighted DTW: squared distance
/// between the two channel vectors, damped by exp(-(alpha/2)*(i-j)^2).
inline double point_cost(const std::vector<double>& a, const std::vector<double>& b,
                         std::size_t i, std::size_t j, double alpha) {
  check_arg(a.size() == b.size(), "point_cost: channel count mismatch, " +
                                      std::to_string(a.size()) + " vs " +
                                      std::to_string(b.size()));
  double d2 = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    const double d = a[c] - b[c];
    d2 += d * d;
  }
  const double di = static_cast<double>(i) - static_cast<double>(j);
  return d2 * std::exp(-0.5 * alpha * di * di);
}

namespace detail {

/// Squared channel distance between column i of a and column j of b,
/// both stored channel-major [d, L].
inline double col_sqdist(const NdArray& a, const NdArray& b, std::size_t i,
                         std::size_t j) {
  const std::size_t d = a.size(0), la = a.size(1), lb = b.size(1);
  double s = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    const double diff = a[c * la + i] - b[c * lb + j];
    s += diff * diff;
  }
  return s;
}

inline double soft_min3(double u, double v, double w, double gamma) {
  const double m = std::min(u, std::min(v, w));
  if (gamma == 0.0 || m == std::numeric_limits<double>::infinity()) return m;
  double z = 0.0;
  if (u != std::numeric_limits<double>::infinity()) z += std::exp(-(u - m) / gamma);
  if (v != std::numeric_limits<double>::infinity()) z += std::exp(-(v - m) / gamma);
  if (w != std::numeric_limits<double>::infinity()) z += std::exp(-(w - m) / gamma);
  return m - gamma * std::log(z);
}

}  // namespace detail

/// Elastic distance between two [d, L] series (lengths may differ): the
/// classic DTW dynamic program with Gaussian-damped squared cell costs and
/// a gamma-smoothed minimum (gamma=0 recovers the hard-min recursion).
/// Targets only — this value is never differentiated.
inline double soft_dtw(const NdArray& a, const NdArray& b, const SoftDtwConfig& cfg) {
  cfg.validate();
  check_arg(a.rank() == 2 && b.rank() == 2,
            "soft_dtw: inputs must be [channels, length] arrays");
  const std::size_t d = a.size(0), la = a.size(1), lb = b.size(1);
  check_arg(b.size(0) == d, "soft_dtw: channel count mismatch, " +
                                std::to_string(d) + " vs " + std::to_string(b.size(0)));
  check_arg(la >= 1 && lb >= 1, "soft_dtw: series must be non-empty");

  // Gaussian weights indexed by |i-j|
  const std::size_t wn = std::max(la, lb);
  std::vector<double> weight(wn);
  for (std::size_t k = 0; k < wn; ++k) {
    const double dk = static_cast<double>(k);
    weight[k] = std::exp(-0.5 * cfg.alpha * dk * dk);
  }

  const double inf = std::numeric_limits<double>::infinity();
  // rolling rows of the (la+1) x (lb+1) accumulated-cost table
  std::vector<double> prev(lb + 1, inf), cur(lb + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= la; ++i) {
    cur[0] = inf;
    for (std::size_t j = 1; j <= lb; ++j) {
      const std::size_t k = i > j ? i - j : j - i;
      const double cost = detail::col_sqdist(a, b, i - 1, j - 1) * weight[k];
      cur[j] = cost + detail::soft_min3(prev[j - 1], prev[j], cur[j - 1], cfg.gamma);
    }
    std::swap(prev, cur);
  }
  return prev[lb];
}

/// Euclidean distance between two magnitude spectra: sqrt of the summed
/// squared bin differences over all channels.
inline double euclidean_spectral(const SpectralSeries& a, const SpectralSeries& b) {
  check_arg(a.channels() == b.channels(), "euclidean_spectral: channel count mismatch, " +
                                              std::to_string(a.channels()) + " vs " +
                                              std::to_string(b.channels()));
  check_arg(a.bins() == b.bins(), "euclidean_spectral: bin count mismatch, " +
                                      std::to_string(a.bins()) + " vs " +
                                      std::to_string(b.bins()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.magnitudes.numel(); ++i) {
    const double d = a.magnitudes[i] - b.magnitudes[i];
    s += d * d;
  }
  return std::sqrt(s);
}

enum class DistanceKind { time, frequency };

/// Symmetric zero-diagonal B x B target matrix, divided by its maximum so
/// entries land in [0,1]. The divisor is recorded (0 when the matrix was
/// all zeros and left unchanged).
struct PairwiseDistanceMatrix {
  NdArray values;  // [B, B]
  DistanceKind kind = DistanceKind::time;
  double divisor = 0.0;
};

namespace detail {

/// Fills result[p] for each flattened pair p = (i,j), i<j, using `dist`;
/// optionally splits the pair list across worker threads. Placement is by
/// pair index, so the output is schedule-independent.
template <typename DistFn>
inline std::vector<double> pair_map(std::size_t n, std::size_t threads, DistFn dist) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  std::vector<double> out(pairs.size());
  threads = std::min<std::size_t>(std::max<std::size_t>(threads, 1), pairs.size());
  if (threads <= 1) {
    for (std::size_t p = 0; p < pairs.size(); ++p)
      out[p] = dist(pairs[p].first, pairs[p].second);
    return out;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t]() {
      for (std::size_t p = t; p < pairs.size(); p += threads)
        out[p] = dist(pairs[p].first, pairs[p].second);
    });
  }
  for (std::thread& th : pool) th.join();
  return out;
}

inline PairwiseDistanceMatrix assemble_targets(std::size_t n,
                                               const std::vector<double>& flat,
                                               DistanceKind kind) {
  PairwiseDistanceMatrix m;
  m.kind = kind;
  m.values = NdArray({n, n});
  std::size_t p = 0;
  double mx = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j, ++p) {
      m.values[i * n + j] = flat[p];
      m.values[j * n + i] = flat[p];
      mx = std::max(mx, flat[p]);
    }
  m.divisor = mx;
  if (mx > 0.0)
    for (std::size_t i = 0; i < m.values.numel(); ++i) m.values[i] /= mx;
  return m;
}

}  // namespace detail

/// Time-domain targets for a batch of [d, L] series.
inline PairwiseDistanceMatrix pairwise_targets_time(const std::vector<NdArray>& batch,
                                                    const SoftDtwConfig& cfg,
                                                    std::size_t threads = 1) {
  check_arg(batch.size() >= 2, "pairwise_targets: need at least 2 series, got " +
                                   std::to_string(batch.size()));
  const std::vector<double> flat = detail::pair_map(
      batch.size(), threads,
      [&](std::size_t i, std::size_t j) { return soft_dtw(batch[i], batch[j], cfg); });
  return detail::assemble_targets(batch.size(), flat, DistanceKind::time);
}

/// Frequency-domain targets for a batch of magnitude spectra.
inline PairwiseDistanceMatrix pairwise_targets_frequency(
    const std::vector<SpectralSeries>& batch, std::size_t threads = 1) {
  check_arg(batch.size() >= 2, "pairwise_targets: need at least 2 series, got " +
                                   std::to_string(batch.size()));
  const std::vector<double> flat = detail::pair_map(
      batch.size(), threads, [&](std::size_t i, std::size_t j) {
        return euclidean_spectral(batch[i], batch[j]);
      });
  return detail::assemble_targets(batch.size(), flat, DistanceKind::frequency);
}

}  // namespace s2v

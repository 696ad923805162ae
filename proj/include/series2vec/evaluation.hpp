#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "series2vec/common.hpp"
#include "series2vec/ndarray.hpp"
#include "series2vec/rng.hpp"

namespace s2v {

struct ProbeResult {
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  NdArray confusion;  // [C, C], row = true class
  std::size_t labels_per_class = 0;  // 0 = all available
  std::size_t iterations = 0;
  NdArray weights;  // [D, C]
  NdArray bias;     // [C]
};

namespace detail {

/// Largest eigenvalue of (A^T A) for A = [X | 1] via power iteration;
/// deterministic start vector, fixed iteration count.
inline double aug_gram_lmax(const NdArray& X) {
  const std::size_t n = X.size(0), d = X.size(1) + 1;
  std::vector<double> v(d, 1.0 / std::sqrt(static_cast<double>(d)));
  std::vector<double> av(n), w(d);
  double lambda = 0.0;
  for (std::size_t it = 0; it < 100; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = v[d - 1];  // the ones column
      const double* xi = X.data().data() + i * (d - 1);
      for (std::size_t j = 0; j + 1 < d; ++j) s += xi[j] * v[j];
      av[i] = s;
    }
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* xi = X.data().data() + i * (d - 1);
      for (std::size_t j = 0; j + 1 < d; ++j) w[j] += xi[j] * av[i];
      w[d - 1] += av[i];
    }
    double norm = 0.0;
    for (double x : w) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    lambda = norm;  // since ||v|| = 1, ||Gv|| estimates the top eigenvalue
    for (std::size_t j = 0; j < d; ++j) v[j] = w[j] / norm;
  }
  return lambda;
}

inline std::size_t argmax_row(const double* row, std::size_t c) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < c; ++k)
    if (row[k] > row[best]) best = k;
  return best;
}

}  // namespace detail

/// Multinomial logistic regression on frozen representations: zero-init,
/// full-batch gradient descent on mean cross-entropy with an L2 penalty
/// (lambda = 1e-4) on the weights only; stops when the gradient norm drops
/// below 1e-6 or after 5000 iterations. Entirely deterministic.
inline ProbeResult linear_probe(const NdArray& train_reps,
                                const std::vector<std::size_t>& train_labels,
                                const NdArray& test_reps,
                                const std::vector<std::size_t>& test_labels) {
  require_2d(train_reps, "linear_probe");
  require_2d(test_reps, "linear_probe");
  const std::size_t n = train_reps.size(0), D = train_reps.size(1);
  const std::size_t m = test_reps.size(0);
  check_arg(train_labels.size() == n && test_labels.size() == m,
            "linear_probe: label counts do not match representation counts");
  check_arg(test_reps.size(1) == D, "linear_probe: train/test dimension mismatch");
  check_arg(n >= 1 && m >= 1, "linear_probe: empty split");
  std::size_t C = 0;
  for (std::size_t l : train_labels) C = std::max(C, l + 1);
  for (std::size_t l : test_labels) C = std::max(C, l + 1);
  check_arg(C >= 2, "linear_probe: need at least 2 classes");
  {
    std::vector<char> seen(C, 0);
    for (std::size_t l : train_labels) seen[l] = 1;
    for (std::size_t c = 0; c < C; ++c)
      check_arg(seen[c], "linear_probe: class " + std::to_string(c) +
                             " absent from training labels");
  }

  const double lambda = 1e-4;
  const double lmax = detail::aug_gram_lmax(train_reps);
  const double lips = 0.5 * lmax / static_cast<double>(n) + lambda;
  const double step = lips > 0.0 ? 1.0 / lips : 1.0;

  NdArray W({D, C}), b({C});
  NdArray gW({D, C}), gb({C});
  std::vector<double> logits(C), probs(C);
  std::size_t iters = 0;
  for (; iters < 5000; ++iters) {
    std::fill(gW.ptr(), gW.ptr() + gW.numel(), 0.0);
    std::fill(gb.ptr(), gb.ptr() + gb.numel(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* xi = train_reps.data().data() + i * D;
      for (std::size_t c = 0; c < C; ++c) {
        double s = b[c];
        for (std::size_t j = 0; j < D; ++j) s += xi[j] * W[j * C + c];
        logits[c] = s;
      }
      const double mx = *std::max_element(logits.begin(), logits.end());
      double den = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        probs[c] = std::exp(logits[c] - mx);
        den += probs[c];
      }
      for (std::size_t c = 0; c < C; ++c) {
        const double r = probs[c] / den - (c == train_labels[i] ? 1.0 : 0.0);
        for (std::size_t j = 0; j < D; ++j) gW[j * C + c] += r * xi[j];
        gb[c] += r;
      }
    }
    double gnorm2 = 0.0;
    for (std::size_t k = 0; k < gW.numel(); ++k) {
      gW[k] = gW[k] / static_cast<double>(n) + lambda * W[k];
      gnorm2 += gW[k] * gW[k];
    }
    for (std::size_t c = 0; c < C; ++c) {
      gb[c] /= static_cast<double>(n);
      gnorm2 += gb[c] * gb[c];
    }
    if (std::sqrt(gnorm2) < 1e-6) break;
    for (std::size_t k = 0; k < W.numel(); ++k) W[k] -= step * gW[k];
    for (std::size_t c = 0; c < C; ++c) b[c] -= step * gb[c];
  }

  ProbeResult res;
  res.iterations = iters;
  res.confusion = NdArray({C, C});
  std::vector<std::size_t> class_total(C, 0), class_hit(C, 0);
  std::size_t hits = 0;
  std::vector<double> row(C);
  for (std::size_t i = 0; i < m; ++i) {
    const double* xi = test_reps.data().data() + i * D;
    for (std::size_t c = 0; c < C; ++c) {
      double s = b[c];
      for (std::size_t j = 0; j < D; ++j) s += xi[j] * W[j * C + c];
      row[c] = s;
    }
    const std::size_t pred = detail::argmax_row(row.data(), C);
    const std::size_t truth = test_labels[i];
    res.confusion[truth * C + pred] += 1.0;
    ++class_total[truth];
    if (pred == truth) {
      ++hits;
      ++class_hit[truth];
    }
  }
  res.accuracy = static_cast<double>(hits) / static_cast<double>(m);
  res.per_class_accuracy.resize(C);
  for (std::size_t c = 0; c < C; ++c)
    res.per_class_accuracy[c] =
        class_total[c] ? static_cast<double>(class_hit[c]) /
                             static_cast<double>(class_total[c])
                       : 0.0;
  res.weights = std::move(W);
  res.bias = std::move(b);
  return res;
}

struct CurvePoint {
  std::size_t n_per_class = 0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
};

/// Low-label probe curve with separate train and test pools: for each grid
/// value, draw that many labeled samples per class from the train pool
/// (seeded, stratified), probe, and evaluate on the fixed test pool.
inline std::vector<CurvePoint> low_label_curve(
    const NdArray& train_reps, const std::vector<std::size_t>& train_labels,
    const NdArray& test_reps, const std::vector<std::size_t>& test_labels,
    const std::vector<std::size_t>& grid, std::size_t repeats, std::uint64_t seed) {
  require_2d(train_reps, "low_label_curve");
  check_arg(!grid.empty(), "low_label_curve: empty grid");
  check_arg(repeats >= 1, "low_label_curve: repeats must be >= 1");
  std::size_t C = 0;
  for (std::size_t l : train_labels) C = std::max(C, l + 1);
  check_arg(C >= 2, "low_label_curve: need at least 2 classes");
  std::vector<std::vector<std::size_t>> by_class(C);
  for (std::size_t i = 0; i < train_labels.size(); ++i)
    by_class[train_labels[i]].push_back(i);
  for (std::size_t g : grid) {
    check_arg(g >= 1, "low_label_curve: grid values must be >= 1");
    for (std::size_t c = 0; c < C; ++c)
      check_arg(g <= by_class[c].size(),
                "low_label_curve: grid value " + std::to_string(g) +
                    " exceeds population of class " + std::to_string(c) + " (" +
                    std::to_string(by_class[c].size()) + ")");
  }

  const std::size_t D = train_reps.size(1);
  std::vector<CurvePoint> out;
  Rng root(seed);
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    const std::size_t g = grid[gi];
    std::vector<double> accs;
    accs.reserve(repeats);
    for (std::size_t r = 0; r < repeats; ++r) {
      Rng draw = root.child((gi + 1) * 1000003ULL + r);
      std::vector<std::size_t> chosen;
      for (std::size_t c = 0; c < C; ++c) {
        std::vector<std::size_t> pool = by_class[c];
        draw.shuffle(pool);
        chosen.insert(chosen.end(), pool.begin(),
                      pool.begin() + static_cast<std::ptrdiff_t>(g));
      }
      NdArray sub({chosen.size(), D});
      std::vector<std::size_t> sub_labels(chosen.size());
      for (std::size_t i = 0; i < chosen.size(); ++i) {
        sub_labels[i] = train_labels[chosen[i]];
        for (std::size_t j = 0; j < D; ++j)
          sub[i * D + j] = train_reps[chosen[i] * D + j];
      }
      accs.push_back(
          linear_probe(sub, sub_labels, test_reps, test_labels).accuracy);
    }
    double mean = std::accumulate(accs.begin(), accs.end(), 0.0) /
                  static_cast<double>(accs.size());
    double var = 0.0;
    for (double a : accs) var += (a - mean) * (a - mean);
    var /= static_cast<double>(accs.size());
    out.push_back({g, mean, std::sqrt(var)});
  }
  return out;
}

/// Single-pool overload: subsample the probe's training labels from the
/// pool and evaluate on the full pool (so the degenerate grid value equal
/// to the class population reproduces the full-data probe).
inline std::vector<CurvePoint> low_label_curve(const NdArray& reps,
                                               const std::vector<std::size_t>& labels,
                                               const std::vector<std::size_t>& grid,
                                               std::size_t repeats,
                                               std::uint64_t seed) {
  return low_label_curve(reps, labels, reps, labels, grid, repeats, seed);
}

/// Mean rank per model over datasets; rank 1 is the highest accuracy and
/// ties share the mean of the positions they occupy.
inline std::vector<double> average_rank(const std::vector<std::vector<double>>& table) {
  check_arg(!table.empty() && !table[0].empty(), "average_rank: empty table");
  const std::size_t M = table.size(), Dn = table[0].size();
  for (std::size_t i = 0; i < M; ++i) {
    check_arg(table[i].size() == Dn, "average_rank: ragged accuracy table");
    for (double v : table[i])
      check_arg(std::isfinite(v), "average_rank: missing or non-finite entry");
  }
  std::vector<double> mean_rank(M, 0.0);
  for (std::size_t d = 0; d < Dn; ++d) {
    std::vector<std::size_t> idx(M);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return table[a][d] > table[b][d];
    });
    std::size_t pos = 0;
    while (pos < M) {
      std::size_t end = pos;
      while (end + 1 < M && table[idx[end + 1]][d] == table[idx[pos]][d]) ++end;
      // positions pos..end (0-based) share the mean of ranks pos+1..end+1
      const double shared =
          (static_cast<double>(pos + 1) + static_cast<double>(end + 1)) / 2.0;
      for (std::size_t k = pos; k <= end; ++k) mean_rank[idx[k]] += shared;
      pos = end + 1;
    }
  }
  for (double& r : mean_rank) r /= static_cast<double>(Dn);
  return mean_rank;
}

}  // namespace s2v

#pragma once

// Shared test utilities: finite-difference gradient checking and independent
// loop oracles the suites compare the library against.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "series2vec/ndarray.hpp"
#include "series2vec/rng.hpp"

namespace s2v::test {

/// Scalar function of a list of tensors, rebuilt from scratch per call.
using ScalarFn = std::function<double(const std::vector<NdArray>&)>;

struct FdMismatch {
  bool ok = true;
  std::size_t input = 0, element = 0;
  double analytic = 0.0, numeric = 0.0;
};

/// Central differences against the provided analytic gradients; passes when
/// |a - fd| <= atol + rtol * max(|a|, |fd|) for every element.
inline FdMismatch fd_check(const ScalarFn& f, std::vector<NdArray> inputs,
                           const std::vector<NdArray>& analytic, double h = 1e-5,
                           double atol = 1e-7, double rtol = 1e-4) {
  FdMismatch m;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    for (std::size_t k = 0; k < inputs[t].numel(); ++k) {
      const double keep = inputs[t][k];
      inputs[t][k] = keep + h;
      const double up = f(inputs);
      inputs[t][k] = keep - h;
      const double dn = f(inputs);
      inputs[t][k] = keep;
      const double fd = (up - dn) / (2.0 * h);
      const double a = analytic[t][k];
      if (std::abs(a - fd) > atol + rtol * std::max(std::abs(a), std::abs(fd))) {
        m.ok = false;
        m.input = t;
        m.element = k;
        m.analytic = a;
        m.numeric = fd;
        return m;
      }
    }
  }
  return m;
}

inline NdArray random_array(const std::vector<std::size_t>& shape, Rng& rng,
                            double lo = -1.0, double hi = 1.0) {
  NdArray out(shape);
  for (std::size_t k = 0; k < out.numel(); ++k) out[k] = rng.uniform(lo, hi);
  return out;
}

/// Textbook i-j-k matrix product, the oracle for the library's matmul.
inline NdArray naive_matmul(const NdArray& a, const NdArray& b) {
  const std::size_t m = a.size(0), kk = a.size(1), n = b.size(1);
  NdArray c({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < kk; ++k) s += a[i * kk + k] * b[k * n + j];
      c[i * n + j] = s;
    }
  return c;
}

/// All monotone warping paths between an la x lb grid, costs folded in path
/// order; hard variant returns the minimum, soft variant the gamma-smoothed
/// minimum over the whole path set.
struct PathEnumerator {
  std::size_t la = 0, lb = 0;
  std::function<double(std::size_t, std::size_t)> cell;  // weighted cell cost
  std::vector<double> path_costs;

  void walk(std::size_t i, std::size_t j, double acc) {
    acc += cell(i, j);
    if (i + 1 == la && j + 1 == lb) {
      path_costs.push_back(acc);
      return;
    }
    if (i + 1 < la) walk(i + 1, j, acc);
    if (j + 1 < lb) walk(i, j + 1, acc);
    if (i + 1 < la && j + 1 < lb) walk(i + 1, j + 1, acc);
  }

  void run() {
    path_costs.clear();
    walk(0, 0, 0.0);
  }

  double hard_min() const {
    double best = path_costs.front();
    for (double c : path_costs) best = std::min(best, c);
    return best;
  }

  double soft_min(double gamma) const {
    double best = hard_min();
    double acc = 0.0;
    for (double c : path_costs) acc += std::exp(-(c - best) / gamma);
    return best - gamma * std::log(acc);
  }
};

/// Direct cross-correlation oracle for conv1d (no bias).
inline NdArray naive_conv1d(const NdArray& x, const NdArray& k, std::size_t stride,
                            std::size_t padding) {
  const std::size_t cin = x.size(0), L = x.size(1);
  const std::size_t cout = k.size(0), w = k.size(2);
  const std::size_t lout = (L + 2 * padding - w) / stride + 1;
  NdArray y({cout, lout});
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t t = 0; t < lout; ++t) {
      double s = 0.0;
      for (std::size_t c = 0; c < cin; ++c)
        for (std::size_t u = 0; u < w; ++u) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * stride + u) -
                                     static_cast<std::ptrdiff_t>(padding);
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(L)) continue;
          s += x[c * L + static_cast<std::size_t>(src)] *
               k[(o * cin + c) * w + u];
        }
      y[o * lout + t] = s;
    }
  return y;
}

}  // namespace s2v::test

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "series2vec/common.hpp"
#include "series2vec/ndarray.hpp"

namespace s2v {

/// One-sided magnitude spectrum of a series: M = floor(L/2)+1 bins per
/// channel, no windowing, no 1/L normalization.
struct SpectralSeries {
  NdArray magnitudes;  // [d_x, M]
  std::size_t source_length = 0;

  std::size_t channels() const { return magnitudes.size(0); }
  std::size_t bins() const { return magnitudes.size(1); }
};

namespace detail {

using cplx = std::complex<double>;

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// In-place iterative radix-2 FFT (decimation in time). n must be a power
/// of two. inverse=true computes the unscaled inverse transform.
inline void fft_pow2(std::vector<cplx>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n <= 1) return;
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * std::numbers::pi /
                       static_cast<double>(len);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const cplx w = std::polar(1.0, ang * static_cast<double>(k));
        const cplx u = a[i + k];
        const cplx v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

/// DFT of arbitrary length via Bluestein's chirp-z reduction to a
/// power-of-two circular convolution.
inline std::vector<cplx> dft(const std::vector<cplx>& x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  if (is_pow2(n)) {
    std::vector<cplx> a = x;
    fft_pow2(a, false);
    return a;
  }
  std::size_t m = 1;
  while (m < 2 * n - 1) m <<= 1;
  // chirp[k] = exp(-i*pi*k^2/n); k^2 reduced mod 2n keeps the angle small
  std::vector<cplx> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t k2 = (k * k) % (2 * n);
    chirp[k] = std::polar(1.0, -std::numbers::pi * static_cast<double>(k2) /
                                   static_cast<double>(n));
  }
  std::vector<cplx> a(m), b(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
  b[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k)
    b[k] = b[m - k] = std::conj(chirp[k]);
  fft_pow2(a, false);
  fft_pow2(b, false);
  for (std::size_t k = 0; k < m; ++k) a[k] *= b[k];
  fft_pow2(a, true);
  std::vector<cplx> out(n);
  for (std::size_t j = 0; j < n; ++j)
    out[j] = chirp[j] * a[j] / static_cast<double>(m);
  return out;
}

}  // namespace detail

/// One-sided DFT magnitudes of a [d_x, L] sample (fast transform).
inline SpectralSeries real_dft_magnitude(const NdArray& x) {
  check_arg(x.rank() == 2, "real_dft_magnitude: expected [channels, length], got " +
                               shape_str(x.shape()));
  const std::size_t d = x.size(0), L = x.size(1);
  check_arg(L >= 2, "real_dft_magnitude: series length must be >= 2, got " +
                        std::to_string(L));
  const std::size_t M = L / 2 + 1;
  SpectralSeries out;
  out.magnitudes = NdArray({d, M});
  out.source_length = L;
  std::vector<detail::cplx> buf(L);
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t t = 0; t < L; ++t) buf[t] = detail::cplx(x[c * L + t], 0.0);
    const std::vector<detail::cplx> spec = detail::dft(buf);
    for (std::size_t k = 0; k < M; ++k)
      out.magnitudes[c * M + k] = std::abs(spec[k]);
  }
  return out;
}

/// Same contract as real_dft_magnitude via the O(L^2) definition. The fast
/// path must agree with this within 1e-9.
inline SpectralSeries real_dft_magnitude_naive(const NdArray& x) {
  check_arg(x.rank() == 2, "real_dft_magnitude_naive: expected [channels, length]");
  const std::size_t d = x.size(0), L = x.size(1);
  check_arg(L >= 2, "real_dft_magnitude_naive: series length must be >= 2");
  const std::size_t M = L / 2 + 1;
  SpectralSeries out;
  out.magnitudes = NdArray({d, M});
  out.source_length = L;
  for (std::size_t c = 0; c < d; ++c)
    for (std::size_t k = 0; k < M; ++k) {
      double re = 0.0, im = 0.0;
      for (std::size_t t = 0; t < L; ++t) {
        const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) *
                           static_cast<double>(t) / static_cast<double>(L);
        re += x[c * L + t] * std::cos(ang);
        im += x[c * L + t] * std::sin(ang);
      }
      out.magnitudes[c * M + k] = std::hypot(re, im);
    }
  return out;
}

}  // namespace s2v

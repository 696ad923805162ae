#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "series2vec/common.hpp"

namespace s2v {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  if (s.empty()) return "scalar";
  std::ostringstream os;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

/// Dense row-major array of 64-bit floats. Rank 0 (empty shape) is a scalar.
class NdArray {
 public:
  NdArray() : shape_{}, data_(1, 0.0) {}
  explicit NdArray(Shape shape)
      : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}
  NdArray(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_arg(data_.size() == shape_numel(shape_),
              "NdArray: data size " + std::to_string(data_.size()) +
                  " does not match shape " + shape_str(shape_));
  }

  static NdArray zeros(Shape shape) { return NdArray(std::move(shape)); }
  static NdArray full(Shape shape, double v) {
    NdArray a(std::move(shape));
    for (double& x : a.data_) x = v;
    return a;
  }
  static NdArray scalar(double v) {
    NdArray a;
    a.data_[0] = v;
    return a;
  }
  static NdArray row(std::initializer_list<double> vs) {
    return NdArray({vs.size()}, std::vector<double>(vs));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size(std::size_t d) const { return shape_[d]; }
  std::size_t numel() const { return data_.size(); }
  bool is_scalar() const { return shape_.empty(); }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }
  double* ptr() { return data_.data(); }
  const double* ptr() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i) { return data_[i]; }
  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  double at(std::size_t i) const { return data_[i]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  double scalar_value() const {
    check_arg(is_scalar(), "expected a scalar, got shape " + shape_str(shape_));
    return data_[0];
  }

  NdArray reshaped(Shape shape) const {
    check_arg(shape_numel(shape) == numel(),
              "reshape: cannot view " + shape_str(shape_) + " as " + shape_str(shape));
    return NdArray(std::move(shape), data_);
  }

  bool same_shape(const NdArray& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const NdArray& a, const NdArray& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

inline double max_abs_diff(const NdArray& a, const NdArray& b) {
  check_arg(a.same_shape(b), "max_abs_diff: shape mismatch " + shape_str(a.shape()) +
                                 " vs " + shape_str(b.shape()));
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline void require_2d(const NdArray& x, const char* who) {
  check_arg(x.rank() == 2, std::string(who) + ": expected a 2-d array, got " +
                               shape_str(x.shape()));
}

/// a[m,k] * b[k,n]. Accumulation runs over k in ascending order for each
/// output cell, so results are bit-identical to the textbook triple loop.
inline NdArray matmul(const NdArray& a, const NdArray& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const std::size_t m = a.size(0), k = a.size(1), n = b.size(1);
  check_arg(b.size(0) == k, "matmul: inner dimensions disagree, " +
                                shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  NdArray out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a.data().data() + i * k;
    double* oi = out.ptr() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double* bp = b.data().data() + p * n;
      for (std::size_t j = 0; j < n; ++j) oi[j] += aip * bp[j];
    }
  }
  return out;
}

/// a[m,k] * b[n,k]^T -> [m,n]
inline NdArray matmul_nt(const NdArray& a, const NdArray& b) {
  require_2d(a, "matmul_nt");
  require_2d(b, "matmul_nt");
  const std::size_t m = a.size(0), k = a.size(1), n = b.size(0);
  check_arg(b.size(1) == k, "matmul_nt: inner dimensions disagree, " +
                                shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  NdArray out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a.data().data() + i * k;
    double* oi = out.ptr() + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b.data().data() + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      oi[j] = s;
    }
  }
  return out;
}

/// a[k,m]^T * b[k,n] -> [m,n]
inline NdArray matmul_tn(const NdArray& a, const NdArray& b) {
  require_2d(a, "matmul_tn");
  require_2d(b, "matmul_tn");
  const std::size_t k = a.size(0), m = a.size(1), n = b.size(1);
  check_arg(b.size(0) == k, "matmul_tn: inner dimensions disagree, " +
                                shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  NdArray out({m, n});
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a.data().data() + p * m;
    const double* bp = b.data().data() + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      double* oi = out.ptr() + i * n;
      const double api = ap[i];
      for (std::size_t j = 0; j < n; ++j) oi[j] += api * bp[j];
    }
  }
  return out;
}

inline NdArray transpose(const NdArray& a) {
  require_2d(a, "transpose");
  const std::size_t m = a.size(0), n = a.size(1);
  NdArray out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  return out;
}

}  // namespace s2v

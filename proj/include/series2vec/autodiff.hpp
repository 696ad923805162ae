#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "series2vec/common.hpp"
#include "series2vec/ndarray.hpp"

namespace s2v {

class Tape;

/// Lightweight handle to a tape node.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const NdArray& value() const;
  const NdArray& grad() const;
  const Shape& shape() const { return value().shape(); }
};

/// Define-by-run reverse-mode tape over whole-array operations.
///
/// The graph is rebuilt each training step. Each node keeps a persistent
/// gradient accumulator; backward() computes per-pass adjoints into scratch
/// storage and adds them into the accumulators, so calling backward twice
/// without zero_grad() yields exactly twice the gradients of one call.
class Tape {
 public:
  using BackFn = std::function<void(Tape&, const NdArray& adj)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives gradients (inputs, similarity targets).
  Var constant(NdArray v) { return push(std::move(v), false, nullptr); }

  /// Leaf parameter: participates in backward and keeps accumulated grads.
  Var param(NdArray v) { return push(std::move(v), true, nullptr); }

  /// Interior node. `back` receives this node's adjoint and is expected to
  /// add the resulting contributions into the parents' adjoints via
  /// adj_ref()/add_adj(). Pass needs_grad=false only for gradient-free results.
  Var make_node(NdArray value, bool needs_grad, BackFn back) {
    return push(std::move(value), needs_grad, std::move(back));
  }

  std::size_t size() const { return nodes_.size(); }

  const NdArray& value(std::size_t id) const { return nodes_.at(id).value; }
  const NdArray& grad(std::size_t id) const { return nodes_.at(id).grad; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).needs_grad; }

  void zero_grad() {
    for (Node& n : nodes_)
      if (n.needs_grad) std::fill(n.grad.ptr(), n.grad.ptr() + n.grad.numel(), 0.0);
  }

  /// Per-pass adjoint slot for a node, zero-initialized on first touch.
  NdArray& adj_ref(std::size_t id) {
    if (!adj_live_[id]) {
      adj_[id] = NdArray(nodes_[id].value.shape());
      adj_live_[id] = 1;
    }
    return adj_[id];
  }

  void add_adj(std::size_t id, const NdArray& c) {
    NdArray& a = adj_ref(id);
    check_arg(a.same_shape(c), "add_adj: adjoint shape mismatch");
    double* p = a.ptr();
    const double* q = c.data().data();
    for (std::size_t i = 0; i < c.numel(); ++i) p[i] += q[i];
  }

  /// Reverse sweep from a scalar root; accumulates into persistent grads.
  void backward(const Var& root) {
    check_arg(root.tape == this, "backward: root belongs to another tape");
    check_arg(nodes_.at(root.id).value.rank() == 0,
              "backward: root must be a scalar, got shape " +
                  shape_str(nodes_[root.id].value.shape()));
    adj_.resize(nodes_.size());
    adj_live_.assign(nodes_.size(), 0);
    adj_ref(root.id)[0] = 1.0;
    for (std::size_t i = root.id + 1; i-- > 0;) {
      if (!adj_live_[i]) continue;
      Node& n = nodes_[i];
      if (!n.needs_grad) continue;
      const NdArray& a = adj_[i];
      double* g = n.grad.ptr();
      const double* q = a.data().data();
      for (std::size_t j = 0; j < a.numel(); ++j) g[j] += q[j];
      if (n.back) n.back(*this, a);
    }
  }

 private:
  struct Node {
    NdArray value;
    NdArray grad;
    bool needs_grad;
    BackFn back;
  };

  Var push(NdArray value, bool needs_grad, BackFn back) {
    Node n{std::move(value), NdArray{}, needs_grad, std::move(back)};
    if (needs_grad) n.grad = NdArray(n.value.shape());
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  std::vector<NdArray> adj_;     // per-pass scratch, indexed like nodes_
  std::vector<char> adj_live_;
};

inline const NdArray& Var::value() const { return tape->value(id); }
inline const NdArray& Var::grad() const { return tape->grad(id); }

namespace detail {
inline Tape& same_tape(const Var& a, const Var& b) {
  check_arg(a.tape != nullptr && a.tape == b.tape,
            "operands must live on the same tape");
  return *a.tape;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise & reduction ops
// ---------------------------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  check_arg(a.value().same_shape(b.value()),
            "add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  NdArray out = a.value();
  double* o = out.ptr();
  const double* q = b.value().data().data();
  for (std::size_t i = 0; i < out.numel(); ++i) o[i] += q[i];
  bool req = t.requires_grad(a.id) || t.requires_grad(b.id);
  std::size_t ia = a.id, ib = b.id;
  return t.make_node(std::move(out), req, [ia, ib](Tape& tp, const NdArray& adj) {
    if (tp.requires_grad(ia)) tp.add_adj(ia, adj);
    if (tp.requires_grad(ib)) tp.add_adj(ib, adj);
  });
}

inline Var sub(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  check_arg(a.value().same_shape(b.value()),
            "sub: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  NdArray out = a.value();
  double* o = out.ptr();
  const double* q = b.value().data().data();
  for (std::size_t i = 0; i < out.numel(); ++i) o[i] -= q[i];
  bool req = t.requires_grad(a.id) || t.requires_grad(b.id);
  std::size_t ia = a.id, ib = b.id;
  return t.make_node(std::move(out), req, [ia, ib](Tape& tp, const NdArray& adj) {
    if (tp.requires_grad(ia)) tp.add_adj(ia, adj);
    if (tp.requires_grad(ib)) {
      NdArray& g = tp.adj_ref(ib);
      double* p = g.ptr();
      const double* q2 = adj.data().data();
      for (std::size_t i = 0; i < adj.numel(); ++i) p[i] -= q2[i];
    }
  });
}

inline Var mul(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  check_arg(a.value().same_shape(b.value()),
            "mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  NdArray out = a.value();
  double* o = out.ptr();
  const double* q = b.value().data().data();
  for (std::size_t i = 0; i < out.numel(); ++i) o[i] *= q[i];
  bool req = t.requires_grad(a.id) || t.requires_grad(b.id);
  std::size_t ia = a.id, ib = b.id;
  return t.make_node(std::move(out), req, [ia, ib](Tape& tp, const NdArray& adj) {
    const double* g = adj.data().data();
    if (tp.requires_grad(ia)) {
      double* p = tp.adj_ref(ia).ptr();
      const double* vb = tp.value(ib).data().data();
      for (std::size_t i = 0; i < adj.numel(); ++i) p[i] += g[i] * vb[i];
    }
    if (tp.requires_grad(ib)) {
      double* p = tp.adj_ref(ib).ptr();
      const double* va = tp.value(ia).data().data();
      for (std::size_t i = 0; i < adj.numel(); ++i) p[i] += g[i] * va[i];
    }
  });
}

inline Var scale(const Var& a, double s) {
  Tape& t = *a.tape;
  NdArray out = a.value();
  double* o = out.ptr();
  for (std::size_t i = 0; i < out.numel(); ++i) o[i] *= s;
  std::size_t ia = a.id;
  return t.make_node(std::move(out), t.requires_grad(ia),
                     [ia, s](Tape& tp, const NdArray& adj) {
                       if (!tp.requires_grad(ia)) return;
                       double* p = tp.adj_ref(ia).ptr();
                       const double* g = adj.data().data();
                       for (std::size_t i = 0; i < adj.numel(); ++i) p[i] += s * g[i];
                     });
}

inline Var sum_all(const Var& a) {
  Tape& t = *a.tape;
  double s = 0.0;
  for (std::size_t i = 0; i < a.value().numel(); ++i) s += a.value()[i];
  std::size_t ia = a.id;
  return t.make_node(NdArray::scalar(s), t.requires_grad(ia),
                     [ia](Tape& tp, const NdArray& adj) {
                       if (!tp.requires_grad(ia)) return;
                       double* p = tp.adj_ref(ia).ptr();
                       const double g = adj[0];
                       for (std::size_t i = 0; i < tp.value(ia).numel(); ++i) p[i] += g;
                     });
}

inline Var relu(const Var& a) {
  Tape& t = *a.tape;
  NdArray out = a.value();
  double* o = out.ptr();
  for (std::size_t i = 0; i < out.numel(); ++i) o[i] = o[i] > 0.0 ? o[i] : 0.0;
  std::size_t ia = a.id;
  return t.make_node(std::move(out), t.requires_grad(ia),
                     [ia](Tape& tp, const NdArray& adj) {
                       if (!tp.requires_grad(ia)) return;
                       double* p = tp.adj_ref(ia).ptr();
                       const double* g = adj.data().data();
                       const double* x = tp.value(ia).data().data();
                       for (std::size_t i = 0; i < adj.numel(); ++i)
                         if (x[i] > 0.0) p[i] += g[i];
                     });
}

// ---------------------------------------------------------------------------
// linear algebra ops
// ---------------------------------------------------------------------------

inline Var matmul(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  NdArray out = matmul(a.value(), b.value());
  bool req = t.requires_grad(a.id) || t.requires_grad(b.id);
  std::size_t ia = a.id, ib = b.id;
  return t.make_node(std::move(out), req, [ia, ib](Tape& tp, const NdArray& adj) {
    if (tp.requires_grad(ia)) tp.add_adj(ia, matmul_nt(adj, tp.value(ib)));
    if (tp.requires_grad(ib)) tp.add_adj(ib, matmul_tn(tp.value(ia), adj));
  });
}

/// a[m,k] * b[n,k]^T -> [m,n]
inline Var matmul_nt(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  NdArray out = matmul_nt(a.value(), b.value());
  bool req = t.requires_grad(a.id) || t.requires_grad(b.id);
  std::size_t ia = a.id, ib = b.id;
  return t.make_node(std::move(out), req, [ia, ib](Tape& tp, const NdArray& adj) {
    if (tp.requires_grad(ia)) tp.add_adj(ia, matmul(adj, tp.value(ib)));
    if (tp.requires_grad(ib)) tp.add_adj(ib, matmul_tn(adj, tp.value(ia)));
  });
}

/// x[m,n] + broadcast bias[n] over rows.
inline Var add_row_bias(const Var& x, const Var& b) {
  Tape& t = detail::same_tape(x, b);
  require_2d(x.value(), "add_row_bias");
  check_arg(b.value().rank() == 1 && b.value().size(0) == x.value().size(1),
            "add_row_bias: bias shape " + shape_str(b.shape()) +
                " does not match columns of " + shape_str(x.shape()));
  const std::size_t m = x.value().size(0), n = x.value().size(1);
  NdArray out = x.value();
  for (std::size_t i = 0; i < m; ++i) {
    double* oi = out.ptr() + i * n;
    const double* bb = b.value().data().data();
    for (std::size_t j = 0; j < n; ++j) oi[j] += bb[j];
  }
  bool req = t.requires_grad(x.id) || t.requires_grad(b.id);
  std::size_t ix = x.id, ib = b.id;
  return t.make_node(std::move(out), req, [ix, ib, m, n](Tape& tp, const NdArray& adj) {
    if (tp.requires_grad(ix)) tp.add_adj(ix, adj);
    if (tp.requires_grad(ib)) {
      double* g = tp.adj_ref(ib).ptr();
      for (std::size_t i = 0; i < m; ++i) {
        const double* ai = adj.data().data() + i * n;
        for (std::size_t j = 0; j < n; ++j) g[j] += ai[j];
      }
    }
  });
}

/// Columns [c0, c1) of a 2-d array.
inline Var col_slice(const Var& x, std::size_t c0, std::size_t c1) {
  Tape& t = *x.tape;
  require_2d(x.value(), "col_slice");
  const std::size_t m = x.value().size(0), n = x.value().size(1);
  check_arg(c0 < c1 && c1 <= n, "col_slice: invalid column range");
  NdArray out({m, c1 - c0});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = c0; j < c1; ++j)
      out[i * (c1 - c0) + (j - c0)] = x.value()[i * n + j];
  std::size_t ix = x.id;
  return t.make_node(std::move(out), t.requires_grad(ix),
                     [ix, c0, c1, m, n](Tape& tp, const NdArray& adj) {
                       if (!tp.requires_grad(ix)) return;
                       double* g = tp.adj_ref(ix).ptr();
                       const std::size_t w = c1 - c0;
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < w; ++j)
                           g[i * n + c0 + j] += adj[i * w + j];
                     });
}

/// Horizontal concatenation of 2-d arrays with equal row counts.
inline Var concat_cols(const std::vector<Var>& parts) {
  check_arg(!parts.empty(), "concat_cols: no inputs");
  Tape& t = *parts[0].tape;
  const std::size_t m = parts[0].value().size(0);
  std::size_t n = 0;
  bool req = false;
  for (const Var& p : parts) {
    check_arg(p.tape == &t, "concat_cols: operands on different tapes");
    require_2d(p.value(), "concat_cols");
    check_arg(p.value().size(0) == m, "concat_cols: row counts differ");
    n += p.value().size(1);
    req = req || t.requires_grad(p.id);
  }
  NdArray out({m, n});
  std::vector<std::size_t> ids, offs, widths;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const std::size_t w = p.value().size(1);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j)
        out[i * n + off + j] = p.value()[i * w + j];
    ids.push_back(p.id);
    offs.push_back(off);
    widths.push_back(w);
    off += w;
  }
  return t.make_node(std::move(out), req,
                     [ids, offs, widths, m, n](Tape& tp, const NdArray& adj) {
                       for (std::size_t k = 0; k < ids.size(); ++k) {
                         if (!tp.requires_grad(ids[k])) continue;
                         double* g = tp.adj_ref(ids[k]).ptr();
                         const std::size_t w = widths[k], o = offs[k];
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < w; ++j)
                             g[i * w + j] += adj[i * n + o + j];
                       }
                     });
}

// ---------------------------------------------------------------------------
// softmax / layer norm
// ---------------------------------------------------------------------------

namespace detail {
struct AxisView {
  std::size_t outer, extent, inner;
};
inline AxisView axis_view(const Shape& s, std::size_t axis) {
  check_arg(axis < s.size(), "axis " + std::to_string(axis) +
                                 " out of range for shape " + shape_str(s));
  AxisView v{1, s[axis], 1};
  for (std::size_t d = 0; d < axis; ++d) v.outer *= s[d];
  for (std::size_t d = axis + 1; d < s.size(); ++d) v.inner *= s[d];
  return v;
}
}  // namespace detail

/// Softmax along `axis`, computed with max-subtraction.
inline NdArray softmax(const NdArray& x, std::size_t axis) {
  const detail::AxisView v = detail::axis_view(x.shape(), axis);
  check_arg(v.extent >= 1, "softmax: empty axis");
  NdArray out(x.shape());
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t ii = 0; ii < v.inner; ++ii) {
      const std::size_t base = o * v.extent * v.inner + ii;
      double mx = x[base];
      for (std::size_t k = 1; k < v.extent; ++k)
        mx = std::max(mx, x[base + k * v.inner]);
      double den = 0.0;
      for (std::size_t k = 0; k < v.extent; ++k) {
        const double e = std::exp(x[base + k * v.inner] - mx);
        out[base + k * v.inner] = e;
        den += e;
      }
      for (std::size_t k = 0; k < v.extent; ++k) out[base + k * v.inner] /= den;
    }
  return out;
}

inline Var softmax(const Var& x, std::size_t axis) {
  Tape& t = *x.tape;
  NdArray s = softmax(x.value(), axis);
  const detail::AxisView v = detail::axis_view(x.value().shape(), axis);
  std::size_t ix = x.id;
  NdArray out = s;  // closure keeps its own copy for the Jacobian product
  return t.make_node(std::move(out), t.requires_grad(ix),
                     [ix, v, s](Tape& tp, const NdArray& adj) {
                       if (!tp.requires_grad(ix)) return;
                       double* g = tp.adj_ref(ix).ptr();
                       for (std::size_t o = 0; o < v.outer; ++o)
                         for (std::size_t ii = 0; ii < v.inner; ++ii) {
                           const std::size_t base = o * v.extent * v.inner + ii;
                           double dot = 0.0;
                           for (std::size_t k = 0; k < v.extent; ++k)
                             dot += adj[base + k * v.inner] * s[base + k * v.inner];
                           for (std::size_t k = 0; k < v.extent; ++k) {
                             const std::size_t p = base + k * v.inner;
                             g[p] += s[p] * (adj[p] - dot);
                           }
                         }
                     });
}

/// Row-wise layer normalization of x[m,n] with learned gain/bias[n].
inline Var layer_norm(const Var& x, const Var& gain, const Var& bias,
                      double eps = 1e-5) {
  Tape& t = detail::same_tape(x, gain);
  check_arg(bias.tape == &t, "layer_norm: operands on different tapes");
  require_2d(x.value(), "layer_norm");
  const std::size_t m = x.value().size(0), n = x.value().size(1);
  check_arg(gain.value().rank() == 1 && gain.value().size(0) == n &&
                bias.value().rank() == 1 && bias.value().size(0) == n,
            "layer_norm: gain/bias must have shape [" + std::to_string(n) + "]");
  NdArray xhat({m, n});
  NdArray inv_sd({m});
  NdArray out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const double* xi = x.value().data().data() + i * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += xi[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (xi[j] - mean) * (xi[j] - mean);
    var /= static_cast<double>(n);
    const double isd = 1.0 / std::sqrt(var + eps);
    inv_sd[i] = isd;
    for (std::size_t j = 0; j < n; ++j) {
      const double xh = (xi[j] - mean) * isd;
      xhat[i * n + j] = xh;
      out[i * n + j] = gain.value()[j] * xh + bias.value()[j];
    }
  }
  bool req = t.requires_grad(x.id) || t.requires_grad(gain.id) ||
             t.requires_grad(bias.id);
  std::size_t ix = x.id, ig = gain.id, ib = bias.id;
  return t.make_node(
      std::move(out), req,
      [ix, ig, ib, m, n, xhat, inv_sd](Tape& tp, const NdArray& adj) {
        const bool needx = tp.requires_grad(ix);
        const bool needg = tp.requires_grad(ig);
        const bool needb = tp.requires_grad(ib);
        double* gx = needx ? tp.adj_ref(ix).ptr() : nullptr;
        double* gg = needg ? tp.adj_ref(ig).ptr() : nullptr;
        double* gb = needb ? tp.adj_ref(ib).ptr() : nullptr;
        const NdArray& gain_v = tp.value(ig);
        for (std::size_t i = 0; i < m; ++i) {
          const double* ai = adj.data().data() + i * n;
          const double* xh = xhat.data().data() + i * n;
          if (needg)
            for (std::size_t j = 0; j < n; ++j) gg[j] += ai[j] * xh[j];
          if (needb)
            for (std::size_t j = 0; j < n; ++j) gb[j] += ai[j];
          if (needx) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double dxh = ai[j] * gain_v[j];
              s1 += dxh;
              s2 += dxh * xh[j];
            }
            s1 /= static_cast<double>(n);
            s2 /= static_cast<double>(n);
            for (std::size_t j = 0; j < n; ++j) {
              const double dxh = ai[j] * gain_v[j];
              gx[i * n + j] += inv_sd[i] * (dxh - s1 - xh[j] * s2);
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// convolution / pooling ops
// ---------------------------------------------------------------------------

/// Cross-correlation of x[c_in,L] with kernels[c_out,c_in,w], symmetric
/// zero-padding. Output length floor((L + 2*padding - w)/stride) + 1.
inline Var conv1d(const Var& x, const Var& kernels, std::size_t stride = 1,
                  std::size_t padding = 0) {
  Tape& t = detail::same_tape(x, kernels);
  check_arg(stride >= 1, "conv1d: stride must be >= 1");
  require_2d(x.value(), "conv1d");
  check_arg(kernels.value().rank() == 3, "conv1d: kernels must be 3-d, got " +
                                             shape_str(kernels.shape()));
  const std::size_t cin = x.value().size(0), L = x.value().size(1);
  const std::size_t cout = kernels.value().size(0), w = kernels.value().size(2);
  check_arg(kernels.value().size(1) == cin,
            "conv1d: kernel channel count " + std::to_string(kernels.value().size(1)) +
                " does not match input channels " + std::to_string(cin));
  check_arg(w <= L + 2 * padding, "conv1d: kernel width " + std::to_string(w) +
                                      " exceeds padded length " +
                                      std::to_string(L + 2 * padding));
  const std::size_t Lo = (L + 2 * padding - w) / stride + 1;
  NdArray out({cout, Lo});
  const NdArray& k = kernels.value();
  for (std::size_t oc = 0; oc < cout; ++oc)
    for (std::size_t tpos = 0; tpos < Lo; ++tpos) {
      double s = 0.0;
      for (std::size_t ic = 0; ic < cin; ++ic)
        for (std::size_t tau = 0; tau < w; ++tau) {
          const std::ptrdiff_t u = static_cast<std::ptrdiff_t>(tpos * stride + tau) -
                                   static_cast<std::ptrdiff_t>(padding);
          if (u < 0 || u >= static_cast<std::ptrdiff_t>(L)) continue;
          s += x.value()[ic * L + static_cast<std::size_t>(u)] *
               k[(oc * cin + ic) * w + tau];
        }
      out[oc * Lo + tpos] = s;
    }
  bool req = t.requires_grad(x.id) || t.requires_grad(kernels.id);
  std::size_t ix = x.id, ik = kernels.id;
  return t.make_node(
      std::move(out), req,
      [ix, ik, cin, L, cout, w, Lo, stride, padding](Tape& tp, const NdArray& adj) {
        const bool needx = tp.requires_grad(ix);
        const bool needk = tp.requires_grad(ik);
        double* gx = needx ? tp.adj_ref(ix).ptr() : nullptr;
        double* gk = needk ? tp.adj_ref(ik).ptr() : nullptr;
        const NdArray& xv = tp.value(ix);
        const NdArray& kv = tp.value(ik);
        for (std::size_t oc = 0; oc < cout; ++oc)
          for (std::size_t tpos = 0; tpos < Lo; ++tpos) {
            const double g = adj[oc * Lo + tpos];
            if (g == 0.0) continue;
            for (std::size_t ic = 0; ic < cin; ++ic)
              for (std::size_t tau = 0; tau < w; ++tau) {
                const std::ptrdiff_t u =
                    static_cast<std::ptrdiff_t>(tpos * stride + tau) -
                    static_cast<std::ptrdiff_t>(padding);
                if (u < 0 || u >= static_cast<std::ptrdiff_t>(L)) continue;
                const std::size_t xi = ic * L + static_cast<std::size_t>(u);
                const std::size_t ki = (oc * cin + ic) * w + tau;
                if (needx) gx[xi] += g * kv[ki];
                if (needk) gk[ki] += g * xv[xi];
              }
          }
      });
}

/// Temporal half of a disjoint block: shared kernels[f,w] slide along time
/// within each input channel independently. x[B,c,L] -> [B,f,c,L] with
/// same-length zero padding (left (w-1)/2, rest on the right). Bias is per
/// filter.
inline Var temporal_conv_same(const Var& x, const Var& kernels, const Var& bias) {
  Tape& t = detail::same_tape(x, kernels);
  check_arg(bias.tape == &t, "temporal_conv_same: operands on different tapes");
  check_arg(x.value().rank() == 3, "temporal_conv_same: input must be [B,c,L], got " +
                                       shape_str(x.shape()));
  require_2d(kernels.value(), "temporal_conv_same");
  const std::size_t B = x.value().size(0), c = x.value().size(1), L = x.value().size(2);
  const std::size_t f = kernels.value().size(0), w = kernels.value().size(1);
  check_arg(bias.value().rank() == 1 && bias.value().size(0) == f,
            "temporal_conv_same: bias must have shape [" + std::to_string(f) + "]");
  check_arg(w >= 1 && L >= 1, "temporal_conv_same: empty kernel or input");
  const std::size_t pl = (w - 1) / 2;
  NdArray out({B, f, c, L});
  const NdArray& xv = x.value();
  const NdArray& kv = kernels.value();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t fi = 0; fi < f; ++fi)
      for (std::size_t ci = 0; ci < c; ++ci) {
        const double* xr = xv.data().data() + (b * c + ci) * L;
        double* orow = out.ptr() + ((b * f + fi) * c + ci) * L;
        const double* kr = kv.data().data() + fi * w;
        const double bb = bias.value()[fi];
        for (std::size_t tpos = 0; tpos < L; ++tpos) {
          double s = bb;
          for (std::size_t tau = 0; tau < w; ++tau) {
            const std::ptrdiff_t u = static_cast<std::ptrdiff_t>(tpos + tau) -
                                     static_cast<std::ptrdiff_t>(pl);
            if (u < 0 || u >= static_cast<std::ptrdiff_t>(L)) continue;
            s += xr[u] * kr[tau];
          }
          orow[tpos] = s;
        }
      }
  bool req = t.requires_grad(x.id) || t.requires_grad(kernels.id) ||
             t.requires_grad(bias.id);
  std::size_t ix = x.id, ik = kernels.id, ib = bias.id;
  return t.make_node(
      std::move(out), req,
      [ix, ik, ib, B, c, L, f, w, pl](Tape& tp, const NdArray& adj) {
        const bool needx = tp.requires_grad(ix);
        const bool needk = tp.requires_grad(ik);
        const bool needb = tp.requires_grad(ib);
        double* gx = needx ? tp.adj_ref(ix).ptr() : nullptr;
        double* gk = needk ? tp.adj_ref(ik).ptr() : nullptr;
        double* gb = needb ? tp.adj_ref(ib).ptr() : nullptr;
        const NdArray& xv = tp.value(ix);
        const NdArray& kv = tp.value(ik);
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t fi = 0; fi < f; ++fi)
            for (std::size_t ci = 0; ci < c; ++ci) {
              const double* ar = adj.data().data() + ((b * f + fi) * c + ci) * L;
              const double* xr = xv.data().data() + (b * c + ci) * L;
              for (std::size_t tpos = 0; tpos < L; ++tpos) {
                const double g = ar[tpos];
                if (g == 0.0) continue;
                if (needb) gb[fi] += g;
                for (std::size_t tau = 0; tau < w; ++tau) {
                  const std::ptrdiff_t u = static_cast<std::ptrdiff_t>(tpos + tau) -
                                           static_cast<std::ptrdiff_t>(pl);
                  if (u < 0 || u >= static_cast<std::ptrdiff_t>(L)) continue;
                  if (needk) gk[fi * w + tau] += g * xr[u];
                  if (needx) gx[(b * c + ci) * L + static_cast<std::size_t>(u)] +=
                      g * kv[fi * w + tau];
                }
              }
            }
      });
}

/// Spatial half of a disjoint block: at each time step, collapse the
/// (filter, channel) grid with kernels[g,f,c]. x[B,f,c,L] -> [B,g,L].
inline Var spatial_conv(const Var& x, const Var& kernels, const Var& bias) {
  Tape& t = detail::same_tape(x, kernels);
  check_arg(bias.tape == &t, "spatial_conv: operands on different tapes");
  check_arg(x.value().rank() == 4, "spatial_conv: input must be [B,f,c,L], got " +
                                       shape_str(x.shape()));
  check_arg(kernels.value().rank() == 3, "spatial_conv: kernels must be [g,f,c]");
  const std::size_t B = x.value().size(0), f = x.value().size(1),
                    c = x.value().size(2), L = x.value().size(3);
  const std::size_t g = kernels.value().size(0);
  check_arg(kernels.value().size(1) == f && kernels.value().size(2) == c,
            "spatial_conv: kernel shape " + shape_str(kernels.shape()) +
                " does not match input " + shape_str(x.shape()));
  check_arg(bias.value().rank() == 1 && bias.value().size(0) == g,
            "spatial_conv: bias must have shape [" + std::to_string(g) + "]");
  NdArray out({B, g, L});
  const NdArray& xv = x.value();
  const NdArray& kv = kernels.value();
  const std::size_t fc = f * c;
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t gi = 0; gi < g; ++gi) {
      double* orow = out.ptr() + (b * g + gi) * L;
      const double* kr = kv.data().data() + gi * fc;
      const double bb = bias.value()[gi];
      for (std::size_t tpos = 0; tpos < L; ++tpos) orow[tpos] = bb;
      for (std::size_t e = 0; e < fc; ++e) {
        const double kw = kr[e];
        const double* xr = xv.data().data() + (b * fc + e) * L;
        for (std::size_t tpos = 0; tpos < L; ++tpos) orow[tpos] += kw * xr[tpos];
      }
    }
  bool req = t.requires_grad(x.id) || t.requires_grad(kernels.id) ||
             t.requires_grad(bias.id);
  std::size_t ix = x.id, ik = kernels.id, ib = bias.id;
  return t.make_node(
      std::move(out), req, [ix, ik, ib, B, f, c, L, g](Tape& tp, const NdArray& adj) {
        const bool needx = tp.requires_grad(ix);
        const bool needk = tp.requires_grad(ik);
        const bool needb = tp.requires_grad(ib);
        double* gx = needx ? tp.adj_ref(ix).ptr() : nullptr;
        double* gk = needk ? tp.adj_ref(ik).ptr() : nullptr;
        double* gb = needb ? tp.adj_ref(ib).ptr() : nullptr;
        const NdArray& xv = tp.value(ix);
        const NdArray& kv = tp.value(ik);
        const std::size_t fc = f * c;
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t gi = 0; gi < g; ++gi) {
            const double* ar = adj.data().data() + (b * g + gi) * L;
            if (needb)
              for (std::size_t tpos = 0; tpos < L; ++tpos) gb[gi] += ar[tpos];
            for (std::size_t e = 0; e < fc; ++e) {
              const double* xr = xv.data().data() + (b * fc + e) * L;
              if (needk) {
                double s = 0.0;
                for (std::size_t tpos = 0; tpos < L; ++tpos) s += ar[tpos] * xr[tpos];
                gk[gi * fc + e] += s;
              }
              if (needx) {
                const double kw = kv[gi * fc + e];
                double* gxr = gx + (b * fc + e) * L;
                for (std::size_t tpos = 0; tpos < L; ++tpos) gxr[tpos] += kw * ar[tpos];
              }
            }
          }
      });
}

/// Maximum over the trailing axis; gradient routes to the first maximal
/// index of each slice (ties break to the lowest index).
inline Var max_pool_last(const Var& x) {
  Tape& t = *x.tape;
  check_arg(x.value().rank() >= 1, "max_pool_last: input must have rank >= 1");
  const Shape& xs = x.value().shape();
  const std::size_t L = xs.back();
  check_arg(L >= 1, "max_pool_last: empty pooling axis");
  Shape os(xs.begin(), xs.end() - 1);
  const std::size_t rows = shape_numel(os);
  NdArray out(os);
  std::vector<std::size_t> arg(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.value().data().data() + r * L;
    std::size_t best = 0;
    for (std::size_t j = 1; j < L; ++j)
      if (xr[j] > xr[best]) best = j;
    arg[r] = best;
    out[r] = xr[best];
  }
  std::size_t ix = x.id;
  return t.make_node(std::move(out), t.requires_grad(ix),
                     [ix, arg, rows, L](Tape& tp, const NdArray& adj) {
                       if (!tp.requires_grad(ix)) return;
                       double* g = tp.adj_ref(ix).ptr();
                       for (std::size_t r = 0; r < rows; ++r)
                         g[r * L + arg[r]] += adj[r];
                     });
}

}  // namespace s2v

#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "series2vec/autodiff.hpp"
#include "series2vec/common.hpp"
#include "series2vec/ndarray.hpp"
#include "series2vec/similarity.hpp"

namespace s2v {

/// Huber-style penalty: quadratic near zero, linear past |x| = 1. Value and
/// slope agree at the seam (0.5 and +/-1), so it is C^1 everywhere.
inline double smooth_l1(double x) {
  check_arg(std::isfinite(x), "smooth_l1: input must be finite");
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

inline double smooth_l1_grad(double x) {
  const double a = std::abs(x);
  if (a < 1.0) return x;
  return x > 0.0 ? 1.0 : -1.0;
}

/// Predicted similarity of two representations: their dot product.
inline double representation_similarity(const NdArray& zi, const NdArray& zj) {
  check_arg(zi.rank() == 1 && zj.rank() == 1 && zi.size(0) == zj.size(0),
            "representation_similarity: dimension mismatch " + shape_str(zi.shape()) +
                " vs " + shape_str(zj.shape()));
  double s = 0.0;
  for (std::size_t k = 0; k < zi.size(0); ++k) s += zi[k] * zj[k];
  return s;
}

/// Similarity-preservation loss for one branch: mean over unordered pairs
/// i<j of smooth_l1(z_i . z_j - target_ij). Targets are plain values, not
/// tape nodes, so no gradient ever flows into them.
inline Var sim_loss(const Var& Z, const NdArray& targets) {
  Tape& t = *Z.tape;
  require_2d(Z.value(), "sim_loss");
  const std::size_t B = Z.value().size(0), K = Z.value().size(1);
  check_arg(B >= 2, "sim_loss: need at least 2 representations, got " +
                        std::to_string(B));
  check_arg(targets.rank() == 2 && targets.size(0) == B && targets.size(1) == B,
            "sim_loss: target matrix must be " + std::to_string(B) + "x" +
                std::to_string(B) + ", got " + shape_str(targets.shape()));
  const NdArray& zv = Z.value();
  const std::size_t npairs = B * (B - 1) / 2;
  // residuals kept for the backward pass
  std::vector<double> resid(npairs);
  double total = 0.0;
  std::size_t p = 0;
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t j = i + 1; j < B; ++j, ++p) {
      double dot = 0.0;
      const double* zi = zv.data().data() + i * K;
      const double* zj = zv.data().data() + j * K;
      for (std::size_t k = 0; k < K; ++k) dot += zi[k] * zj[k];
      resid[p] = dot - targets[i * B + j];
      total += smooth_l1(resid[p]);
    }
  total /= static_cast<double>(npairs);
  std::size_t iz = Z.id;
  return t.make_node(
      NdArray::scalar(total), t.requires_grad(iz),
      [iz, B, K, npairs, resid](Tape& tp, const NdArray& adj) {
        if (!tp.requires_grad(iz)) return;
        double* g = tp.adj_ref(iz).ptr();
        const NdArray& zv2 = tp.value(iz);
        const double scale = adj[0] / static_cast<double>(npairs);
        std::size_t q = 0;
        for (std::size_t i = 0; i < B; ++i)
          for (std::size_t j = i + 1; j < B; ++j, ++q) {
            const double w = scale * smooth_l1_grad(resid[q]);
            if (w == 0.0) continue;
            const double* zi = zv2.data().data() + i * K;
            const double* zj = zv2.data().data() + j * K;
            for (std::size_t k = 0; k < K; ++k) {
              g[i * K + k] += w * zj[k];
              g[j * K + k] += w * zi[k];
            }
          }
      });
}

/// Branch losses and their unweighted sum.
struct LossBreakdown {
  double time_term = 0.0;
  double freq_term = 0.0;
  double total = 0.0;
};

/// Two-branch total: L_T + L_F, unweighted.
inline Var total_loss(const Var& time_term, const Var& freq_term,
                      LossBreakdown* breakdown = nullptr) {
  Var sum = add(time_term, freq_term);
  if (breakdown) {
    breakdown->time_term = time_term.value().scalar_value();
    breakdown->freq_term = freq_term.value().scalar_value();
    breakdown->total = sum.value().scalar_value();
  }
  return sum;
}

/// Mean softmax cross-entropy of logits[B,C] against integer labels.
inline Var cross_entropy_mean(const Var& logits, const std::vector<std::size_t>& labels) {
  Tape& t = *logits.tape;
  require_2d(logits.value(), "cross_entropy_mean");
  const std::size_t B = logits.value().size(0), C = logits.value().size(1);
  check_arg(labels.size() == B, "cross_entropy_mean: label count " +
                                    std::to_string(labels.size()) +
                                    " does not match batch size " + std::to_string(B));
  for (std::size_t i = 0; i < B; ++i)
    check_arg(labels[i] < C, "cross_entropy_mean: label " + std::to_string(labels[i]) +
                                 " out of range for " + std::to_string(C) + " classes");
  NdArray probs = softmax(logits.value(), 1);
  double total = 0.0;
  for (std::size_t i = 0; i < B; ++i)
    total -= std::log(std::max(probs[i * C + labels[i]], 1e-300));
  total /= static_cast<double>(B);
  std::size_t il = logits.id;
  return t.make_node(NdArray::scalar(total), t.requires_grad(il),
                     [il, B, C, probs, labels](Tape& tp, const NdArray& adj) {
                       if (!tp.requires_grad(il)) return;
                       double* g = tp.adj_ref(il).ptr();
                       const double s = adj[0] / static_cast<double>(B);
                       for (std::size_t i = 0; i < B; ++i)
                         for (std::size_t c = 0; c < C; ++c) {
                           const double onehot = c == labels[i] ? 1.0 : 0.0;
                           g[i * C + c] += s * (probs[i * C + c] - onehot);
                         }
                     });
}

}  // namespace s2v

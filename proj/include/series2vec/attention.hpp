#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "series2vec/autodiff.hpp"
#include "series2vec/common.hpp"
#include "series2vec/encoder.hpp"
#include "series2vec/ndarray.hpp"
#include "series2vec/rng.hpp"

namespace s2v {

/// Pre-norm transformer block over a batch of representations. Tokens are
/// the B batch members; there is deliberately no positional signal, so the
/// block commutes with any permutation of the batch.
struct AttentionParams {
  std::size_t heads = 8;
  NdArray wq, wk, wv;        // [K, K], head h owns columns [h*dh, (h+1)*dh)
  NdArray wo;                // [K, K]
  NdArray bo;                // [K]
  NdArray ln1_gain, ln1_bias;  // [K]
  NdArray ffn_w1;            // [K, 4K]
  NdArray ffn_b1;            // [4K]
  NdArray ffn_w2;            // [4K, K]
  NdArray ffn_b2;            // [K]
  NdArray ln2_gain, ln2_bias;  // [K]

  std::size_t dim() const { return wq.size(0); }

  void validate() const {
    check_arg(heads >= 1, "AttentionParams: heads must be >= 1");
    check_arg(dim() % heads == 0, "AttentionParams: width " + std::to_string(dim()) +
                                      " not divisible by " + std::to_string(heads) +
                                      " heads");
  }

  template <typename Fn>
  void visit(Fn&& f) {
    f(std::string("wq"), wq);
    f(std::string("wk"), wk);
    f(std::string("wv"), wv);
    f(std::string("wo"), wo);
    f(std::string("bo"), bo);
    f(std::string("ln1_gain"), ln1_gain);
    f(std::string("ln1_bias"), ln1_bias);
    f(std::string("ffn_w1"), ffn_w1);
    f(std::string("ffn_b1"), ffn_b1);
    f(std::string("ffn_w2"), ffn_w2);
    f(std::string("ffn_b2"), ffn_b2);
    f(std::string("ln2_gain"), ln2_gain);
    f(std::string("ln2_bias"), ln2_bias);
  }
};

inline AttentionParams init_attention_params(std::size_t dim, std::size_t heads,
                                             Rng& rng) {
  check_arg(dim >= 1 && heads >= 1 && dim % heads == 0,
            "init_attention_params: dim must be a positive multiple of heads");
  AttentionParams p;
  p.heads = heads;
  p.wq = detail::glorot({dim, dim}, dim, dim, rng);
  p.wk = detail::glorot({dim, dim}, dim, dim, rng);
  p.wv = detail::glorot({dim, dim}, dim, dim, rng);
  p.wo = detail::glorot({dim, dim}, dim, dim, rng);
  p.bo = NdArray({dim});
  p.ln1_gain = NdArray::full({dim}, 1.0);
  p.ln1_bias = NdArray({dim});
  p.ffn_w1 = detail::glorot({dim, 4 * dim}, dim, 4 * dim, rng);
  p.ffn_b1 = NdArray({4 * dim});
  p.ffn_w2 = detail::glorot({4 * dim, dim}, 4 * dim, dim, rng);
  p.ffn_b2 = NdArray({dim});
  p.ln2_gain = NdArray::full({dim}, 1.0);
  p.ln2_bias = NdArray({dim});
  return p;
}

struct AttentionVars {
  std::vector<Var> vars;  // visit order
  std::size_t heads = 0;

  const Var& wq() const { return vars[0]; }
  const Var& wk() const { return vars[1]; }
  const Var& wv() const { return vars[2]; }
  const Var& wo() const { return vars[3]; }
  const Var& bo() const { return vars[4]; }
  const Var& ln1_gain() const { return vars[5]; }
  const Var& ln1_bias() const { return vars[6]; }
  const Var& ffn_w1() const { return vars[7]; }
  const Var& ffn_b1() const { return vars[8]; }
  const Var& ffn_w2() const { return vars[9]; }
  const Var& ffn_b2() const { return vars[10]; }
  const Var& ln2_gain() const { return vars[11]; }
  const Var& ln2_bias() const { return vars[12]; }
};

inline AttentionVars lift(Tape& tape, AttentionParams& p, bool trainable) {
  p.validate();
  AttentionVars v;
  v.heads = p.heads;
  p.visit([&](const std::string&, NdArray& a) {
    v.vars.push_back(trainable ? tape.param(a) : tape.constant(a));
  });
  return v;
}

/// R[B,K] -> Z[B,K]: pre-norm multi-head self-attention over the batch,
/// residual, pre-norm feed-forward (4x expansion, relu), residual. Scores
/// are scaled by 1/sqrt(d_z) with d_z the full block width.
inline Var batch_attend(const Var& R, const AttentionVars& v) {
  require_2d(R.value(), "batch_attend");
  const std::size_t K = R.value().size(1);
  check_arg(K == v.wq().value().size(0),
            "batch_attend: representation width " + std::to_string(K) +
                " does not match attention params " +
                std::to_string(v.wq().value().size(0)));
  const std::size_t h = v.heads, dh = K / h;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(K));

  Var n1 = layer_norm(R, v.ln1_gain(), v.ln1_bias());
  Var q = matmul(n1, v.wq());
  Var k = matmul(n1, v.wk());
  Var val = matmul(n1, v.wv());
  std::vector<Var> head_outs;
  head_outs.reserve(h);
  for (std::size_t i = 0; i < h; ++i) {
    Var qh = col_slice(q, i * dh, (i + 1) * dh);
    Var kh = col_slice(k, i * dh, (i + 1) * dh);
    Var vh = col_slice(val, i * dh, (i + 1) * dh);
    Var scores = scale(matmul_nt(qh, kh), inv_scale);
    Var attn = softmax(scores, 1);
    head_outs.push_back(matmul(attn, vh));
  }
  Var concat = h == 1 ? head_outs[0] : concat_cols(head_outs);
  Var attended = add(R, add_row_bias(matmul(concat, v.wo()), v.bo()));

  Var n2 = layer_norm(attended, v.ln2_gain(), v.ln2_bias());
  Var f1 = relu(add_row_bias(matmul(n2, v.ffn_w1()), v.ffn_b1()));
  Var f2 = add_row_bias(matmul(f1, v.ffn_w2()), v.ffn_b2());
  return add(attended, f2);
}

/// Tape-free forward.
inline NdArray batch_attend_plain(const NdArray& R, AttentionParams& p) {
  Tape tape;
  AttentionVars v = lift(tape, p, false);
  return batch_attend(tape.constant(R), v).value();
}

/// Verifies batch_attend(perm(R)) == perm(batch_attend(R)) within tol.
inline bool permutation_equivariance_check(const NdArray& R,
                                           const std::vector<std::size_t>& perm,
                                           AttentionParams& params,
                                           double tol = 1e-10) {
  require_2d(R, "permutation_equivariance_check");
  const std::size_t B = R.size(0), K = R.size(1);
  check_arg(perm.size() == B, "permutation_equivariance_check: permutation length " +
                                  std::to_string(perm.size()) +
                                  " does not match batch size " + std::to_string(B));
  std::vector<char> seen(B, 0);
  for (std::size_t i : perm) {
    check_arg(i < B && !seen[i],
              "permutation_equivariance_check: not a permutation of 0.." +
                  std::to_string(B - 1));
    seen[i] = 1;
  }
  NdArray permuted({B, K});
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t j = 0; j < K; ++j) permuted[i * K + j] = R[perm[i] * K + j];
  const NdArray z = batch_attend_plain(R, params);
  const NdArray zp = batch_attend_plain(permuted, params);
  double worst = 0.0;
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t j = 0; j < K; ++j)
      worst = std::max(worst, std::abs(zp[i * K + j] - z[perm[i] * K + j]));
  return worst <= tol;
}

}  // namespace s2v

#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "series2vec/autodiff.hpp"
#include "series2vec/common.hpp"
#include "series2vec/ndarray.hpp"
#include "series2vec/rng.hpp"

namespace s2v {

struct EncoderConfig {
  std::size_t layers = 2;
  std::size_t filters = 16;
  std::size_t kernel_width = 8;
  std::size_t repr_dim = 64;  // K

  void validate() const {
    check_arg(layers >= 1, "EncoderConfig: layers must be >= 1");
    check_arg(filters >= 1, "EncoderConfig: filters must be >= 1");
    check_arg(kernel_width >= 1, "EncoderConfig: kernel_width must be >= 1");
    check_arg(repr_dim >= 1, "EncoderConfig: repr_dim must be >= 1");
  }
};

/// One disjoint block: temporal kernels shared across channels, then a
/// spatial collapse of the (filter, channel) grid.
struct EncoderLayerParams {
  NdArray temporal_kernels;  // [f, w]
  NdArray temporal_bias;     // [f]
  NdArray spatial_kernels;   // [f, f, c_in]
  NdArray spatial_bias;      // [f]
};

struct EncoderParams {
  std::vector<EncoderLayerParams> layers;
  NdArray proj_w;  // [f, K]
  NdArray proj_b;  // [K]

  std::size_t input_channels = 0;

  template <typename Fn>
  void visit(Fn&& f) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string p = "layer" + std::to_string(i) + ".";
      f(p + "temporal_kernels", layers[i].temporal_kernels);
      f(p + "temporal_bias", layers[i].temporal_bias);
      f(p + "spatial_kernels", layers[i].spatial_kernels);
      f(p + "spatial_bias", layers[i].spatial_bias);
    }
    f(std::string("proj_w"), proj_w);
    f(std::string("proj_b"), proj_b);
  }
};

namespace detail {
/// Uniform Glorot draw in +/- sqrt(6/(fan_in+fan_out)).
inline NdArray glorot(const Shape& shape, std::size_t fan_in, std::size_t fan_out,
                      Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  NdArray a(shape);
  for (std::size_t i = 0; i < a.numel(); ++i) a[i] = rng.uniform(-bound, bound);
  return a;
}
}  // namespace detail

/// Deterministic parameter init: Glorot-uniform kernels, zero biases.
inline EncoderParams init_encoder_params(const EncoderConfig& cfg, std::size_t d_x,
                                         Rng& rng) {
  cfg.validate();
  check_arg(d_x >= 1, "init_encoder_params: input channel count must be >= 1");
  EncoderParams p;
  p.input_channels = d_x;
  std::size_t c_in = d_x;
  const std::size_t f = cfg.filters, w = cfg.kernel_width;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    EncoderLayerParams lp;
    lp.temporal_kernels = detail::glorot({f, w}, w, f, rng);
    lp.temporal_bias = NdArray({f});
    lp.spatial_kernels = detail::glorot({f, f, c_in}, f * c_in, f, rng);
    lp.spatial_bias = NdArray({f});
    p.layers.push_back(std::move(lp));
    c_in = f;
  }
  p.proj_w = detail::glorot({f, cfg.repr_dim}, f, cfg.repr_dim, rng);
  p.proj_b = NdArray({cfg.repr_dim});
  return p;
}

/// Tape handles to one encoder's parameters, in visit order.
struct EncoderVars {
  std::vector<Var> vars;  // same order as EncoderParams::visit
  std::size_t layers = 0;
  std::size_t input_channels = 0;

  const Var& temporal_kernels(std::size_t l) const { return vars[4 * l + 0]; }
  const Var& temporal_bias(std::size_t l) const { return vars[4 * l + 1]; }
  const Var& spatial_kernels(std::size_t l) const { return vars[4 * l + 2]; }
  const Var& spatial_bias(std::size_t l) const { return vars[4 * l + 3]; }
  const Var& proj_w() const { return vars[vars.size() - 2]; }
  const Var& proj_b() const { return vars[vars.size() - 1]; }
};

/// Registers every encoder parameter on the tape (trainable or frozen).
inline EncoderVars lift(Tape& tape, EncoderParams& p, bool trainable) {
  EncoderVars v;
  v.layers = p.layers.size();
  v.input_channels = p.input_channels;
  p.visit([&](const std::string&, NdArray& a) {
    v.vars.push_back(trainable ? tape.param(a) : tape.constant(a));
  });
  return v;
}

/// Forward pass on a [B, c, L] batch: per layer, temporal conv + relu then
/// spatial conv + relu; global max pool over time; affine map to K.
inline Var encode_batch(Tape& tape, const NdArray& batch, const EncoderVars& v) {
  check_arg(batch.rank() == 3, "encode_batch: input must be [B, channels, L], got " +
                                   shape_str(batch.shape()));
  check_arg(v.input_channels == 0 || batch.size(1) == v.input_channels,
            "encode_batch: input has " + std::to_string(batch.size(1)) +
                " channels but params expect " + std::to_string(v.input_channels));
  Var x = tape.constant(batch);
  for (std::size_t l = 0; l < v.layers; ++l) {
    Var tc = relu(temporal_conv_same(x, v.temporal_kernels(l), v.temporal_bias(l)));
    x = relu(spatial_conv(tc, v.spatial_kernels(l), v.spatial_bias(l)));
  }
  Var pooled = max_pool_last(x);  // [B, f]
  return add_row_bias(matmul(pooled, v.proj_w()), v.proj_b());
}

/// Tape-free convenience forward; identical numerics to encode_batch.
inline NdArray encode_batch_plain(const NdArray& batch, EncoderParams& p) {
  Tape tape;
  EncoderVars v = lift(tape, p, false);
  return encode_batch(tape, batch, v).value();
}

/// Single-sample [c, L] -> [K] forward.
inline NdArray encode(const NdArray& x, EncoderParams& p) {
  check_arg(x.rank() == 2, "encode: input must be [channels, L], got " +
                               shape_str(x.shape()));
  check_arg(x.size(0) == p.input_channels,
            "encode: input has " + std::to_string(x.size(0)) +
                " channels but params expect " + std::to_string(p.input_channels));
  NdArray b({1, x.size(0), x.size(1)});
  for (std::size_t i = 0; i < x.numel(); ++i) b[i] = x[i];
  NdArray r = encode_batch_plain(b, p);
  return r.reshaped({r.size(1)});
}

}  // namespace s2v

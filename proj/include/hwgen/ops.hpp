#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "hwgen/autograd.hpp"

namespace hwgen {

// The layer catalog. Every kind has a forward rule and an exact adjoint,
// checked against finite differences in the test suite.
enum class LayerKind {
  kConv1d,
  kConv2d,
  kLinear,
  kRelu,
  kLeakyRelu,
  kAvgPool,
  kNearestUpsample,
  kBlur,
  kAdain,
  kAdditiveNoise,
  kConcat,
  kGlobalAvgPool,
  kSoftmax,
  kLogSoftmax,
};

std::span<const LayerKind> all_layer_kinds();
std::string_view layer_kind_name(LayerKind kind);

// ---- elementwise and reductions ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, Real s);
Var add_scalar(const Var& a, Real s);
Var sum(const Var& a);
Var mean(const Var& a);
// Weighted sum of same-shaped inputs with constant weights.
Var weighted_sum(std::span<const Var> xs, std::span<const Real> weights);

Var relu(const Var& x);
Var leaky_relu(const Var& x, Real slope = Real(0.2));
Var sigmoid(const Var& x);
Var softplus(const Var& x);

// mean |a - b| and mean (a - b)^2; `b` is treated like any other input.
Var l1_loss(const Var& a, const Var& b);
Var mse_loss(const Var& a, const Var& b);
// mean over elements of max(0, margin + sign * x).
Var hinge(const Var& x, Real sign, Real margin = Real(1));

// ---- shape manipulation ----
Var reshape(const Var& x, Shape shape);
Var transpose2d(const Var& x);
Var concat(std::span<const Var> xs, int axis);
// Appends a trailing axis of extent n, repeating x along it.
Var tile_last(const Var& x, int n);
// Extent-`len` window of `axis` starting at `start`; zero outside the input.
Var slice(const Var& x, int axis, int start, int len);

// ---- layers ----
// x [C,H,W], w [O,C,KH,KW], b [O] (bias may be undefined).
Var conv2d(const Var& x, const Var& w, const Var& b, int stride_h = 1, int stride_w = 1,
           int pad_h = 0, int pad_w = 0);
// x [C,L], w [O,C,K], b [O].
Var conv1d(const Var& x, const Var& w, const Var& b, int stride = 1, int pad = 0);
// x [In], w [Out,In], b [Out].
Var linear(const Var& x, const Var& w, const Var& b);
// Non-overlapping average pooling over the last two axes of [C,H,W].
Var avg_pool2d(const Var& x, int kh, int kw);
// [C,H,W] -> [C, H*v, W*h].
Var upsample_nearest(const Var& x, int v_factor, int h_factor);
// Fixed normalized 1-2-1 (outer product) kernel, zero same-padding, per channel.
Var blur2d(const Var& x);
// Per-channel instance normalization with external scale/shift. x is
// [C, ...]; statistics are taken over everything but the channel axis.
Var adain(const Var& x, const Var& scale, const Var& shift, Real eps = Real(1e-5));
// x + strength[c] * N(0,1) drawn from `noise`.
Var additive_noise(const Var& x, const Var& strength, NoiseSource& noise);
// [C, ...] -> [C]
Var global_avg_pool(const Var& x);
// Row-wise over the last axis.
Var softmax(const Var& x);
Var log_softmax(const Var& x);

}  // namespace hwgen

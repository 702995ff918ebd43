#include "hwgen/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <memory>

#include "hwgen/error.hpp"

namespace hwgen {

namespace {

using MatR = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

using Grads = std::span<Tensor* const>;

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void check_rank(const Var& x, int rank, const char* op) {
  if (x.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(x.shape()));
  }
}

template <class F>
Tensor unary_map(const Var& x, F f) {
  Tensor out(x.shape());
  const auto& in = x.value();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return out;
}

// im2col for a single [C,H,W] image; col is [C*KH*KW, Ho*Wo].
void im2col(const Real* x, int c, int h, int w, int kh, int kw, int sh, int sw, int ph, int pw,
            int ho, int wo, Real* col) {
  for (int ci = 0; ci < c; ++ci) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        Real* row = col + ((static_cast<std::size_t>(ci) * kh + ki) * kw + kj) * ho * wo;
        for (int oi = 0; oi < ho; ++oi) {
          int ii = oi * sh - ph + ki;
          Real* dst = row + static_cast<std::size_t>(oi) * wo;
          if (ii < 0 || ii >= h) {
            std::fill(dst, dst + wo, Real(0));
            continue;
          }
          const Real* src = x + (static_cast<std::size_t>(ci) * h + ii) * w;
          for (int oj = 0; oj < wo; ++oj) {
            int jj = oj * sw - pw + kj;
            dst[oj] = (jj >= 0 && jj < w) ? src[jj] : Real(0);
          }
        }
      }
    }
  }
}

void col2im(const Real* col, int c, int h, int w, int kh, int kw, int sh, int sw, int ph, int pw,
            int ho, int wo, Real* x) {
  for (int ci = 0; ci < c; ++ci) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        const Real* row = col + ((static_cast<std::size_t>(ci) * kh + ki) * kw + kj) * ho * wo;
        for (int oi = 0; oi < ho; ++oi) {
          int ii = oi * sh - ph + ki;
          if (ii < 0 || ii >= h) continue;
          const Real* src = row + static_cast<std::size_t>(oi) * wo;
          Real* dst = x + (static_cast<std::size_t>(ci) * h + ii) * w;
          for (int oj = 0; oj < wo; ++oj) {
            int jj = oj * sw - pw + kj;
            if (jj >= 0 && jj < w) dst[jj] += src[oj];
          }
        }
      }
    }
  }
}

}  // namespace

std::span<const LayerKind> all_layer_kinds() {
  static constexpr std::array kinds{
      LayerKind::kConv1d,       LayerKind::kConv2d,        LayerKind::kLinear,
      LayerKind::kRelu,         LayerKind::kLeakyRelu,     LayerKind::kAvgPool,
      LayerKind::kNearestUpsample, LayerKind::kBlur,       LayerKind::kAdain,
      LayerKind::kAdditiveNoise, LayerKind::kConcat,       LayerKind::kGlobalAvgPool,
      LayerKind::kSoftmax,      LayerKind::kLogSoftmax,
  };
  return kinds;
}

std::string_view layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv1d: return "conv1d";
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kLinear: return "linear";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kLeakyRelu: return "leaky-relu";
    case LayerKind::kAvgPool: return "avg-pool";
    case LayerKind::kNearestUpsample: return "nearest-upsample";
    case LayerKind::kBlur: return "blur";
    case LayerKind::kAdain: return "adain";
    case LayerKind::kAdditiveNoise: return "additive-noise";
    case LayerKind::kConcat: return "concat";
    case LayerKind::kGlobalAvgPool: return "global-avg-pool";
    case LayerKind::kSoftmax: return "softmax";
    case LayerKind::kLogSoftmax: return "log-softmax";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Elementwise and reductions

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out = a.value();
  out += b.value();
  return make_node(std::move(out), {a, b}, [](const Tensor& g, Grads pg) {
    if (pg[0]) *pg[0] += g;
    if (pg[1]) *pg[1] += g;
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return make_node(std::move(out), {a, b}, [](const Tensor& g, Grads pg) {
    if (pg[0]) *pg[0] += g;
    if (pg[1]) {
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[i] -= g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  const auto& av = a.value();
  const auto& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_node(std::move(out), {a, b}, [av, bv](const Tensor& g, Grads pg) {
    if (pg[0]) {
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] * bv[i];
    }
    if (pg[1]) {
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[i] += g[i] * av[i];
    }
  });
}

Var scale(const Var& a, Real s) {
  Tensor out = a.value();
  out *= s;
  return make_node(std::move(out), {a}, [s](const Tensor& g, Grads pg) {
    for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += s * g[i];
  });
}

Var add_scalar(const Var& a, Real s) {
  Tensor out = a.value();
  for (auto& v : out.values()) v += s;
  return make_node(std::move(out), {a}, [](const Tensor& g, Grads pg) { *pg[0] += g; });
}

Var sum(const Var& a) {
  return make_node(Tensor::scalar(a.value().sum()), {a}, [](const Tensor& g, Grads pg) {
    for (auto& v : pg[0]->values()) v += g[0];
  });
}

Var mean(const Var& a) {
  const auto n = static_cast<Real>(a.value().size());
  return make_node(Tensor::scalar(a.value().sum() / n), {a}, [n](const Tensor& g, Grads pg) {
    for (auto& v : pg[0]->values()) v += g[0] / n;
  });
}

Var weighted_sum(std::span<const Var> xs, std::span<const Real> weights) {
  if (xs.empty() || xs.size() != weights.size()) {
    throw ShapeError("weighted_sum: need matching non-empty inputs and weights");
  }
  Tensor out(xs[0].shape());
  for (std::size_t k = 0; k < xs.size(); ++k) {
    check_same_shape(xs[0], xs[k], "weighted_sum");
    const auto& v = xs[k].value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += weights[k] * v[i];
  }
  std::vector<Real> w(weights.begin(), weights.end());
  return make_node(std::move(out), std::vector<Var>(xs.begin(), xs.end()),
                   [w](const Tensor& g, Grads pg) {
                     for (std::size_t k = 0; k < pg.size(); ++k) {
                       if (!pg[k]) continue;
                       for (std::size_t i = 0; i < g.size(); ++i) (*pg[k])[i] += w[k] * g[i];
                     }
                   });
}

Var relu(const Var& x) {
  Tensor out = unary_map(x, [](Real v) { return v > 0 ? v : Real(0); });
  Tensor in = x.value();
  return make_node(std::move(out), {x}, [in](const Tensor& g, Grads pg) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (in[i] > 0) (*pg[0])[i] += g[i];
    }
  });
}

Var leaky_relu(const Var& x, Real slope) {
  Tensor in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0 ? in[i] : slope * in[i];
  return make_node(std::move(out), {x}, [in, slope](const Tensor& g, Grads pg) {
    for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += in[i] > 0 ? g[i] : slope * g[i];
  });
}

Var sigmoid(const Var& x) {
  const auto& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = Real(1) / (Real(1) + std::exp(-in[i]));
  Tensor y = out;
  return make_node(std::move(out), {x}, [y](const Tensor& g, Grads pg) {
    for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] * y[i] * (Real(1) - y[i]);
  });
}

Var softplus(const Var& x) {
  Tensor in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) {
    Real v = in[i];
    out[i] = v > 20 ? v : std::log1p(std::exp(v));
  }
  return make_node(std::move(out), {x}, [in](const Tensor& g, Grads pg) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      (*pg[0])[i] += g[i] / (Real(1) + std::exp(-in[i]));
    }
  });
}

Var l1_loss(const Var& a, const Var& b) {
  check_same_shape(a, b, "l1_loss");
  const auto& av = a.value();
  const auto& bv = b.value();
  const auto n = static_cast<Real>(av.size());
  double acc = 0;
  Tensor sign(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) {
    Real d = av[i] - bv[i];
    acc += std::abs(d);
    sign[i] = d > 0 ? Real(1) : (d < 0 ? Real(-1) : Real(0));
  }
  return make_node(Tensor::scalar(static_cast<Real>(acc / n)), {a, b},
                   [sign, n](const Tensor& g, Grads pg) {
                     Real k = g[0] / n;
                     for (std::size_t i = 0; i < sign.size(); ++i) {
                       if (pg[0]) (*pg[0])[i] += k * sign[i];
                       if (pg[1]) (*pg[1])[i] -= k * sign[i];
                     }
                   });
}

Var mse_loss(const Var& a, const Var& b) {
  check_same_shape(a, b, "mse_loss");
  const auto& av = a.value();
  const auto& bv = b.value();
  const auto n = static_cast<Real>(av.size());
  Tensor diff(av.shape());
  double acc = 0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    diff[i] = av[i] - bv[i];
    acc += static_cast<double>(diff[i]) * diff[i];
  }
  return make_node(Tensor::scalar(static_cast<Real>(acc / n)), {a, b},
                   [diff, n](const Tensor& g, Grads pg) {
                     Real k = Real(2) * g[0] / n;
                     for (std::size_t i = 0; i < diff.size(); ++i) {
                       if (pg[0]) (*pg[0])[i] += k * diff[i];
                       if (pg[1]) (*pg[1])[i] -= k * diff[i];
                     }
                   });
}

Var hinge(const Var& x, Real sign, Real margin) {
  const auto& in = x.value();
  const auto n = static_cast<Real>(in.size());
  double acc = 0;
  Tensor active(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) {
    Real v = margin + sign * in[i];
    if (v > 0) {
      acc += v;
      active[i] = 1;
    }
  }
  return make_node(Tensor::scalar(static_cast<Real>(acc / n)), {x},
                   [active, sign, n](const Tensor& g, Grads pg) {
                     for (std::size_t i = 0; i < active.size(); ++i) {
                       (*pg[0])[i] += active[i] * sign * g[0] / n;
                     }
                   });
}

// ---------------------------------------------------------------------------
// Shape manipulation

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return make_node(std::move(out), {x}, [](const Tensor& g, Grads pg) {
    for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
  });
}

Var transpose2d(const Var& x) {
  check_rank(x, 2, "transpose2d");
  const auto& in = x.value();
  const int r = in.dim(0), c = in.dim(1);
  Tensor out(Shape{c, r});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out.at(j, i) = in.at(i, j);
  return make_node(std::move(out), {x}, [r, c](const Tensor& g, Grads pg) {
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) pg[0]->at(i, j) += g.at(j, i);
  });
}

Var concat(std::span<const Var> xs, int axis) {
  if (xs.empty()) throw ShapeError("concat: no inputs");
  const Shape& s0 = xs[0].shape();
  const int rank = static_cast<int>(s0.size());
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw ShapeError("concat: bad axis");
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s0[i];
  for (int i = axis + 1; i < rank; ++i) inner *= s0[i];
  Shape out_shape = s0;
  out_shape[axis] = 0;
  std::vector<int> extents;
  for (const auto& x : xs) {
    const Shape& s = x.shape();
    if (static_cast<int>(s.size()) != rank) throw ShapeError("concat: rank mismatch");
    for (int i = 0; i < rank; ++i) {
      if (i != axis && s[i] != s0[i]) {
        throw ShapeError("concat: incompatible shapes " + shape_str(s0) + " and " + shape_str(s));
      }
    }
    extents.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  Tensor out(out_shape);
  const std::size_t out_row = static_cast<std::size_t>(out_shape[axis]) * inner;
  std::size_t offset = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto& v = xs[k].value();
    const std::size_t row = static_cast<std::size_t>(extents[k]) * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(v.data() + o * row, row, out.data() + o * out_row + offset);
    }
    offset += row;
  }
  return make_node(std::move(out), std::vector<Var>(xs.begin(), xs.end()),
                   [extents, outer, inner, out_row](const Tensor& g, Grads pg) {
                     std::size_t off = 0;
                     for (std::size_t k = 0; k < pg.size(); ++k) {
                       const std::size_t row = static_cast<std::size_t>(extents[k]) * inner;
                       if (pg[k]) {
                         for (std::size_t o = 0; o < outer; ++o) {
                           const Real* src = g.data() + o * out_row + off;
                           Real* dst = pg[k]->data() + o * row;
                           for (std::size_t i = 0; i < row; ++i) dst[i] += src[i];
                         }
                       }
                       off += row;
                     }
                   });
}

Var tile_last(const Var& x, int n) {
  if (n < 1) throw ShapeError("tile_last: extent must be positive");
  const auto& in = x.value();
  Shape s = in.shape();
  s.push_back(n);
  Tensor out(s);
  for (std::size_t i = 0; i < in.size(); ++i) {
    std::fill_n(out.data() + i * n, n, in[i]);
  }
  return make_node(std::move(out), {x}, [n](const Tensor& g, Grads pg) {
    for (std::size_t i = 0; i < pg[0]->size(); ++i) {
      Real acc = 0;
      for (int j = 0; j < n; ++j) acc += g[i * n + j];
      (*pg[0])[i] += acc;
    }
  });
}

Var slice(const Var& x, int axis, int start, int len) {
  const Shape& s = x.shape();
  const int rank = static_cast<int>(s.size());
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank || len < 0) throw ShapeError("slice: bad axis or length");
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  for (int i = axis + 1; i < rank; ++i) inner *= s[i];
  const int extent = s[axis];
  Shape os = s;
  os[axis] = len;
  Tensor out(os);
  const auto& in = x.value();
  for (std::size_t o = 0; o < outer; ++o) {
    for (int k = 0; k < len; ++k) {
      int src = start + k;
      if (src < 0 || src >= extent) continue;
      std::copy_n(in.data() + (o * extent + src) * inner, inner,
                  out.data() + (o * len + k) * inner);
    }
  }
  return make_node(std::move(out), {x},
                   [outer, inner, extent, start, len](const Tensor& g, Grads pg) {
                     for (std::size_t o = 0; o < outer; ++o) {
                       for (int k = 0; k < len; ++k) {
                         int src = start + k;
                         if (src < 0 || src >= extent) continue;
                         const Real* gs = g.data() + (o * len + k) * inner;
                         Real* d = pg[0]->data() + (o * extent + src) * inner;
                         for (std::size_t i = 0; i < inner; ++i) d[i] += gs[i];
                       }
                     }
                   });
}

// ---------------------------------------------------------------------------
// Layers

Var conv2d(const Var& x, const Var& w, const Var& b, int stride_h, int stride_w, int pad_h,
           int pad_w) {
  check_rank(x, 3, "conv2d input");
  check_rank(w, 4, "conv2d weight");
  const int c = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const int o = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != c) {
    throw ShapeError("conv2d: input has " + std::to_string(c) + " channels, weight expects " +
                     std::to_string(w.dim(1)));
  }
  if (stride_h < 1 || stride_w < 1 || pad_h < 0 || pad_w < 0) {
    throw ShapeError("conv2d: bad stride/padding");
  }
  const int ho = (h + 2 * pad_h - kh) / stride_h + 1;
  const int wo = (wd + 2 * pad_w - kw) / stride_w + 1;
  if (h + 2 * pad_h < kh || wd + 2 * pad_w < kw || ho < 1 || wo < 1) {
    throw ShapeError("conv2d: input " + shape_str(x.shape()) + " smaller than kernel");
  }
  const bool has_bias = b.defined();
  if (has_bias && (b.value().rank() != 1 || b.dim(0) != o)) throw ShapeError("conv2d: bias shape");

  const int ckk = c * kh * kw;
  const std::size_t n = static_cast<std::size_t>(ho) * wo;
  const bool direct = kh == 1 && kw == 1 && stride_h == 1 && stride_w == 1 && pad_h == 0 &&
                      pad_w == 0;
  auto col = std::make_shared<RealBuffer>();
  const Real* col_ptr = x.value().data();
  if (!direct) {
    col->resize(static_cast<std::size_t>(ckk) * n);
    im2col(x.value().data(), c, h, wd, kh, kw, stride_h, stride_w, pad_h, pad_w, ho, wo,
           col->data());
    col_ptr = col->data();
  }

  Tensor out(Shape{o, ho, wo});
  MapR om(out.data(), o, static_cast<Eigen::Index>(n));
  CMapR wm(w.value().data(), o, ckk);
  CMapR cm(col_ptr, ckk, static_cast<Eigen::Index>(n));
  om.noalias() = wm * cm;
  if (has_bias) {
    const auto& bv = b.value();
    for (int i = 0; i < o; ++i) om.row(i).array() += bv[i];
  }

  std::vector<Var> inputs{x, w};
  if (has_bias) inputs.push_back(b);
  Tensor xin = direct ? x.value() : Tensor();
  Tensor wv = w.value();
  return make_node(
      std::move(out), std::move(inputs),
      [=](const Tensor& g, Grads pg) {
        CMapR gm(g.data(), o, static_cast<Eigen::Index>(n));
        const Real* cp = direct ? xin.data() : col->data();
        CMapR cmb(cp, ckk, static_cast<Eigen::Index>(n));
        if (pg[1]) {
          MapR dw(pg[1]->data(), o, ckk);
          dw.noalias() += gm * cmb.transpose();
        }
        if (has_bias && pg[2]) {
          for (int i = 0; i < o; ++i) (*pg[2])[i] += gm.row(i).sum();
        }
        if (pg[0]) {
          CMapR wmb(wv.data(), o, ckk);
          if (direct) {
            MapR dx(pg[0]->data(), ckk, static_cast<Eigen::Index>(n));
            dx.noalias() += wmb.transpose() * gm;
          } else {
            MatR dcol = wmb.transpose() * gm;
            col2im(dcol.data(), c, h, wd, kh, kw, stride_h, stride_w, pad_h, pad_w, ho, wo,
                   pg[0]->data());
          }
        }
      });
}

Var conv1d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  check_rank(x, 2, "conv1d input");
  check_rank(w, 3, "conv1d weight");
  Var x4 = reshape(x, Shape{x.dim(0), 1, x.dim(1)});
  Var w4 = reshape(w, Shape{w.dim(0), w.dim(1), 1, w.dim(2)});
  Var y = conv2d(x4, w4, b, 1, stride, 0, pad);
  return reshape(y, Shape{y.dim(0), y.dim(2)});
}

Var linear(const Var& x, const Var& w, const Var& b) {
  check_rank(x, 1, "linear input");
  check_rank(w, 2, "linear weight");
  const int out_dim = w.dim(0), in_dim = w.dim(1);
  if (x.dim(0) != in_dim) {
    throw ShapeError("linear: input dim " + std::to_string(x.dim(0)) + " vs weight " +
                     std::to_string(in_dim));
  }
  const bool has_bias = b.defined();
  if (has_bias && (b.value().rank() != 1 || b.dim(0) != out_dim)) {
    throw ShapeError("linear: bias shape");
  }
  Tensor out(Shape{out_dim});
  const auto& xv = x.value();
  const auto& wv = w.value();
  for (int i = 0; i < out_dim; ++i) {
    Real acc = has_bias ? b.value()[i] : Real(0);
    const Real* row = wv.data() + static_cast<std::size_t>(i) * in_dim;
    for (int j = 0; j < in_dim; ++j) acc += row[j] * xv[j];
    out[i] = acc;
  }
  std::vector<Var> inputs{x, w};
  if (has_bias) inputs.push_back(b);
  return make_node(std::move(out), std::move(inputs),
                   [xv, wv, out_dim, in_dim, has_bias](const Tensor& g, Grads pg) {
                     for (int i = 0; i < out_dim; ++i) {
                       const Real gi = g[i];
                       if (pg[1]) {
                         Real* row = pg[1]->data() + static_cast<std::size_t>(i) * in_dim;
                         for (int j = 0; j < in_dim; ++j) row[j] += gi * xv[j];
                       }
                       if (pg[0]) {
                         const Real* wrow = wv.data() + static_cast<std::size_t>(i) * in_dim;
                         for (int j = 0; j < in_dim; ++j) (*pg[0])[j] += gi * wrow[j];
                       }
                       if (has_bias && pg[2]) (*pg[2])[i] += gi;
                     }
                   });
}

Var avg_pool2d(const Var& x, int kh, int kw) {
  check_rank(x, 3, "avg_pool2d");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (kh < 1 || kw < 1 || h % kh != 0 || w % kw != 0) {
    throw ShapeError("avg_pool2d: window " + std::to_string(kh) + "x" + std::to_string(kw) +
                     " does not tile " + shape_str(x.shape()));
  }
  const int ho = h / kh, wo = w / kw;
  const Real inv = Real(1) / static_cast<Real>(kh * kw);
  Tensor out(Shape{c, ho, wo});
  const auto& in = x.value();
  for (int ci = 0; ci < c; ++ci)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) out.at(ci, i / kh, j / kw) += in.at(ci, i, j) * inv;
  return make_node(std::move(out), {x}, [=](const Tensor& g, Grads pg) {
    for (int ci = 0; ci < c; ++ci)
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) pg[0]->at(ci, i, j) += g.at(ci, i / kh, j / kw) * inv;
  });
}

Var upsample_nearest(const Var& x, int v_factor, int h_factor) {
  check_rank(x, 3, "upsample_nearest");
  if (v_factor < 1 || h_factor < 1) throw ShapeError("upsample_nearest: factors must be >= 1");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int ho = h * v_factor, wo = w * h_factor;
  Tensor out(Shape{c, ho, wo});
  const auto& in = x.value();
  for (int ci = 0; ci < c; ++ci)
    for (int i = 0; i < ho; ++i)
      for (int j = 0; j < wo; ++j) out.at(ci, i, j) = in.at(ci, i / v_factor, j / h_factor);
  return make_node(std::move(out), {x}, [=](const Tensor& g, Grads pg) {
    for (int ci = 0; ci < c; ++ci)
      for (int i = 0; i < ho; ++i)
        for (int j = 0; j < wo; ++j) pg[0]->at(ci, i / v_factor, j / h_factor) += g.at(ci, i, j);
  });
}

namespace {

// Separable 1-2-1 / 4 along rows then columns, zero padding.
void blur_apply(const Tensor& in, Tensor& out) {
  const int c = in.dim(0), h = in.dim(1), w = in.dim(2);
  Tensor tmp(in.shape());
  for (int ci = 0; ci < c; ++ci)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        Real v = 2 * in.at(ci, i, j);
        if (j > 0) v += in.at(ci, i, j - 1);
        if (j + 1 < w) v += in.at(ci, i, j + 1);
        tmp.at(ci, i, j) = v * Real(0.25);
      }
  for (int ci = 0; ci < c; ++ci)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        Real v = 2 * tmp.at(ci, i, j);
        if (i > 0) v += tmp.at(ci, i - 1, j);
        if (i + 1 < h) v += tmp.at(ci, i + 1, j);
        out.at(ci, i, j) += v * Real(0.25);
      }
}

}  // namespace

Var blur2d(const Var& x) {
  check_rank(x, 3, "blur2d");
  Tensor out(x.shape());
  blur_apply(x.value(), out);
  // The kernel is symmetric, so the adjoint is the same filter.
  return make_node(std::move(out), {x}, [](const Tensor& g, Grads pg) { blur_apply(g, *pg[0]); });
}

Var adain(const Var& x, const Var& scale_v, const Var& shift_v, Real eps) {
  if (x.value().rank() < 2) throw ShapeError("adain: input needs a channel axis");
  if (!(eps > 0)) throw ShapeError("adain: eps must be positive");
  const int c = x.dim(0);
  if (scale_v.value().size() != static_cast<std::size_t>(c) ||
      shift_v.value().size() != static_cast<std::size_t>(c)) {
    throw ShapeError("adain: " + std::to_string(c) + " channels but scale/shift sizes " +
                     std::to_string(scale_v.value().size()) + "/" +
                     std::to_string(shift_v.value().size()));
  }
  const std::size_t n = x.value().size() / static_cast<std::size_t>(c);
  const auto& in = x.value();
  Tensor xhat(in.shape());
  std::vector<Real> inv_std(c);
  Tensor out(in.shape());
  for (int ci = 0; ci < c; ++ci) {
    const Real* src = in.data() + ci * n;
    double mu = 0;
    for (std::size_t i = 0; i < n; ++i) mu += src[i];
    mu /= static_cast<double>(n);
    double var = 0;
    for (std::size_t i = 0; i < n; ++i) var += (src[i] - mu) * (src[i] - mu);
    var /= static_cast<double>(n);
    const Real is = static_cast<Real>(1.0 / std::sqrt(var + eps));
    inv_std[ci] = is;
    const Real s = scale_v.value()[ci], t = shift_v.value()[ci];
    for (std::size_t i = 0; i < n; ++i) {
      Real xh = (src[i] - static_cast<Real>(mu)) * is;
      xhat[ci * n + i] = xh;
      out[ci * n + i] = t + s * xh;
    }
  }
  Tensor sv = scale_v.value();
  return make_node(std::move(out), {x, scale_v, shift_v},
                   [xhat, inv_std, sv, c, n](const Tensor& g, Grads pg) {
                     for (int ci = 0; ci < c; ++ci) {
                       const Real* gc = g.data() + ci * n;
                       const Real* xh = xhat.data() + ci * n;
                       double sg = 0, sgx = 0;
                       for (std::size_t i = 0; i < n; ++i) {
                         sg += gc[i];
                         sgx += gc[i] * xh[i];
                       }
                       if (pg[1]) (*pg[1])[ci] += static_cast<Real>(sgx);
                       if (pg[2]) (*pg[2])[ci] += static_cast<Real>(sg);
                       if (pg[0]) {
                         const Real k = sv[ci] * inv_std[ci];
                         const Real mg = static_cast<Real>(sg / static_cast<double>(n));
                         const Real mgx = static_cast<Real>(sgx / static_cast<double>(n));
                         Real* dx = pg[0]->data() + ci * n;
                         for (std::size_t i = 0; i < n; ++i) {
                           dx[i] += k * (gc[i] - mg - xh[i] * mgx);
                         }
                       }
                     }
                   });
}

Var additive_noise(const Var& x, const Var& strength, NoiseSource& noise) {
  if (x.value().rank() < 2) throw ShapeError("additive_noise: input needs a channel axis");
  const int c = x.dim(0);
  if (strength.value().size() != static_cast<std::size_t>(c)) {
    throw ShapeError("additive_noise: strength must have one entry per channel");
  }
  const std::size_t n = x.value().size() / static_cast<std::size_t>(c);
  Tensor draw(x.shape());
  noise.fill_normal(draw);
  Tensor out = x.value();
  for (int ci = 0; ci < c; ++ci) {
    const Real s = strength.value()[ci];
    for (std::size_t i = 0; i < n; ++i) out[ci * n + i] += s * draw[ci * n + i];
  }
  return make_node(std::move(out), {x, strength}, [draw, c, n](const Tensor& g, Grads pg) {
    if (pg[0]) *pg[0] += g;
    if (pg[1]) {
      for (int ci = 0; ci < c; ++ci) {
        Real acc = 0;
        for (std::size_t i = 0; i < n; ++i) acc += g[ci * n + i] * draw[ci * n + i];
        (*pg[1])[ci] += acc;
      }
    }
  });
}

Var global_avg_pool(const Var& x) {
  if (x.value().rank() < 2) throw ShapeError("global_avg_pool: input needs a channel axis");
  const int c = x.dim(0);
  const std::size_t n = x.value().size() / static_cast<std::size_t>(c);
  Tensor out(Shape{c});
  for (int ci = 0; ci < c; ++ci) {
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += x.value()[ci * n + i];
    out[ci] = static_cast<Real>(acc / static_cast<double>(n));
  }
  return make_node(std::move(out), {x}, [c, n](const Tensor& g, Grads pg) {
    for (int ci = 0; ci < c; ++ci) {
      const Real v = g[ci] / static_cast<Real>(n);
      for (std::size_t i = 0; i < n; ++i) (*pg[0])[ci * n + i] += v;
    }
  });
}

namespace {

Tensor log_softmax_value(const Tensor& in) {
  const int cols = in.dim(-1);
  const std::size_t rows = in.size() / static_cast<std::size_t>(cols);
  Tensor out(in.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* src = in.data() + r * cols;
    Real m = *std::max_element(src, src + cols);
    double acc = 0;
    for (int j = 0; j < cols; ++j) acc += std::exp(static_cast<double>(src[j] - m));
    const Real lse = m + static_cast<Real>(std::log(acc));
    for (int j = 0; j < cols; ++j) out[r * cols + j] = src[j] - lse;
  }
  return out;
}

}  // namespace

Var softmax(const Var& x) {
  Tensor y = log_softmax_value(x.value());
  for (auto& v : y.values()) v = std::exp(v);
  const int cols = x.dim(-1);
  Tensor yc = y;
  return make_node(std::move(y), {x}, [yc, cols](const Tensor& g, Grads pg) {
    const std::size_t rows = g.size() / static_cast<std::size_t>(cols);
    for (std::size_t r = 0; r < rows; ++r) {
      const Real* yr = yc.data() + r * cols;
      const Real* gr = g.data() + r * cols;
      Real dot = 0;
      for (int j = 0; j < cols; ++j) dot += gr[j] * yr[j];
      for (int j = 0; j < cols; ++j) (*pg[0])[r * cols + j] += yr[j] * (gr[j] - dot);
    }
  });
}

Var log_softmax(const Var& x) {
  Tensor y = log_softmax_value(x.value());
  const int cols = x.dim(-1);
  Tensor yc = y;
  return make_node(std::move(y), {x}, [yc, cols](const Tensor& g, Grads pg) {
    const std::size_t rows = g.size() / static_cast<std::size_t>(cols);
    for (std::size_t r = 0; r < rows; ++r) {
      const Real* yr = yc.data() + r * cols;
      const Real* gr = g.data() + r * cols;
      Real gs = 0;
      for (int j = 0; j < cols; ++j) gs += gr[j];
      for (int j = 0; j < cols; ++j) (*pg[0])[r * cols + j] += gr[j] - std::exp(yr[j]) * gs;
    }
  });
}

}  // namespace hwgen

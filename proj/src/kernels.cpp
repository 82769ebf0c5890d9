#include "segtrus/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "segtrus/errors.hpp"

namespace segtrus {

bool all_finite(const Tensor4& t) {
  for (double v : t.data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

BnState BnState::identity(std::size_t channels) {
  BnState s;
  s.gamma.assign(channels, 1.0);
  s.beta.assign(channels, 0.0);
  s.running_mean.assign(channels, 0.0);
  s.running_var.assign(channels, 1.0);
  return s;
}

namespace {

std::string dims_str(const std::array<std::size_t, 4>& d) {
  return "(" + std::to_string(d[0]) + "," + std::to_string(d[1]) + "," +
         std::to_string(d[2]) + "," + std::to_string(d[3]) + ")";
}

// Accumulates one 3x3 kernel pass of plane X into plane O (both HxW).
void conv_plane_accum(const double* X, double* O, const double* K,
                      std::size_t H, std::size_t W) {
  for (std::size_t h = 0; h < H; ++h) {
    const std::size_t kh0 = (h == 0) ? 1 : 0;
    const std::size_t kh1 = (h + 1 == H) ? 1 : 2;
    double* orow = O + h * W;
    for (std::size_t kh = kh0; kh <= kh1; ++kh) {
      const double* xrow = X + (h + kh - 1) * W;
      const double k0 = K[kh * 3 + 0];
      const double k1 = K[kh * 3 + 1];
      const double k2 = K[kh * 3 + 2];
      if (W == 1) {
        orow[0] += k1 * xrow[0];
        continue;
      }
      orow[0] += k1 * xrow[0] + k2 * xrow[1];
      for (std::size_t w = 1; w + 1 < W; ++w) {
        orow[w] += k0 * xrow[w - 1] + k1 * xrow[w] + k2 * xrow[w + 1];
      }
      orow[W - 1] += k0 * xrow[W - 2] + k1 * xrow[W - 1];
    }
  }
}

}  // namespace

Tensor4 conv2d_forward(const Tensor4& x, const Tensor4& weights,
                       std::span<const double> bias) {
  const std::size_t N = x.n(), Cin = x.c(), H = x.h(), W = x.w();
  const std::size_t Cout = weights.n();
  if (weights.c() != Cin || weights.h() != 3 || weights.w() != 3) {
    throw ShapeError("conv2d: weights " + dims_str(weights.dims) +
                     " incompatible with input " + dims_str(x.dims));
  }
  if (H < 1 || W < 1) {
    throw ShapeError("conv2d: empty spatial extent " + dims_str(x.dims));
  }
  if (!bias.empty() && bias.size() != Cout) {
    throw ShapeError("conv2d: bias length " + std::to_string(bias.size()) +
                     " != C_out " + std::to_string(Cout));
  }
  Tensor4 out(N, Cout, H, W);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t co = 0; co < Cout; ++co) {
      double* O = out.plane(n, co);
      if (!bias.empty()) {
        std::fill(O, O + H * W, bias[co]);
      }
      for (std::size_t ci = 0; ci < Cin; ++ci) {
        conv_plane_accum(x.plane(n, ci), O, weights.plane(co, ci), H, W);
      }
    }
  }
  return out;
}

ConvGrads conv2d_backward(const Tensor4& x, const Tensor4& weights,
                          const Tensor4& grad_out) {
  const std::size_t N = x.n(), Cin = x.c(), H = x.h(), W = x.w();
  const std::size_t Cout = weights.n();
  if (weights.c() != Cin || weights.h() != 3 || weights.w() != 3) {
    throw ShapeError("conv2d_backward: weights " + dims_str(weights.dims) +
                     " incompatible with input " + dims_str(x.dims));
  }
  if (grad_out.dims != std::array<std::size_t, 4>{N, Cout, H, W}) {
    throw ShapeError("conv2d_backward: grad_out " + dims_str(grad_out.dims) +
                     " does not match forward output (" + std::to_string(N) +
                     "," + std::to_string(Cout) + "," + std::to_string(H) +
                     "," + std::to_string(W) + ")");
  }

  ConvGrads g;

  // grad_x is the cross-correlation of grad_out with the kernel flipped
  // 180 degrees and its channel axes swapped.
  Tensor4 wt(Cin, Cout, 3, 3);
  for (std::size_t co = 0; co < Cout; ++co) {
    for (std::size_t ci = 0; ci < Cin; ++ci) {
      const double* src = weights.plane(co, ci);
      double* dst = wt.plane(ci, co);
      for (std::size_t k = 0; k < 9; ++k) dst[k] = src[8 - k];
    }
  }
  g.grad_x = conv2d_forward(grad_out, wt);

  // grad_w[co,ci,kh,kw] = sum over (n,h,w) of grad_out * shifted x.
  g.grad_w = Tensor4(Cout, Cin, 3, 3);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t co = 0; co < Cout; ++co) {
      const double* G = grad_out.plane(n, co);
      for (std::size_t ci = 0; ci < Cin; ++ci) {
        const double* X = x.plane(n, ci);
        double* K = g.grad_w.plane(co, ci);
        for (std::size_t kh = 0; kh < 3; ++kh) {
          for (std::size_t kw = 0; kw < 3; ++kw) {
            // output rows h where the tap (kh,kw) lands inside the input
            const std::size_t h0 = (kh == 0) ? 1 : 0;
            const std::size_t h1 = (kh == 2) ? H - 1 : H;
            const std::size_t w0 = (kw == 0) ? 1 : 0;
            const std::size_t w1 = (kw == 2) ? W - 1 : W;
            double acc = 0.0;
            for (std::size_t h = h0; h < h1; ++h) {
              const double* grow = G + h * W;
              const double* xrow = X + (h + kh - 1) * W;
              for (std::size_t w = w0; w < w1; ++w) {
                acc += grow[w] * xrow[w + kw - 1];  // w + kw >= 1 in range
              }
            }
            K[kh * 3 + kw] += acc;
          }
        }
      }
    }
  }

  g.grad_b.assign(Cout, 0.0);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t co = 0; co < Cout; ++co) {
      const double* G = grad_out.plane(n, co);
      double acc = 0.0;
      for (std::size_t i = 0; i < H * W; ++i) acc += G[i];
      g.grad_b[co] += acc;
    }
  }
  return g;
}

Tensor4 batchnorm_forward(const Tensor4& x, BnState& state, bool training) {
  const std::size_t N = x.n(), C = x.c(), H = x.h(), W = x.w();
  if (state.channels() != C) {
    throw ShapeError("batchnorm: state has " +
                     std::to_string(state.channels()) + " channels, input " +
                     dims_str(x.dims));
  }
  const std::size_t m = N * H * W;
  if (training && m < 2) {
    throw ShapeError("batchnorm: training mode needs N*H*W >= 2, got " +
                     std::to_string(m));
  }
  Tensor4 out(N, C, H, W);
  for (std::size_t c = 0; c < C; ++c) {
    double mean, var;
    if (training) {
      double sum = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const double* X = x.plane(n, c);
        for (std::size_t i = 0; i < H * W; ++i) sum += X[i];
      }
      mean = sum / static_cast<double>(m);
      double sq = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const double* X = x.plane(n, c);
        for (std::size_t i = 0; i < H * W; ++i) {
          const double d = X[i] - mean;
          sq += d * d;
        }
      }
      var = sq / static_cast<double>(m);  // biased
      state.running_mean[c] =
          (1.0 - state.momentum_bn) * state.running_mean[c] +
          state.momentum_bn * mean;
      state.running_var[c] = (1.0 - state.momentum_bn) * state.running_var[c] +
                             state.momentum_bn * var;
    } else {
      mean = state.running_mean[c];
      var = state.running_var[c];
    }
    const double istd = 1.0 / std::sqrt(var + state.eps);
    const double scale = state.gamma[c] * istd;
    const double shift = state.beta[c] - scale * mean;
    for (std::size_t n = 0; n < N; ++n) {
      const double* X = x.plane(n, c);
      double* O = out.plane(n, c);
      for (std::size_t i = 0; i < H * W; ++i) O[i] = scale * X[i] + shift;
    }
  }
  return out;
}

BnGrads batchnorm_backward(const Tensor4& x, const BnState& state,
                           const Tensor4& grad_out) {
  const std::size_t N = x.n(), C = x.c(), H = x.h(), W = x.w();
  if (state.channels() != C) {
    throw ShapeError("batchnorm_backward: state has " +
                     std::to_string(state.channels()) + " channels, input " +
                     dims_str(x.dims));
  }
  if (!grad_out.same_dims(x)) {
    throw ShapeError("batchnorm_backward: grad_out " +
                     dims_str(grad_out.dims) + " != input " +
                     dims_str(x.dims));
  }
  const double m = static_cast<double>(N * H * W);
  BnGrads g;
  g.grad_x = Tensor4(N, C, H, W);
  g.grad_gamma.assign(C, 0.0);
  g.grad_beta.assign(C, 0.0);

  for (std::size_t c = 0; c < C; ++c) {
    // recompute batch statistics; backward always refers to training mode
    double sum = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      const double* X = x.plane(n, c);
      for (std::size_t i = 0; i < H * W; ++i) sum += X[i];
    }
    const double mean = sum / m;
    double sq = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      const double* X = x.plane(n, c);
      for (std::size_t i = 0; i < H * W; ++i) {
        const double d = X[i] - mean;
        sq += d * d;
      }
    }
    const double var = sq / m;
    const double istd = 1.0 / std::sqrt(var + state.eps);

    double sum_g = 0.0;       // sum of grad_out
    double sum_g_xhat = 0.0;  // sum of grad_out * xhat
    for (std::size_t n = 0; n < N; ++n) {
      const double* X = x.plane(n, c);
      const double* G = grad_out.plane(n, c);
      for (std::size_t i = 0; i < H * W; ++i) {
        const double xhat = (X[i] - mean) * istd;
        sum_g += G[i];
        sum_g_xhat += G[i] * xhat;
      }
    }
    g.grad_beta[c] = sum_g;
    g.grad_gamma[c] = sum_g_xhat;

    const double gamma = state.gamma[c];
    for (std::size_t n = 0; n < N; ++n) {
      const double* X = x.plane(n, c);
      const double* G = grad_out.plane(n, c);
      double* O = g.grad_x.plane(n, c);
      for (std::size_t i = 0; i < H * W; ++i) {
        const double xhat = (X[i] - mean) * istd;
        O[i] = gamma * istd *
               (G[i] - sum_g / m - xhat * sum_g_xhat / m);
      }
    }
  }
  return g;
}

Tensor4 relu(const Tensor4& x) {
  Tensor4 out = x;
  for (double& v : out.data) {
    if (v <= 0.0) v = 0.0;
  }
  return out;
}

Tensor4 relu_backward(const Tensor4& x, const Tensor4& grad_out) {
  if (!grad_out.same_dims(x)) {
    throw ShapeError("relu_backward: grad_out " + dims_str(grad_out.dims) +
                     " != input " + dims_str(x.dims));
  }
  Tensor4 out = grad_out;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (x.data[i] <= 0.0) out.data[i] = 0.0;
  }
  return out;
}

Tensor4 maxpool2d(const Tensor4& x, IndexMap4* indices) {
  const std::size_t N = x.n(), C = x.c(), H = x.h(), W = x.w();
  if (H % 2 != 0 || W % 2 != 0) {
    throw ShapeError("maxpool2d: H and W must be even, got " +
                     dims_str(x.dims));
  }
  const std::size_t Ho = H / 2, Wo = W / 2;
  Tensor4 out(N, C, Ho, Wo);
  if (indices) *indices = IndexMap4(N, C, Ho, Wo);
  std::size_t cell = 0;
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const double* X = x.plane(n, c);
      double* O = out.plane(n, c);
      for (std::size_t ho = 0; ho < Ho; ++ho) {
        for (std::size_t wo = 0; wo < Wo; ++wo) {
          const std::size_t base = (2 * ho) * W + 2 * wo;
          // row-major scan; strict > keeps the first cell on ties
          double best = X[base];
          std::size_t best_off = base;
          if (X[base + 1] > best) { best = X[base + 1]; best_off = base + 1; }
          if (X[base + W] > best) { best = X[base + W]; best_off = base + W; }
          if (X[base + W + 1] > best) {
            best = X[base + W + 1];
            best_off = base + W + 1;
          }
          O[ho * Wo + wo] = best;
          if (indices) {
            indices->data[cell] = static_cast<std::uint32_t>(best_off);
          }
          ++cell;
        }
      }
    }
  }
  return out;
}

PoolResult maxpool2d(const Tensor4& x) {
  PoolResult r;
  r.values = maxpool2d(x, &r.indices);
  return r;
}

namespace {

// Throws if a recorded offset falls outside its own 2x2 source window.
void check_window(std::uint32_t off, std::size_t ho, std::size_t wo,
                  std::size_t out_w) {
  const std::size_t row = off / out_w;
  const std::size_t col = off % out_w;
  if ((row != 2 * ho && row != 2 * ho + 1) ||
      (col != 2 * wo && col != 2 * wo + 1)) {
    throw DataError("maxunpool2d: corrupt index map, offset " +
                    std::to_string(off) + " outside window (" +
                    std::to_string(ho) + "," + std::to_string(wo) + ")");
  }
}

}  // namespace

Tensor4 maxunpool2d(const Tensor4& y, const IndexMap4& idx, std::size_t out_h,
                    std::size_t out_w) {
  const std::size_t N = y.n(), C = y.c(), H = y.h(), W = y.w();
  if (idx.dims != y.dims) {
    throw ShapeError("maxunpool2d: index map dims do not match input");
  }
  if (out_h != 2 * H || out_w != 2 * W) {
    throw ShapeError("maxunpool2d: output must be exactly 2x the input, got " +
                     std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  Tensor4 out(N, C, out_h, out_w);
  std::size_t cell = 0;
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const double* Y = y.plane(n, c);
      double* O = out.plane(n, c);
      for (std::size_t ho = 0; ho < H; ++ho) {
        for (std::size_t wo = 0; wo < W; ++wo) {
          const std::uint32_t off = idx.data[cell];
          check_window(off, ho, wo, out_w);
          O[off] = Y[ho * W + wo];
          ++cell;
        }
      }
    }
  }
  return out;
}

Tensor4 maxunpool2d_backward(const Tensor4& grad_out, const IndexMap4& idx) {
  const std::size_t N = idx.dims[0], C = idx.dims[1], H = idx.dims[2],
                    W = idx.dims[3];
  if (grad_out.dims != std::array<std::size_t, 4>{N, C, 2 * H, 2 * W}) {
    throw ShapeError("maxunpool2d_backward: grad_out dims do not match");
  }
  Tensor4 out(N, C, H, W);
  std::size_t cell = 0;
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const double* G = grad_out.plane(n, c);
      double* O = out.plane(n, c);
      for (std::size_t ho = 0; ho < H; ++ho) {
        for (std::size_t wo = 0; wo < W; ++wo) {
          const std::uint32_t off = idx.data[cell];
          check_window(off, ho, wo, 2 * W);
          O[ho * W + wo] = G[off];
          ++cell;
        }
      }
    }
  }
  return out;
}

Tensor4 residual_add(const Tensor4& a, const Tensor4& b) {
  if (!a.same_dims(b)) {
    throw ShapeError("residual_add: dims " + dims_str(a.dims) + " != " +
                     dims_str(b.dims));
  }
  Tensor4 out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

Tensor4 softmax_pixelwise(const Tensor4& x) {
  const std::size_t N = x.n(), C = x.c(), H = x.h(), W = x.w();
  if (C < 2) {
    throw ShapeError("softmax_pixelwise: needs >= 2 channels, got " +
                     dims_str(x.dims));
  }
  Tensor4 out(N, C, H, W);
  const std::size_t plane = H * W;
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t i = 0; i < plane; ++i) {
      double mx = x.plane(n, 0)[i];
      for (std::size_t c = 1; c < C; ++c) {
        mx = std::max(mx, x.plane(n, c)[i]);
      }
      double sum = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        const double e = std::exp(x.plane(n, c)[i] - mx);
        out.plane(n, c)[i] = e;
        sum += e;
      }
      for (std::size_t c = 0; c < C; ++c) {
        out.plane(n, c)[i] /= sum;
      }
    }
  }
  return out;
}

Tensor4 softmax_pixelwise_backward(const Tensor4& probs,
                                   const Tensor4& grad_probs) {
  if (!probs.same_dims(grad_probs)) {
    throw ShapeError("softmax_pixelwise_backward: dims mismatch");
  }
  const std::size_t N = probs.n(), C = probs.c(), H = probs.h(),
                    W = probs.w();
  Tensor4 out(N, C, H, W);
  const std::size_t plane = H * W;
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t i = 0; i < plane; ++i) {
      double dot = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        dot += probs.plane(n, c)[i] * grad_probs.plane(n, c)[i];
      }
      for (std::size_t c = 0; c < C; ++c) {
        out.plane(n, c)[i] =
            probs.plane(n, c)[i] * (grad_probs.plane(n, c)[i] - dot);
      }
    }
  }
  return out;
}

}  // namespace segtrus

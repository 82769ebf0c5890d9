#ifndef SEGTRUS_KERNELS_HPP_
#define SEGTRUS_KERNELS_HPP_

#include <span>
#include <vector>

#include "segtrus/tensor.hpp"

namespace segtrus {

// Per-channel batch normalization parameters and running statistics.
// Training-mode forward mutates running_mean/running_var; nothing else does.
struct BnState {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double eps = 1e-5;
  double momentum_bn = 0.1;  // running-stat update rate

  static BnState identity(std::size_t channels);
  std::size_t channels() const { return gamma.size(); }
};

struct ConvGrads {
  Tensor4 grad_x;
  Tensor4 grad_w;
  std::vector<double> grad_b;  // per-C_out sum of grad_out
};

struct BnGrads {
  Tensor4 grad_x;
  std::vector<double> grad_gamma;
  std::vector<double> grad_beta;
};

struct PoolResult {
  Tensor4 values;
  IndexMap4 indices;
};

// 3x3 cross-correlation, stride 1, zero padding 1 ("same" output size).
// weights dims: (C_out, C_in, 3, 3); bias empty or length C_out.
Tensor4 conv2d_forward(const Tensor4& x, const Tensor4& weights,
                       std::span<const double> bias = {});
ConvGrads conv2d_backward(const Tensor4& x, const Tensor4& weights,
                          const Tensor4& grad_out);

Tensor4 batchnorm_forward(const Tensor4& x, BnState& state, bool training);
BnGrads batchnorm_backward(const Tensor4& x, const BnState& state,
                           const Tensor4& grad_out);

Tensor4 relu(const Tensor4& x);
// Subgradient at 0 is 0: grad passes only where x > 0.
Tensor4 relu_backward(const Tensor4& x, const Tensor4& grad_out);

// 2x2 stride-2 max pooling; ties break to the first cell in row-major order.
Tensor4 maxpool2d(const Tensor4& x, IndexMap4* indices);
PoolResult maxpool2d(const Tensor4& x);

// Scatter pooled values back to their recorded offsets, zeros elsewhere.
Tensor4 maxunpool2d(const Tensor4& y, const IndexMap4& idx, std::size_t out_h,
                    std::size_t out_w);
// Gradient of maxunpool2d w.r.t. y: gather grad_out at the recorded offsets.
Tensor4 maxunpool2d_backward(const Tensor4& grad_out, const IndexMap4& idx);

Tensor4 residual_add(const Tensor4& a, const Tensor4& b);

// Per-pixel softmax over the channel axis, max-subtracted for stability.
Tensor4 softmax_pixelwise(const Tensor4& x);
Tensor4 softmax_pixelwise_backward(const Tensor4& probs,
                                   const Tensor4& grad_probs);

}  // namespace segtrus

#endif  // SEGTRUS_KERNELS_HPP_

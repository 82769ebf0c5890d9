#ifndef SEGTRUS_LOSS_HPP_
#define SEGTRUS_LOSS_HPP_

#include <array>

#include "segtrus/tensor.hpp"

namespace segtrus {

// Per-class loss weights, ordered (background, prostate), derived per batch.
// A weight of 0 marks a class absent from the batch.
struct ClassWeights {
  std::array<double, 2> w{0.0, 0.0};
};

// Probabilities below/above this are clamped before logs.
inline constexpr double kProbClamp = 1e-7;

// weight[c] = 1 / (pixel count of class c in the batch), 0 if absent.
ClassWeights class_weights(const Tensor4& mask_batch);

// Class-weighted binary cross entropy over the prostate-channel probability:
// L = -(1/n) sum_i w_i [Y_i ln P_i + (1 - Y_i) ln(1 - P_i)].
double weighted_ce(const Tensor4& probs, const Tensor4& mask,
                   const ClassWeights& weights);

// dL/dP on the prostate channel, mirrored with opposite sign on the
// background channel.
Tensor4 weighted_ce_grad(const Tensor4& probs, const Tensor4& mask,
                         const ClassWeights& weights);

// Form to feed into softmax_pixelwise_backward. The mirrored pair in
// weighted_ce_grad carries the full pixel derivative on both coupled
// channels, so the softmax Jacobian sees it twice; this is the half-weight
// split whose composition is the exact logits gradient (1/n) w (p - y).
Tensor4 weighted_ce_grad_for_backprop(const Tensor4& probs,
                                      const Tensor4& mask,
                                      const ClassWeights& weights);

}  // namespace segtrus

#endif  // SEGTRUS_LOSS_HPP_

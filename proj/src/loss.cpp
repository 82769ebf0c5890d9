#include "segtrus/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "segtrus/errors.hpp"

namespace segtrus {

namespace {

void check_mask_binary(const Tensor4& mask) {
  for (double v : mask.data) {
    if (v != 0.0 && v != 1.0) {
      throw DataError("mask is not binary: found value " + std::to_string(v));
    }
  }
}

void check_pair(const Tensor4& probs, const Tensor4& mask) {
  if (probs.c() != 2) {
    throw ShapeError("loss: probabilities must have 2 channels, got " +
                     std::to_string(probs.c()));
  }
  if (mask.n() != probs.n() || mask.c() != 1 || mask.h() != probs.h() ||
      mask.w() != probs.w()) {
    throw ShapeError("loss: mask dims do not match probabilities");
  }
  check_mask_binary(mask);
  const std::size_t plane = probs.h() * probs.w();
  for (std::size_t n = 0; n < probs.n(); ++n) {
    const double* p0 = probs.plane(n, 0);
    const double* p1 = probs.plane(n, 1);
    for (std::size_t i = 0; i < plane; ++i) {
      if (std::abs(p0[i] + p1[i] - 1.0) > 1e-6) {
        throw DataError("loss: probabilities not normalized (channel sum " +
                        std::to_string(p0[i] + p1[i]) + ")");
      }
    }
  }
}

double clamp_p(double p) {
  return std::clamp(p, kProbClamp, 1.0 - kProbClamp);
}

}  // namespace

ClassWeights class_weights(const Tensor4& mask_batch) {
  check_mask_binary(mask_batch);
  std::size_t count[2] = {0, 0};
  for (double v : mask_batch.data) {
    ++count[v == 1.0 ? 1 : 0];
  }
  ClassWeights cw;
  for (int c = 0; c < 2; ++c) {
    cw.w[c] = count[c] > 0 ? 1.0 / static_cast<double>(count[c]) : 0.0;
  }
  return cw;
}

double weighted_ce(const Tensor4& probs, const Tensor4& mask,
                   const ClassWeights& weights) {
  check_pair(probs, mask);
  const std::size_t plane = probs.h() * probs.w();
  const double n_pixels = static_cast<double>(mask.size());
  double acc = 0.0;
  for (std::size_t n = 0; n < probs.n(); ++n) {
    const double* p1 = probs.plane(n, 1);
    const double* y = mask.plane(n, 0);
    for (std::size_t i = 0; i < plane; ++i) {
      const double p = clamp_p(p1[i]);
      const double w = weights.w[y[i] == 1.0 ? 1 : 0];
      acc += w * (y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p));
    }
  }
  return -acc / n_pixels;
}

Tensor4 weighted_ce_grad(const Tensor4& probs, const Tensor4& mask,
                         const ClassWeights& weights) {
  check_pair(probs, mask);
  const std::size_t plane = probs.h() * probs.w();
  const double n_pixels = static_cast<double>(mask.size());
  Tensor4 g(probs.n(), 2, probs.h(), probs.w());
  for (std::size_t n = 0; n < probs.n(); ++n) {
    const double* p1 = probs.plane(n, 1);
    const double* y = mask.plane(n, 0);
    double* g0 = g.plane(n, 0);
    double* g1 = g.plane(n, 1);
    for (std::size_t i = 0; i < plane; ++i) {
      const double p = clamp_p(p1[i]);
      const double w = weights.w[y[i] == 1.0 ? 1 : 0];
      const double gp =
          -(w / n_pixels) * (y[i] / p - (1.0 - y[i]) / (1.0 - p));
      g1[i] = gp;
      g0[i] = -gp;
    }
  }
  return g;
}

Tensor4 weighted_ce_grad_for_backprop(const Tensor4& probs,
                                      const Tensor4& mask,
                                      const ClassWeights& weights) {
  Tensor4 g = weighted_ce_grad(probs, mask, weights);
  for (double& v : g.data) v *= 0.5;
  return g;
}

}  // namespace segtrus

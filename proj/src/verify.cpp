#include "segtrus/verify.hpp"

#include <cmath>

#include "segtrus/gradcheck.hpp"
#include "segtrus/kernels.hpp"
#include "segtrus/loss.hpp"
#include "segtrus/model.hpp"
#include "segtrus/rng.hpp"

namespace segtrus {

namespace {

Tensor4 random_tensor(std::size_t n, std::size_t c, std::size_t h,
                      std::size_t w, Rng& rng, double lo = -1.0,
                      double hi = 1.0) {
  Tensor4 t(n, c, h, w);
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

// keep values away from the ReLU kink
Tensor4 random_away_from_zero(std::size_t n, std::size_t c, std::size_t h,
                              std::size_t w, Rng& rng, double margin) {
  Tensor4 t = random_tensor(n, c, h, w, rng);
  for (double& v : t.data) {
    if (std::abs(v) < margin) v = v < 0.0 ? v - 2.0 * margin : v + 2.0 * margin;
  }
  return t;
}

double weighted_sum(const Tensor4& t, const Tensor4& cot) {
  double acc = 0.0;
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    acc += t.data[i] * cot.data[i];
  }
  return acc;
}

BatteryCheck from_report(const std::string& name, const GradCheckReport& rep) {
  BatteryCheck c;
  c.name = name;
  c.tolerance = rep.tolerance;
  for (const auto& a : rep.args) {
    c.max_rel_err = std::max(c.max_rel_err, a.max_rel_err);
  }
  c.pass = rep.pass;
  return c;
}

BatteryCheck check_residual_add(Rng& rng) {
  const Tensor4 a = random_tensor(1, 2, 4, 4, rng);
  const Tensor4 b = random_tensor(1, 2, 4, 4, rng);
  const Tensor4 cot = random_tensor(1, 2, 4, 4, rng);
  auto f = [&cot](const std::vector<Tensor4>& in) {
    return weighted_sum(residual_add(in[0], in[1]), cot);
  };
  // backward routes cot unchanged to both inputs
  const auto rep = gradcheck(f, {a, b}, {cot, cot}, {"a", "b"}, 1e-10);
  return from_report("residual_add", rep);
}

BatteryCheck check_conv2d(Rng& rng, double tol) {
  const Tensor4 x = random_tensor(1, 2, 4, 4, rng);
  const Tensor4 w = random_tensor(3, 2, 3, 3, rng);
  const Tensor4 b = random_tensor(1, 3, 1, 1, rng);
  const Tensor4 cot = random_tensor(1, 3, 4, 4, rng);
  auto f = [&cot](const std::vector<Tensor4>& in) {
    return weighted_sum(
        conv2d_forward(in[0], in[1], {in[2].data.data(), in[2].data.size()}),
        cot);
  };
  ConvGrads g = conv2d_backward(x, w, cot);
  Tensor4 gb(1, 3, 1, 1);
  gb.data = g.grad_b;
  const auto rep = gradcheck(f, {x, w, b}, {g.grad_x, g.grad_w, gb},
                             {"x", "weights", "bias"}, tol);
  return from_report("conv2d", rep);
}

BatteryCheck check_batchnorm(Rng& rng, double tol) {
  const Tensor4 x = random_tensor(2, 2, 3, 3, rng);
  Tensor4 gamma(1, 2, 1, 1);
  gamma.data = {rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5)};
  Tensor4 beta(1, 2, 1, 1);
  beta.data = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
  const Tensor4 cot = random_tensor(2, 2, 3, 3, rng);
  auto f = [&cot](const std::vector<Tensor4>& in) {
    BnState st = BnState::identity(2);
    st.gamma = in[1].data;
    st.beta = in[2].data;
    return weighted_sum(batchnorm_forward(in[0], st, true), cot);
  };
  BnState st = BnState::identity(2);
  st.gamma = gamma.data;
  st.beta = beta.data;
  BnGrads g = batchnorm_backward(x, st, cot);
  Tensor4 gg(1, 2, 1, 1), gb(1, 2, 1, 1);
  gg.data = g.grad_gamma;
  gb.data = g.grad_beta;
  const auto rep = gradcheck(f, {x, gamma, beta}, {g.grad_x, gg, gb},
                             {"x", "gamma", "beta"}, tol);
  return from_report("batchnorm", rep);
}

BatteryCheck check_relu(Rng& rng, double tol) {
  const Tensor4 x = random_away_from_zero(2, 3, 4, 4, rng, 1e-3);
  const Tensor4 cot = random_tensor(2, 3, 4, 4, rng);
  auto f = [&cot](const std::vector<Tensor4>& in) {
    return weighted_sum(relu(in[0]), cot);
  };
  const auto rep = gradcheck(f, {x}, {relu_backward(x, cot)}, {"x"}, tol);
  return from_report("relu", rep);
}

BatteryCheck check_softmax_ce(Rng& rng, double tol) {
  const Tensor4 logits = random_tensor(2, 2, 4, 4, rng);
  Tensor4 mask(2, 1, 4, 4);
  for (double& v : mask.data) v = rng.next_double() < 0.3 ? 1.0 : 0.0;
  mask.data[0] = 1.0;  // both classes present
  mask.data[1] = 0.0;
  const ClassWeights cw = class_weights(mask);
  auto f = [&mask, &cw](const std::vector<Tensor4>& in) {
    return weighted_ce(softmax_pixelwise(in[0]), mask, cw);
  };
  const Tensor4 probs = softmax_pixelwise(logits);
  const Tensor4 grad_logits = softmax_pixelwise_backward(
      probs, weighted_ce_grad_for_backprop(probs, mask, cw));
  const auto rep = gradcheck(f, {logits}, {grad_logits}, {"logits"}, tol);
  return from_report("softmax+weighted_ce", rep);
}

BatteryCheck check_end_to_end(Rng& rng, double tol) {
  NetworkConfig cfg;
  cfg.in_channels = 1;
  cfg.input_size = {8, 8};
  cfg.widths = {3};
  cfg.conv_counts = {1};
  cfg.nrc_enabled = false;
  const NetworkPlan plan = build_network(cfg);
  ParamStore store = init_params(plan, rng.next_u64());

  const Tensor4 x = random_tensor(1, 1, 8, 8, rng, 0.0, 1.0);
  Tensor4 mask(1, 1, 8, 8);
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    mask.data[i] = i % 3 == 0 ? 1.0 : 0.0;
  }
  const ClassWeights cw = class_weights(mask);

  auto loss_of = [&]() {
    ForwardResult fwd = forward(plan, store, x, true);
    return weighted_ce(fwd.probs, mask, cw);
  };

  ForwardResult fwd = forward(plan, store, x, true);
  backward(plan, store, fwd.trace,
           weighted_ce_grad_for_backprop(fwd.probs, mask, cw));
  std::vector<Tensor4> analytic;
  for (const auto& p : store.params) analytic.push_back(p.grad);

  BatteryCheck c;
  c.name = "end_to_end(widths=[3], 8x8)";
  c.tolerance = tol;
  const double step = 1e-5;
  for (std::size_t pi = 0; pi < store.params.size(); ++pi) {
    auto& data = store.params[pi].value.data;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + step;
      const double fp = loss_of();
      data[i] = saved - step;
      const double fm = loss_of();
      data[i] = saved;
      const double gn = (fp - fm) / (2.0 * step);
      const double ga = analytic[pi].data[i];
      const double rel = std::abs(ga - gn) /
                         std::max({1.0, std::abs(ga), std::abs(gn)});
      c.max_rel_err = std::max(c.max_rel_err, rel);
    }
  }
  c.pass = c.max_rel_err <= tol;
  return c;
}

}  // namespace

std::vector<BatteryCheck> gradient_battery(std::uint64_t seed,
                                           double tolerance) {
  Rng rng(seed);
  std::vector<BatteryCheck> checks;
  checks.push_back(check_residual_add(rng));
  checks.push_back(check_conv2d(rng, tolerance));
  checks.push_back(check_batchnorm(rng, tolerance));
  checks.push_back(check_relu(rng, tolerance));
  checks.push_back(check_softmax_ce(rng, tolerance));
  checks.push_back(check_end_to_end(rng, std::max(tolerance, 1e-3)));
  return checks;
}

}  // namespace segtrus

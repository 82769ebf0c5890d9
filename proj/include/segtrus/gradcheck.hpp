#ifndef SEGTRUS_GRADCHECK_HPP_
#define SEGTRUS_GRADCHECK_HPP_

#include <functional>
#include <string>
#include <vector>

#include "segtrus/tensor.hpp"

namespace segtrus {

struct GradCheckArg {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckArg> args;
  double tolerance = 1e-4;
  bool pass = true;
};

// Central finite differences against supplied analytic gradients.
// f maps the input bundle to a scalar; relative error per entry is
// |g_a - g_n| / max(1, |g_a|, |g_n|).
GradCheckReport gradcheck(
    const std::function<double(const std::vector<Tensor4>&)>& f,
    const std::vector<Tensor4>& inputs, const std::vector<Tensor4>& analytic,
    const std::vector<std::string>& names, double tolerance = 1e-4,
    double step = 1e-5);

}  // namespace segtrus

#endif  // SEGTRUS_GRADCHECK_HPP_

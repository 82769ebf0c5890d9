#include "segtrus/gradcheck.hpp"

#include <cmath>

#include "segtrus/errors.hpp"

namespace segtrus {

GradCheckReport gradcheck(
    const std::function<double(const std::vector<Tensor4>&)>& f,
    const std::vector<Tensor4>& inputs, const std::vector<Tensor4>& analytic,
    const std::vector<std::string>& names, double tolerance, double step) {
  if (tolerance <= 0.0 || step <= 0.0) {
    throw UsageError("gradcheck: tolerance and step must be positive");
  }
  if (analytic.size() != inputs.size() || names.size() != inputs.size()) {
    throw UsageError("gradcheck: inputs, analytic and names must align");
  }
  GradCheckReport report;
  report.tolerance = tolerance;

  std::vector<Tensor4> work = inputs;
  for (std::size_t a = 0; a < work.size(); ++a) {
    if (!analytic[a].same_dims(work[a])) {
      throw UsageError("gradcheck: analytic gradient dims mismatch for '" +
                       names[a] + "'");
    }
    GradCheckArg arg;
    arg.name = names[a];
    for (std::size_t i = 0; i < work[a].data.size(); ++i) {
      const double saved = work[a].data[i];
      work[a].data[i] = saved + step;
      const double fp = f(work);
      work[a].data[i] = saved - step;
      const double fm = f(work);
      work[a].data[i] = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw NumericError("gradcheck: non-finite value while perturbing '" +
                           names[a] + "'");
      }
      const double gn = (fp - fm) / (2.0 * step);
      const double ga = analytic[a].data[i];
      const double rel = std::abs(ga - gn) /
                         std::max({1.0, std::abs(ga), std::abs(gn)});
      arg.max_rel_err = std::max(arg.max_rel_err, rel);
    }
    arg.pass = arg.max_rel_err <= tolerance;
    report.pass = report.pass && arg.pass;
    report.args.push_back(std::move(arg));
  }
  return report;
}

}  // namespace segtrus

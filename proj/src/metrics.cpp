#include "segtrus/metrics.hpp"

#include <algorithm>
#include <cstdio>

#include "segtrus/errors.hpp"

namespace segtrus {

std::string DscReport::to_csv_row(std::size_t run) const {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.6f,%.6f", run, average, maximum,
                minimum);
  return buf;
}

double dsc(const Tensor4& pred_mask, const Tensor4& true_mask) {
  if (!pred_mask.same_dims(true_mask)) {
    throw ShapeError("dsc: mask dims mismatch");
  }
  std::size_t x = 0, y = 0, inter = 0;
  for (std::size_t i = 0; i < pred_mask.data.size(); ++i) {
    const double p = pred_mask.data[i];
    const double t = true_mask.data[i];
    if ((p != 0.0 && p != 1.0) || (t != 0.0 && t != 1.0)) {
      throw DataError("dsc: masks must be binary");
    }
    if (p == 1.0) ++x;
    if (t == 1.0) ++y;
    if (p == 1.0 && t == 1.0) ++inter;
  }
  if (x + y == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(x + y);
}

Tensor4 binarize(const Tensor4& probs) {
  if (probs.c() != 2) {
    throw ShapeError("binarize: needs 2 channels, got " +
                     std::to_string(probs.c()));
  }
  const std::size_t N = probs.n(), H = probs.h(), W = probs.w();
  Tensor4 mask(N, 1, H, W);
  const std::size_t plane = H * W;
  for (std::size_t n = 0; n < N; ++n) {
    const double* p0 = probs.plane(n, 0);
    const double* p1 = probs.plane(n, 1);
    double* m = mask.plane(n, 0);
    for (std::size_t i = 0; i < plane; ++i) {
      m[i] = p1[i] > p0[i] ? 1.0 : 0.0;
    }
  }
  return mask;
}

DscReport report_stats(const std::vector<double>& per_image_dsc) {
  if (per_image_dsc.empty()) {
    throw UsageError("report_stats: empty DSC list");
  }
  DscReport r;
  r.per_image = per_image_dsc;
  double sum = 0.0;
  r.maximum = per_image_dsc.front();
  r.minimum = per_image_dsc.front();
  for (double v : per_image_dsc) {
    if (v < 0.0 || v > 1.0) {
      throw UsageError("report_stats: DSC value outside [0,1]");
    }
    sum += v;
    r.maximum = std::max(r.maximum, v);
    r.minimum = std::min(r.minimum, v);
  }
  r.average = sum / static_cast<double>(per_image_dsc.size());
  return r;
}

}  // namespace segtrus

#ifndef SEGTRUS_METRICS_HPP_
#define SEGTRUS_METRICS_HPP_

#include <string>
#include <vector>

#include "segtrus/tensor.hpp"

namespace segtrus {

// Per-image Dice coefficients with their average/maximum/minimum.
struct DscReport {
  std::vector<double> per_image;
  double average = 0.0;
  double maximum = 0.0;
  double minimum = 0.0;

  // "run,avg,max,min"
  std::string to_csv_row(std::size_t run) const;
};

// 2|X n Y| / (|X| + |Y|) on the prostate class; 1.0 when both masks are
// empty.
double dsc(const Tensor4& pred_mask, const Tensor4& true_mask);

// Per-pixel argmax of a 2-channel probability map; an exact 0.5/0.5 tie
// assigns background. Output dims (N,1,H,W).
Tensor4 binarize(const Tensor4& probs);

DscReport report_stats(const std::vector<double>& per_image_dsc);

}  // namespace segtrus

#endif  // SEGTRUS_METRICS_HPP_

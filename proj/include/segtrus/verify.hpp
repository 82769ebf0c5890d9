#ifndef SEGTRUS_VERIFY_HPP_
#define SEGTRUS_VERIFY_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace segtrus {

struct BatteryCheck {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// Finite-difference verification of every backward kernel plus the
// softmax/cross-entropy composite and an end-to-end minimal network.
std::vector<BatteryCheck> gradient_battery(std::uint64_t seed,
                                           double tolerance);

}  // namespace segtrus

#endif  // SEGTRUS_VERIFY_HPP_

#ifndef SEGTRUS_PHANTOM_HPP_
#define SEGTRUS_PHANTOM_HPP_

#include "segtrus/dataset.hpp"
#include "segtrus/rng.hpp"

namespace segtrus {

struct EllipseParams {
  double cx = 0, cy = 0;     // center
  double a = 0, b = 0;       // semi-axes
  double theta = 0;          // rotation in [0, pi)
};

struct PhantomInfo {
  EllipseParams ellipse;
  bool shadow = false;
  double shadow_half_angle = 0;  // radians
};

// True iff pixel (x,y) lies inside the rotated ellipse.
bool inside_ellipse(const EllipseParams& e, double x, double y);

// Speckled elliptical phantom with the exact ellipse as ground truth.
// size >= 16; the drawn parameters are reported through info when asked.
Sample gen_phantom(std::size_t size, Rng& rng, PhantomInfo* info = nullptr);

}  // namespace segtrus

#endif  // SEGTRUS_PHANTOM_HPP_

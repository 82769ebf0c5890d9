#include "segtrus/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "segtrus/errors.hpp"

namespace segtrus {

bool inside_ellipse(const EllipseParams& e, double x, double y) {
  const double dx = x - e.cx;
  const double dy = y - e.cy;
  const double ct = std::cos(e.theta);
  const double st = std::sin(e.theta);
  const double xr = ct * dx + st * dy;
  const double yr = -st * dx + ct * dy;
  const double u = xr / e.a;
  const double v = yr / e.b;
  return u * u + v * v <= 1.0;
}

Sample gen_phantom(std::size_t size, Rng& rng, PhantomInfo* info) {
  if (size < 16) {
    throw UsageError("gen_phantom: size must be >= 16, got " +
                     std::to_string(size));
  }
  const double s = static_cast<double>(size);
  const double pi = 3.141592653589793238462643383279502884;

  PhantomInfo ph;
  ph.ellipse.cx = rng.uniform(0.35, 0.65) * s;
  ph.ellipse.cy = rng.uniform(0.35, 0.65) * s;
  ph.ellipse.a = rng.uniform(0.15, 0.35) * s;
  ph.ellipse.b = rng.uniform(0.15, 0.35) * s;
  ph.ellipse.theta = rng.uniform(0.0, pi);
  ph.shadow = rng.next_double() < 0.5;
  ph.shadow_half_angle = rng.uniform(5.0, 15.0) * pi / 180.0;

  Sample out;
  out.image = Image2D(size, size);
  out.mask = Image2D(size, size);

  // shadow sector: apex at top-center, axis pointing straight down
  const double apex_x = (s - 1.0) / 2.0;

  Image2D raw(size, size);
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      const double x = static_cast<double>(c);
      const double y = static_cast<double>(r);
      const bool in = inside_ellipse(ph.ellipse, x, y);
      out.mask.at(r, c) = in ? 1.0 : 0.0;
      double v = in ? 0.55 : 0.35;
      // multiplicative speckle, mean 1
      const double g1 = rng.next_gaussian();
      const double g2 = rng.next_gaussian();
      v *= (g1 * g1 + g2 * g2) / 2.0;
      if (ph.shadow) {
        const double ang = std::atan2(std::abs(x - apex_x), y);
        if (ang <= ph.shadow_half_angle) v *= 0.4;
      }
      raw.at(r, c) = v;
    }
  }

  // one 3x3 mean-filter pass (in-bounds average), then clamp to [0,1]
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      double acc = 0.0;
      int cnt = 0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const long rr = static_cast<long>(r) + dr;
          const long cc = static_cast<long>(c) + dc;
          if (rr < 0 || cc < 0 || rr >= static_cast<long>(size) ||
              cc >= static_cast<long>(size)) {
            continue;
          }
          acc += raw.at(static_cast<std::size_t>(rr),
                        static_cast<std::size_t>(cc));
          ++cnt;
        }
      }
      out.image.at(r, c) = std::clamp(acc / cnt, 0.0, 1.0);
    }
  }

  if (info) *info = ph;
  return out;
}

}  // namespace segtrus

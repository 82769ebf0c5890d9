#ifndef SEGTRUS_CLI_HPP_
#define SEGTRUS_CLI_HPP_

#include "segtrus/netpbm.hpp"

namespace segtrus {

// Foreground pixels with at least one background 4-neighbor; pixels outside
// the image count as background.
Image2D boundary(const Image2D& mask);

// Gray base with the predicted boundary in red, the ground-truth boundary in
// green, and their overlap in yellow.
ImageRgb make_overlay(const Image2D& base, const Image2D& pred,
                      const Image2D& truth);

// Exit codes: 0 success, 1 usage, 2 I/O or format error, 3 numeric failure.
int dispatch(int argc, const char* const* argv);

}  // namespace segtrus

#endif  // SEGTRUS_CLI_HPP_

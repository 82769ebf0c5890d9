#ifndef SEGTRUS_NETPBM_HPP_
#define SEGTRUS_NETPBM_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

namespace segtrus {

// Grayscale image with values in [0,1]; masks use exactly {0,1}.
struct Image2D {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<double> pix;

  Image2D() = default;
  Image2D(std::size_t h_, std::size_t w_, double fill = 0.0)
      : h(h_), w(w_), pix(h_ * w_, fill) {}

  double& at(std::size_t r, std::size_t c) { return pix[r * w + c]; }
  double at(std::size_t r, std::size_t c) const { return pix[r * w + c]; }

  friend bool operator==(const Image2D&, const Image2D&) = default;
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct ImageRgb {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<Rgb> pix;

  ImageRgb() = default;
  ImageRgb(std::size_t h_, std::size_t w_) : h(h_), w(w_), pix(h_ * w_) {}

  Rgb& at(std::size_t r, std::size_t c) { return pix[r * w + c]; }
  const Rgb& at(std::size_t r, std::size_t c) const { return pix[r * w + c]; }
};

// Round-half-up quantization to 8 bits, the exact inverse of read scaling.
std::uint8_t quantize255(double v);

// Binary PGM (P5, maxval 255). Values outside [0,1] are a data error.
void write_pgm(const Image2D& img, const std::filesystem::path& path);
// Rejects anything that is not P5/maxval-255; errors carry the byte offset.
Image2D read_pgm(const std::filesystem::path& path);

// Binary PPM (P6, maxval 255).
void write_ppm(const ImageRgb& img, const std::filesystem::path& path);

}  // namespace segtrus

#endif  // SEGTRUS_NETPBM_HPP_

#include "segtrus/netpbm.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "segtrus/errors.hpp"

namespace segtrus {

std::uint8_t quantize255(double v) {
  return static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
}

void write_pgm(const Image2D& img, const std::filesystem::path& path) {
  if (img.h == 0 || img.w == 0) {
    throw UsageError("write_pgm: empty image");
  }
  for (double v : img.pix) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DataError("write_pgm: pixel value " + std::to_string(v) +
                      " outside [0,1]");
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FormatError("write_pgm: cannot open '" + path.string() + "'");
  }
  out << "P5\n" << img.w << " " << img.h << "\n255\n";
  std::vector<std::uint8_t> bytes(img.pix.size());
  for (std::size_t i = 0; i < img.pix.size(); ++i) {
    bytes[i] = quantize255(img.pix[i]);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw FormatError("write_pgm: short write to '" + path.string() + "'");
  }
}

namespace {

// Header tokenizer that tracks the byte offset for error messages and skips
// netpbm '#' comments.
class PnmParser {
 public:
  PnmParser(std::vector<char> bytes, std::string name)
      : bytes_(std::move(bytes)), name_(std::move(name)) {}

  std::size_t pos() const { return pos_; }
  std::size_t size() const { return bytes_.size(); }
  const char* data() const { return bytes_.data(); }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError("read_pgm: " + what + " at byte " +
                      std::to_string(pos_) + " of '" + name_ + "'");
  }

  void expect_magic(const std::string& magic) {
    if (bytes_.size() < magic.size() ||
        std::string(bytes_.data(), magic.size()) != magic) {
      fail("expected " + magic + " magic");
    }
    pos_ = magic.size();
  }

  void skip_space() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t read_uint() {
    skip_space();
    if (pos_ >= bytes_.size() || bytes_[pos_] < '0' || bytes_[pos_] > '9') {
      fail("expected unsigned integer");
    }
    std::size_t v = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' &&
           bytes_[pos_] <= '9') {
      v = v * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
      if (v > (std::size_t{1} << 32)) fail("integer too large");
      ++pos_;
    }
    return v;
  }

  // single whitespace byte between header and payload
  void consume_payload_separator() {
    if (pos_ >= bytes_.size() ||
        !(bytes_[pos_] == ' ' || bytes_[pos_] == '\t' ||
          bytes_[pos_] == '\r' || bytes_[pos_] == '\n')) {
      fail("expected whitespace before payload");
    }
    ++pos_;
  }

  void advance(std::size_t n) { pos_ += n; }

 private:
  std::vector<char> bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

std::vector<char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("read_pgm: cannot open '" + path.string() + "'");
  }
  return {std::istreambuf_iterator<char>(in),
          std::istreambuf_iterator<char>()};
}

}  // namespace

Image2D read_pgm(const std::filesystem::path& path) {
  PnmParser p(slurp(path), path.string());
  p.expect_magic("P5");
  const std::size_t w = p.read_uint();
  const std::size_t h = p.read_uint();
  const std::size_t maxval = p.read_uint();
  if (maxval != 255) p.fail("maxval must be 255, got " + std::to_string(maxval));
  if (w == 0 || h == 0) p.fail("degenerate image size");
  p.consume_payload_separator();
  if (p.size() - p.pos() < h * w) {
    p.fail("truncated payload, need " + std::to_string(h * w) + " bytes, have " +
           std::to_string(p.size() - p.pos()));
  }
  Image2D img(h, w);
  const unsigned char* payload =
      reinterpret_cast<const unsigned char*>(p.data()) + p.pos();
  for (std::size_t i = 0; i < h * w; ++i) {
    img.pix[i] = static_cast<double>(payload[i]) / 255.0;
  }
  return img;
}

void write_ppm(const ImageRgb& img, const std::filesystem::path& path) {
  if (img.h == 0 || img.w == 0) {
    throw UsageError("write_ppm: empty image");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FormatError("write_ppm: cannot open '" + path.string() + "'");
  }
  out << "P6\n" << img.w << " " << img.h << "\n255\n";
  for (const Rgb& px : img.pix) {
    const char rgb[3] = {static_cast<char>(px.r), static_cast<char>(px.g),
                         static_cast<char>(px.b)};
    out.write(rgb, 3);
  }
  if (!out) {
    throw FormatError("write_ppm: short write to '" + path.string() + "'");
  }
}

}  // namespace segtrus

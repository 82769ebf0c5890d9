#ifndef SEGTRUS_TENSOR_HPP_
#define SEGTRUS_TENSOR_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace segtrus {

// Dense 4-axis array in (batch, channel, height, width) order, row-major,
// double precision.
struct Tensor4 {
  std::array<std::size_t, 4> dims{0, 0, 0, 0};
  std::vector<double> data;

  Tensor4() = default;
  Tensor4(std::size_t n, std::size_t c, std::size_t h, std::size_t w,
          double fill = 0.0)
      : dims{n, c, h, w}, data(n * c * h * w, fill) {}

  std::size_t n() const { return dims[0]; }
  std::size_t c() const { return dims[1]; }
  std::size_t h() const { return dims[2]; }
  std::size_t w() const { return dims[3]; }
  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  std::size_t offset(std::size_t n_, std::size_t c_, std::size_t h_,
                     std::size_t w_) const {
    return ((n_ * dims[1] + c_) * dims[2] + h_) * dims[3] + w_;
  }
  double& at(std::size_t n_, std::size_t c_, std::size_t h_, std::size_t w_) {
    return data[offset(n_, c_, h_, w_)];
  }
  double at(std::size_t n_, std::size_t c_, std::size_t h_,
            std::size_t w_) const {
    return data[offset(n_, c_, h_, w_)];
  }

  double* plane(std::size_t n_, std::size_t c_) {
    return data.data() + (n_ * dims[1] + c_) * dims[2] * dims[3];
  }
  const double* plane(std::size_t n_, std::size_t c_) const {
    return data.data() + (n_ * dims[1] + c_) * dims[2] * dims[3];
  }

  bool same_dims(const Tensor4& o) const { return dims == o.dims; }

  friend bool operator==(const Tensor4&, const Tensor4&) = default;
};

// Argmax offsets recorded by 2x2 max pooling, one flat offset into the
// pre-pooling (H,W) plane per pooled cell.
struct IndexMap4 {
  std::array<std::size_t, 4> dims{0, 0, 0, 0};
  std::vector<std::uint32_t> data;

  IndexMap4() = default;
  IndexMap4(std::size_t n, std::size_t c, std::size_t h, std::size_t w)
      : dims{n, c, h, w}, data(n * c * h * w, 0) {}

  std::size_t size() const { return data.size(); }

  friend bool operator==(const IndexMap4&, const IndexMap4&) = default;
};

bool all_finite(const Tensor4& t);

}  // namespace segtrus

#endif  // SEGTRUS_TENSOR_HPP_

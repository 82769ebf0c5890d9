#ifndef SEGTRUS_ERRORS_HPP_
#define SEGTRUS_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace segtrus {

// Tensor/config dimension disagreement.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file contents (PGM/PPM, manifest, checkpoint).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Well-shaped but invalid values (non-binary mask, corrupt pooling index).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller broke a usage contract (missing split, empty input, bad parameter).
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values or a failed numeric verification.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace segtrus

#endif  // SEGTRUS_ERRORS_HPP_

#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace gvseg {

// Error category, doubling as the CLI exit code: 1 usage, 2 data, 3 numeric.
enum class ErrorKind { kUsage = 1, kData = 2, kNumeric = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::kUsage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::kNumeric, what) {}
};

// A pixel color that is not in the class catalog (strict decoding).
class UnknownColorError : public DataError {
 public:
  UnknownColorError(std::array<std::uint8_t, 3> color, long x, long y)
      : DataError("unknown label color (" + std::to_string(color[0]) + "," +
                  std::to_string(color[1]) + "," + std::to_string(color[2]) +
                  ") at pixel (" + std::to_string(x) + "," + std::to_string(y) + ")"),
        color_(color), x_(x), y_(y) {}
  std::array<std::uint8_t, 3> color() const { return color_; }
  long x() const { return x_; }
  long y() const { return y_; }

 private:
  std::array<std::uint8_t, 3> color_;
  long x_, y_;
};

// Image with zero valid (non-void) pixels fed to an operation that needs |y| >= 1.
class EmptyImageError : public DataError {
 public:
  explicit EmptyImageError(const std::string& what = "image has no valid pixels")
      : DataError(what) {}
};

class ShapeMismatchError : public DataError {
 public:
  explicit ShapeMismatchError(const std::string& what) : DataError(what) {}
};

class UnmappedClassError : public DataError {
 public:
  explicit UnmappedClassError(const std::string& what) : DataError(what) {}
};

// Training loss became non-finite; carries the epoch where it happened.
class DivergenceError : public NumericError {
 public:
  explicit DivergenceError(int epoch)
      : NumericError("training diverged (non-finite loss) at epoch " +
                     std::to_string(epoch)),
        epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

class UndefinedIoUError : public NumericError {
 public:
  explicit UndefinedIoUError(const std::string& what = "IoU undefined: empty union")
      : NumericError(what) {}
};

}  // namespace gvseg

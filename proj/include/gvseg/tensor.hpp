#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "gvseg/errors.hpp"

namespace gvseg {

using Index = Eigen::Index;

// H x W x C tensor stored as C contiguous column-major H x W planes, so each
// channel is addressable as an Eigen map and expressions stay allocation-free.
template <class Scalar>
class Tensor3 {
 public:
  using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using PlaneMap = Eigen::Map<Plane>;
  using ConstPlaneMap = Eigen::Map<const Plane>;
  using FlatMap = Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>;
  using ConstFlatMap = Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>>;

  Tensor3() = default;
  Tensor3(Index height, Index width, Index channels)
      : height_(height), width_(width), channels_(channels),
        data_(Eigen::Array<Scalar, Eigen::Dynamic, 1>::Zero(height * width * channels)) {
    if (height < 0 || width < 0 || channels < 0) {
      throw ShapeMismatchError("negative tensor dimension");
    }
  }

  Index height() const { return height_; }
  Index width() const { return width_; }
  Index channels() const { return channels_; }
  Index size() const { return data_.size(); }
  Index plane_size() const { return height_ * width_; }

  bool same_shape(const Tensor3& other) const {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }

  Scalar operator()(Index h, Index w, Index c) const {
    return data_[c * plane_size() + w * height_ + h];
  }
  Scalar& operator()(Index h, Index w, Index c) {
    return data_[c * plane_size() + w * height_ + h];
  }

  PlaneMap channel(Index c) {
    return PlaneMap(channel_data(c), height_, width_);
  }
  ConstPlaneMap channel(Index c) const {
    return ConstPlaneMap(channel_data(c), height_, width_);
  }

  Scalar* channel_data(Index c) { return data_.data() + c * plane_size(); }
  const Scalar* channel_data(Index c) const { return data_.data() + c * plane_size(); }

  FlatMap flat() { return FlatMap(data_.data(), data_.size()); }
  ConstFlatMap flat() const { return ConstFlatMap(data_.data(), data_.size()); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

 private:
  Index height_ = 0;
  Index width_ = 0;
  Index channels_ = 0;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> data_;
};

using Tensor3d = Tensor3<double>;
using Tensor3i = Tensor3<std::int32_t>;

}  // namespace gvseg

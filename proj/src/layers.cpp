#include "gvseg/layers.hpp"

#include <Eigen/Dense>

#include "gvseg/errors.hpp"

namespace gvseg::nn {

namespace {

using Plane = Tensor3d::Plane;
using PlaneMap = Tensor3d::PlaneMap;
using ConstPlaneMap = Tensor3d::ConstPlaneMap;
using DynStride = Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>;
using StridedMap = Eigen::Map<Plane, 0, DynStride>;
using ConstStridedMap = Eigen::Map<const Plane, 0, DynStride>;

void check_weights(std::size_t w_size, std::size_t b_size, Index kernel,
                   Index in_channels, Index out_channels) {
  if (w_size != static_cast<std::size_t>(kernel * in_channels * out_channels) ||
      b_size != static_cast<std::size_t>(out_channels)) {
    throw ShapeMismatchError("layer weight buffer size mismatch");
  }
}

// Stride-2 sub-lattice of a column-major H x W plane, anchored at (dh, dw).
StridedMap lattice(double* plane, Index height, Index dh, Index dw,
                   Index sub_h, Index sub_w) {
  return StridedMap(plane + dw * height + dh, sub_h, sub_w,
                    DynStride(2 * height, 2));
}
ConstStridedMap lattice(const double* plane, Index height, Index dh, Index dw,
                        Index sub_h, Index sub_w) {
  return ConstStridedMap(plane + dw * height + dh, sub_h, sub_w,
                         DynStride(2 * height, 2));
}

}  // namespace

Tensor3d conv3x3_same(const Tensor3d& x, std::span<const double> w,
                      std::span<const double> b, Index out_channels) {
  const Index in_channels = x.channels();
  check_weights(w.size(), b.size(), 9, in_channels, out_channels);
  const Index height = x.height(), width = x.width();

  Tensor3d y(height, width, out_channels);
  for (Index co = 0; co < out_channels; ++co) y.channel(co).setConstant(b[co]);

  for (Index ci = 0; ci < in_channels; ++ci) {
    const auto xc = x.channel(ci);
    for (Index dh = -1; dh <= 1; ++dh) {
      for (Index dw = -1; dw <= 1; ++dw) {
        // y(h, w) += k * x(h + dh, w + dw) over the in-bounds overlap.
        const Index r0y = std::max<Index>(0, -dh), r0x = std::max<Index>(0, dh);
        const Index c0y = std::max<Index>(0, -dw), c0x = std::max<Index>(0, dw);
        const Index nr = height - std::abs(dh), nc = width - std::abs(dw);
        const std::size_t base =
            static_cast<std::size_t>(((dh + 1) * 3 + (dw + 1)) * in_channels + ci) *
            static_cast<std::size_t>(out_channels);
        const auto xblk = xc.block(r0x, c0x, nr, nc);
        for (Index co = 0; co < out_channels; ++co) {
          y.channel(co).block(r0y, c0y, nr, nc) += w[base + static_cast<std::size_t>(co)] * xblk;
        }
      }
    }
  }
  return y;
}

void conv3x3_same_backward(const Tensor3d& x, std::span<const double> w,
                           const Tensor3d& dy, Tensor3d* dx,
                           std::span<double> dw, std::span<double> db) {
  const Index in_channels = x.channels();
  const Index out_channels = dy.channels();
  check_weights(dw.size(), db.size(), 9, in_channels, out_channels);
  if (dy.height() != x.height() || dy.width() != x.width()) {
    throw ShapeMismatchError("conv3x3 backward shape mismatch");
  }
  const Index height = x.height(), width = x.width();

  std::fill(dw.begin(), dw.end(), 0.0);
  for (Index co = 0; co < out_channels; ++co) db[co] = dy.channel(co).sum();
  if (dx) *dx = Tensor3d(height, width, in_channels);

  for (Index ci = 0; ci < in_channels; ++ci) {
    const auto xc = x.channel(ci);
    for (Index dh = -1; dh <= 1; ++dh) {
      for (Index dw_ = -1; dw_ <= 1; ++dw_) {
        const Index r0y = std::max<Index>(0, -dh), r0x = std::max<Index>(0, dh);
        const Index c0y = std::max<Index>(0, -dw_), c0x = std::max<Index>(0, dw_);
        const Index nr = height - std::abs(dh), nc = width - std::abs(dw_);
        const std::size_t base =
            static_cast<std::size_t>(((dh + 1) * 3 + (dw_ + 1)) * in_channels + ci) *
            static_cast<std::size_t>(out_channels);
        const auto xblk = xc.block(r0x, c0x, nr, nc);
        for (Index co = 0; co < out_channels; ++co) {
          const auto dyblk = dy.channel(co).block(r0y, c0y, nr, nc);
          dw[base + static_cast<std::size_t>(co)] += (xblk * dyblk).sum();
          if (dx) {
            dx->channel(ci).block(r0x, c0x, nr, nc) +=
                w[base + static_cast<std::size_t>(co)] * dyblk;
          }
        }
      }
    }
  }
}

Tensor3d maxpool2x2(const Tensor3d& x, Tensor3i* argmax) {
  if (x.height() % 2 != 0 || x.width() % 2 != 0) {
    throw ShapeMismatchError("maxpool2x2 needs even height and width");
  }
  const Index out_h = x.height() / 2, out_w = x.width() / 2;
  Tensor3d y(out_h, out_w, x.channels());
  if (argmax) *argmax = Tensor3i(out_h, out_w, x.channels());

  for (Index c = 0; c < x.channels(); ++c) {
    const auto xc = x.channel(c);
    for (Index ow = 0; ow < out_w; ++ow) {
      for (Index oh = 0; oh < out_h; ++oh) {
        double best = xc(2 * oh, 2 * ow);
        Index best_h = 2 * oh, best_w = 2 * ow;
        for (Index dw = 0; dw < 2; ++dw) {
          for (Index dh = 0; dh < 2; ++dh) {
            const double v = xc(2 * oh + dh, 2 * ow + dw);
            if (v > best) {  // strict: ties keep the first scanned cell
              best = v;
              best_h = 2 * oh + dh;
              best_w = 2 * ow + dw;
            }
          }
        }
        y(oh, ow, c) = best;
        if (argmax) {
          (*argmax)(oh, ow, c) = static_cast<std::int32_t>(best_w * x.height() + best_h);
        }
      }
    }
  }
  return y;
}

Tensor3d maxpool2x2_backward(const Tensor3d& dy, const Tensor3i& argmax,
                             Index in_height, Index in_width) {
  if (dy.height() != argmax.height() || dy.width() != argmax.width() ||
      dy.channels() != argmax.channels()) {
    throw ShapeMismatchError("maxpool backward shape mismatch");
  }
  Tensor3d dx(in_height, in_width, dy.channels());
  for (Index c = 0; c < dy.channels(); ++c) {
    double* plane = dx.channel_data(c);
    for (Index ow = 0; ow < dy.width(); ++ow) {
      for (Index oh = 0; oh < dy.height(); ++oh) {
        plane[argmax(oh, ow, c)] += dy(oh, ow, c);
      }
    }
  }
  return dx;
}

Tensor3d tconv2x2_stride2(const Tensor3d& x, std::span<const double> w,
                          std::span<const double> b, Index out_channels) {
  const Index in_channels = x.channels();
  check_weights(w.size(), b.size(), 4, in_channels, out_channels);
  const Index out_h = 2 * x.height(), out_w = 2 * x.width();

  Tensor3d y(out_h, out_w, out_channels);
  for (Index co = 0; co < out_channels; ++co) y.channel(co).setConstant(b[co]);

  for (Index ci = 0; ci < in_channels; ++ci) {
    const auto xc = x.channel(ci);
    for (Index dh = 0; dh < 2; ++dh) {
      for (Index dw = 0; dw < 2; ++dw) {
        const std::size_t base =
            static_cast<std::size_t>((dh * 2 + dw) * in_channels + ci) *
            static_cast<std::size_t>(out_channels);
        for (Index co = 0; co < out_channels; ++co) {
          // y(2h + dh, 2w + dw) += k * x(h, w)
          lattice(y.channel_data(co), out_h, dh, dw, x.height(), x.width()) +=
              w[base + static_cast<std::size_t>(co)] * xc;
        }
      }
    }
  }
  return y;
}

void tconv2x2_stride2_backward(const Tensor3d& x, std::span<const double> w,
                               const Tensor3d& dy, Tensor3d* dx,
                               std::span<double> dw, std::span<double> db) {
  const Index in_channels = x.channels();
  const Index out_channels = dy.channels();
  check_weights(dw.size(), db.size(), 4, in_channels, out_channels);
  if (dy.height() != 2 * x.height() || dy.width() != 2 * x.width()) {
    throw ShapeMismatchError("tconv2x2 backward shape mismatch");
  }

  std::fill(dw.begin(), dw.end(), 0.0);
  for (Index co = 0; co < out_channels; ++co) db[co] = dy.channel(co).sum();
  if (dx) *dx = Tensor3d(x.height(), x.width(), in_channels);

  for (Index ci = 0; ci < in_channels; ++ci) {
    const auto xc = x.channel(ci);
    for (Index dh = 0; dh < 2; ++dh) {
      for (Index dw_ = 0; dw_ < 2; ++dw_) {
        const std::size_t base =
            static_cast<std::size_t>((dh * 2 + dw_) * in_channels + ci) *
            static_cast<std::size_t>(out_channels);
        for (Index co = 0; co < out_channels; ++co) {
          const auto dysub = lattice(dy.channel_data(co), dy.height(), dh, dw_,
                                     x.height(), x.width());
          dw[base + static_cast<std::size_t>(co)] += (xc * dysub).sum();
          if (dx) {
            dx->channel(ci) += w[base + static_cast<std::size_t>(co)] * dysub;
          }
        }
      }
    }
  }
}

Tensor3d conv1x1(const Tensor3d& x, std::span<const double> w,
                 std::span<const double> b, Index out_channels) {
  const Index in_channels = x.channels();
  check_weights(w.size(), b.size(), 1, in_channels, out_channels);

  Tensor3d y(x.height(), x.width(), out_channels);
  for (Index co = 0; co < out_channels; ++co) {
    auto yc = y.channel(co);
    yc.setConstant(b[co]);
    for (Index ci = 0; ci < in_channels; ++ci) {
      yc += w[static_cast<std::size_t>(ci * out_channels + co)] * x.channel(ci);
    }
  }
  return y;
}

void conv1x1_backward(const Tensor3d& x, std::span<const double> w,
                      const Tensor3d& dy, Tensor3d* dx,
                      std::span<double> dw, std::span<double> db) {
  const Index in_channels = x.channels();
  const Index out_channels = dy.channels();
  check_weights(dw.size(), db.size(), 1, in_channels, out_channels);
  if (dy.height() != x.height() || dy.width() != x.width()) {
    throw ShapeMismatchError("conv1x1 backward shape mismatch");
  }

  std::fill(dw.begin(), dw.end(), 0.0);
  for (Index co = 0; co < out_channels; ++co) db[co] = dy.channel(co).sum();
  if (dx) *dx = Tensor3d(x.height(), x.width(), in_channels);

  for (Index ci = 0; ci < in_channels; ++ci) {
    for (Index co = 0; co < out_channels; ++co) {
      dw[static_cast<std::size_t>(ci * out_channels + co)] =
          (x.channel(ci) * dy.channel(co)).sum();
      if (dx) {
        dx->channel(ci) += w[static_cast<std::size_t>(ci * out_channels + co)] * dy.channel(co);
      }
    }
  }
}

Tensor3d relu(const Tensor3d& x) {
  Tensor3d y(x.height(), x.width(), x.channels());
  y.flat() = x.flat().max(0.0);
  return y;
}

Tensor3d relu_backward(const Tensor3d& dy, const Tensor3d& pre) {
  if (!dy.same_shape(pre)) throw ShapeMismatchError("relu backward shape mismatch");
  Tensor3d dx(dy.height(), dy.width(), dy.channels());
  dx.flat() = (pre.flat() > 0.0).select(dy.flat(), 0.0);
  return dx;
}

}  // namespace gvseg::nn

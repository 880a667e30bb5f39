#pragma once

#include <span>

#include "gvseg/tensor.hpp"

// From-scratch layer primitives with matching analytic backward passes.
// Weight layouts (flat vectors):
//   conv 3x3:  w[((dh*3 + dw)*Cin + ci)*Cout + co], dh/dw offsets in {0,1,2}
//   tconv 2x2: w[((dh*2 + dw)*Cin + ci)*Cout + co]
//   conv 1x1:  w[ci*Cout + co]
// Biases are one value per output channel.
namespace gvseg::nn {

Tensor3d conv3x3_same(const Tensor3d& x, std::span<const double> w,
                      std::span<const double> b, Index out_channels);
void conv3x3_same_backward(const Tensor3d& x, std::span<const double> w,
                           const Tensor3d& dy, Tensor3d* dx,
                           std::span<double> dw, std::span<double> db);

// 2x2 window, stride 2; ties keep the first element in scan order. Input
// height and width must be even. argmax stores the flat plane index of the
// winning input cell per output cell.
Tensor3d maxpool2x2(const Tensor3d& x, Tensor3i* argmax);
Tensor3d maxpool2x2_backward(const Tensor3d& dy, const Tensor3i& argmax,
                             Index in_height, Index in_width);

// Transposed convolution, kernel 2, stride 2: output is exactly 2H x 2W.
Tensor3d tconv2x2_stride2(const Tensor3d& x, std::span<const double> w,
                          std::span<const double> b, Index out_channels);
void tconv2x2_stride2_backward(const Tensor3d& x, std::span<const double> w,
                               const Tensor3d& dy, Tensor3d* dx,
                               std::span<double> dw, std::span<double> db);

Tensor3d conv1x1(const Tensor3d& x, std::span<const double> w,
                 std::span<const double> b, Index out_channels);
void conv1x1_backward(const Tensor3d& x, std::span<const double> w,
                      const Tensor3d& dy, Tensor3d* dx,
                      std::span<double> dw, std::span<double> db);

Tensor3d relu(const Tensor3d& x);
// pre is the pre-activation input; gradient at exactly zero is zero.
Tensor3d relu_backward(const Tensor3d& dy, const Tensor3d& pre);

}  // namespace gvseg::nn

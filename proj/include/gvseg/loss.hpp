#pragma once

#include <cstdint>
#include <functional>

#include <Eigen/Core>

#include "gvseg/labelspace.hpp"
#include "gvseg/tensor.hpp"

namespace gvseg {

// Per-image class weights: w_c = |y| / (|y_c| * C) for classes present in the
// image, 0 for absent classes. C is the fixed dataset class count.
struct WeightVector {
  Eigen::VectorXd weights;
  CountVector class_counts;      // the |y_c| histogram the weights came from
  std::int64_t valid_pixels = 0; // |y|
};

struct LossValue {
  double total = 0.0;
  Eigen::VectorXd per_class;     // accumulated weighted negative log-likelihood
  std::int64_t valid_pixels = 0;
};

// Per-pixel softmax across channels, computed with max subtraction.
Tensor3d softmax(const Tensor3d& activations);
Tensor3d log_softmax(const Tensor3d& activations);

WeightVector image_weights(const LabelMap& labels, Index num_classes);
WeightVector uniform_weights(const LabelMap& labels, Index num_classes);

// L = -sum over valid pixels of w_t(x) * log p_t(x). Void pixels contribute
// exactly zero. The log is a fused stabilized log-softmax, never the log of
// a stored probability.
LossValue weighted_loss(const LabelMap& labels, const Tensor3d& activations,
                        const WeightVector& weights);

// dL/da_c(x) = w_t(x) * (p_c(x) - [c == t(x)]) at valid pixels, zero at void.
Tensor3d loss_gradient(const LabelMap& labels, const Tensor3d& activations,
                       const WeightVector& weights);

// Both in one pass (shared softmax); used by the network backward path.
std::pair<LossValue, Tensor3d> loss_and_gradient(const LabelMap& labels,
                                                 const Tensor3d& activations,
                                                 const WeightVector& weights);

struct GradCheckReport {
  double max_rel_error = 0.0;
  Index worst_coordinate = -1;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  Index samples = 0;
};

// Central finite differences on sampled coordinates against a caller-supplied
// analytic gradient. Relative error denominator: max(|analytic|, |numeric|, 1e-8).
GradCheckReport finite_difference_check(
    const std::function<double(const Eigen::VectorXd&)>& fn,
    const Eigen::VectorXd& analytic_gradient, const Eigen::VectorXd& params,
    Index samples, double epsilon, std::uint64_t seed);

}  // namespace gvseg

#include "gvseg/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace gvseg {

namespace {

void check_finite(const Tensor3d& activations) {
  if (!activations.flat().isFinite().all()) {
    throw NumericError("non-finite input to softmax");
  }
}

void check_loss_shapes(const LabelMap& labels, const Tensor3d& activations,
                       const WeightVector& weights) {
  if (activations.height() != labels.rows() || activations.width() != labels.cols()) {
    throw ShapeMismatchError("activation grid does not match the label map");
  }
  if (weights.weights.size() != activations.channels()) {
    throw ShapeMismatchError("weight vector length does not match channel count");
  }
}

// Stabilized per-pixel max over channels.
typename Tensor3d::Plane channel_max(const Tensor3d& a) {
  typename Tensor3d::Plane m = a.channel(0);
  for (Index c = 1; c < a.channels(); ++c) m = m.max(a.channel(c));
  return m;
}

}  // namespace

Tensor3d softmax(const Tensor3d& activations) {
  if (activations.channels() < 2) throw ShapeMismatchError("softmax needs C >= 2");
  check_finite(activations);

  Tensor3d out(activations.height(), activations.width(), activations.channels());
  const auto m = channel_max(activations);
  typename Tensor3d::Plane denom =
      Tensor3d::Plane::Zero(activations.height(), activations.width());
  for (Index c = 0; c < activations.channels(); ++c) {
    out.channel(c) = (activations.channel(c) - m).exp();
    denom += out.channel(c);
  }
  for (Index c = 0; c < activations.channels(); ++c) out.channel(c) /= denom;
  return out;
}

Tensor3d log_softmax(const Tensor3d& activations) {
  if (activations.channels() < 2) throw ShapeMismatchError("softmax needs C >= 2");
  check_finite(activations);

  Tensor3d out(activations.height(), activations.width(), activations.channels());
  const auto m = channel_max(activations);
  typename Tensor3d::Plane denom =
      Tensor3d::Plane::Zero(activations.height(), activations.width());
  for (Index c = 0; c < activations.channels(); ++c) {
    denom += (activations.channel(c) - m).exp();
  }
  const typename Tensor3d::Plane log_denom = denom.log() + m;
  for (Index c = 0; c < activations.channels(); ++c) {
    out.channel(c) = activations.channel(c) - log_denom;
  }
  return out;
}

WeightVector image_weights(const LabelMap& labels, Index num_classes) {
  ClassHistogram hist = class_histogram(labels, num_classes);
  if (hist.valid == 0) throw EmptyImageError("cannot weight an all-void image");

  WeightVector out;
  out.class_counts = hist.counts;
  out.valid_pixels = hist.valid;
  out.weights = Eigen::VectorXd::Zero(num_classes);
  for (Index c = 0; c < num_classes; ++c) {
    // Absent classes keep weight 0; they contribute no loss terms anyway.
    if (hist.counts[c] > 0) {
      out.weights[c] = static_cast<double>(hist.valid) /
                       (static_cast<double>(hist.counts[c]) * static_cast<double>(num_classes));
    }
  }
  return out;
}

WeightVector uniform_weights(const LabelMap& labels, Index num_classes) {
  ClassHistogram hist = class_histogram(labels, num_classes);
  if (hist.valid == 0) throw EmptyImageError("cannot weight an all-void image");
  WeightVector out;
  out.class_counts = hist.counts;
  out.valid_pixels = hist.valid;
  out.weights = Eigen::VectorXd::Ones(num_classes);
  return out;
}

LossValue weighted_loss(const LabelMap& labels, const Tensor3d& activations,
                        const WeightVector& weights) {
  check_loss_shapes(labels, activations, weights);
  const Tensor3d lsm = log_softmax(activations);
  const Index num_classes = activations.channels();

  LossValue loss;
  loss.per_class = Eigen::VectorXd::Zero(num_classes);
  for (Index h = 0; h < labels.rows(); ++h) {
    for (Index w = 0; w < labels.cols(); ++w) {
      const std::int32_t t = labels(h, w);
      if (t == kVoidLabel) continue;
      if (t < 0 || t >= num_classes) {
        throw DataError("label index " + std::to_string(t) + " out of range");
      }
      loss.per_class[t] -= weights.weights[t] * lsm(h, w, t);
      ++loss.valid_pixels;
    }
  }
  if (loss.valid_pixels == 0) throw EmptyImageError("loss undefined for an all-void image");
  loss.total = loss.per_class.sum();
  return loss;
}

Tensor3d loss_gradient(const LabelMap& labels, const Tensor3d& activations,
                       const WeightVector& weights) {
  return loss_and_gradient(labels, activations, weights).second;
}

std::pair<LossValue, Tensor3d> loss_and_gradient(const LabelMap& labels,
                                                 const Tensor3d& activations,
                                                 const WeightVector& weights) {
  check_loss_shapes(labels, activations, weights);
  const Tensor3d lsm = log_softmax(activations);
  const Index num_classes = activations.channels();

  LossValue loss;
  loss.per_class = Eigen::VectorXd::Zero(num_classes);
  Tensor3d grad(activations.height(), activations.width(), num_classes);
  for (Index h = 0; h < labels.rows(); ++h) {
    for (Index w = 0; w < labels.cols(); ++w) {
      const std::int32_t t = labels(h, w);
      if (t == kVoidLabel) continue;  // grad stays exactly zero
      if (t < 0 || t >= num_classes) {
        throw DataError("label index " + std::to_string(t) + " out of range");
      }
      const double wt = weights.weights[t];
      loss.per_class[t] -= wt * lsm(h, w, t);
      ++loss.valid_pixels;
      for (Index c = 0; c < num_classes; ++c) {
        const double p = std::exp(lsm(h, w, c));
        grad(h, w, c) = wt * (p - (c == t ? 1.0 : 0.0));
      }
    }
  }
  if (loss.valid_pixels == 0) throw EmptyImageError("loss undefined for an all-void image");
  loss.total = loss.per_class.sum();
  return {std::move(loss), std::move(grad)};
}

GradCheckReport finite_difference_check(
    const std::function<double(const Eigen::VectorXd&)>& fn,
    const Eigen::VectorXd& analytic_gradient, const Eigen::VectorXd& params,
    Index samples, double epsilon, std::uint64_t seed) {
  if (analytic_gradient.size() != params.size()) {
    throw ShapeMismatchError("gradient length does not match parameter vector");
  }
  const Index n = params.size();
  std::vector<Index> coords(static_cast<std::size_t>(n));
  std::iota(coords.begin(), coords.end(), Index{0});
  if (samples < n) {
    // Partial Fisher-Yates: the first `samples` entries become the sample.
    std::mt19937_64 rng(seed);
    for (Index i = 0; i < samples; ++i) {
      std::uniform_int_distribution<Index> pick(i, n - 1);
      std::swap(coords[static_cast<std::size_t>(i)],
                coords[static_cast<std::size_t>(pick(rng))]);
    }
    coords.resize(static_cast<std::size_t>(samples));
  }

  GradCheckReport report;
  report.samples = static_cast<Index>(coords.size());
  Eigen::VectorXd probe = params;
  for (const Index i : coords) {
    const double saved = probe[i];
    probe[i] = saved + epsilon;
    const double up = fn(probe);
    probe[i] = saved - epsilon;
    const double down = fn(probe);
    probe[i] = saved;

    const double numeric = (up - down) / (2.0 * epsilon);
    const double analytic = analytic_gradient[i];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    const double rel = std::abs(analytic - numeric) / denom;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_coordinate = i;
      report.analytic_at_worst = analytic;
      report.numeric_at_worst = numeric;
    }
  }
  return report;
}

}  // namespace gvseg

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gvseg/labelspace.hpp"
#include "gvseg/loss.hpp"
#include "gvseg/tensor.hpp"

namespace gvseg {

struct NetworkConfig {
  int depth = 2;            // encoder stage count
  int base_channels = 8;    // doubles per stage
  int in_channels = 3;
  int num_classes = 2;
  bool skip_connections = true;
  std::uint64_t seed = 0;   // weight initialization seed
};

// Deterministic flat parameter ordering, stable across runs so checkpoints
// and gradient checks can address coordinates by name.
struct ParamLayout {
  struct Slot {
    std::string name;
    Index offset = 0;
    Index size = 0;
    Index fan_in = 0;  // 0 for biases
  };
  std::vector<Slot> slots;
  Index total = 0;

  const Slot& slot(const std::string& name) const;
};

// Micro encoder-decoder segmentation net. Each encoder stage is
// conv3x3 -> ReLU -> maxpool2x2; each decoder stage is tconv2x2 (stride 2)
// -> add the matching encoder pre-pool feature -> conv3x3 -> ReLU; a final
// 1x1 conv maps to class activations. All passes are hand-derived and
// finite-difference checkable.
class EncoderDecoderNet {
 public:
  explicit EncoderDecoderNet(NetworkConfig config);

  const NetworkConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }

  // Zero biases, kernels from a seeded Gaussian scaled by sqrt(2 / fan_in).
  Eigen::VectorXd init_params() const;

  // Returns H x W x num_classes activations; input H and W must be
  // divisible by 2^depth and carry in_channels channels.
  Tensor3d forward(const Eigen::VectorXd& params, const Tensor3d& image) const;

  // Loss plus the full parameter gradient in layout order.
  std::pair<LossValue, Eigen::VectorXd> backward(const Eigen::VectorXd& params,
                                                 const Tensor3d& image,
                                                 const LabelMap& labels,
                                                 const WeightVector& weights) const;

  // Per-pixel argmax of softmax(forward(...)); ties break toward the lowest
  // class index; never emits void.
  LabelMap predict(const Eigen::VectorXd& params, const Tensor3d& image) const;

 private:
  struct Trace;
  Tensor3d forward_impl(const Eigen::VectorXd& params, const Tensor3d& image,
                        Trace* trace) const;
  void check_input(const Eigen::VectorXd& params, const Tensor3d& image) const;

  Index encoder_channels(int stage) const;  // pre-pool feature channels
  Index decoder_out_channels(int stage) const;

  NetworkConfig config_;
  ParamLayout layout_;
};

LabelMap argmax_labels(const Tensor3d& activations);

}  // namespace gvseg

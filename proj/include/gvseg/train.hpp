#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gvseg/labelspace.hpp"
#include "gvseg/net.hpp"
#include "gvseg/tensor.hpp"

namespace gvseg {

enum class WeightingMode { kPerImageEq2, kUniform };

struct TrainItem {
  std::string id;
  Tensor3d image;   // H x W x in_channels, values in [0, 1]
  LabelMap labels;
};

struct TrainConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  int epochs = 1;
  int batch_size = 8;
  WeightingMode weighting = WeightingMode::kPerImageEq2;
  std::uint64_t seed = 0;   // shuffling seed
  int threads = 1;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;  // summed loss / summed valid pixels
  bool has_val = false;
  double val_mean_iou = 0.0;
};

struct TrainResult {
  Eigen::VectorXd params;
  std::vector<EpochStats> log;
};

// Plain SGD with momentum. The step loss is the batch sum of per-image
// losses divided by the batch valid-pixel count. Per-image weights are
// fixed by the weighting mode before the first epoch. Gradients are
// reduced sequentially by image index, so results do not depend on the
// thread count. Throws DivergenceError when the loss goes non-finite.
TrainResult train(const EncoderDecoderNet& net,
                  const std::vector<TrainItem>& train_items,
                  const std::vector<TrainItem>& val_items,
                  const TrainConfig& config);

}  // namespace gvseg

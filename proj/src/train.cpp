#include "gvseg/train.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <random>

#include "gvseg/metrics.hpp"

namespace gvseg {

namespace {

struct ImageGrad {
  LossValue loss;
  Eigen::VectorXd grad;
};

void validate_items(const std::vector<TrainItem>& items, const NetworkConfig& cfg,
                    const char* what) {
  if (items.empty()) return;
  const Index h = items.front().image.height();
  const Index w = items.front().image.width();
  for (const auto& item : items) {
    if (item.image.height() != h || item.image.width() != w) {
      throw ShapeMismatchError(std::string(what) + " images must all share one size");
    }
    if (item.image.channels() != cfg.in_channels) {
      throw ShapeMismatchError(std::string(what) + " image channel count mismatch");
    }
    if (item.labels.rows() != h || item.labels.cols() != w) {
      throw ShapeMismatchError(std::string(what) + " label map does not match its image");
    }
  }
}

double validation_mean_iou(const EncoderDecoderNet& net, const Eigen::VectorXd& params,
                           const std::vector<TrainItem>& val_items) {
  ConfusionMatrix cm(net.config().num_classes);
  for (const auto& item : val_items) {
    accumulate_confusion(item.labels, net.predict(params, item.image), cm);
  }
  return mean_iou(cm);
}

}  // namespace

TrainResult train(const EncoderDecoderNet& net,
                  const std::vector<TrainItem>& train_items,
                  const std::vector<TrainItem>& val_items,
                  const TrainConfig& config) {
  if (train_items.empty()) throw DataError("no training images");
  if (config.learning_rate <= 0.0) throw DataError("learning rate must be > 0");
  if (config.momentum < 0.0 || config.momentum >= 1.0) {
    throw DataError("momentum must be in [0, 1)");
  }
  if (config.epochs < 1) throw DataError("epochs must be >= 1");
  if (config.batch_size < 1) throw DataError("batch size must be >= 1");
  validate_items(train_items, net.config(), "training");
  validate_items(val_items, net.config(), "validation");

  const Index num_classes = net.config().num_classes;
  std::vector<WeightVector> weights;
  weights.reserve(train_items.size());
  for (const auto& item : train_items) {
    weights.push_back(config.weighting == WeightingMode::kPerImageEq2
                          ? image_weights(item.labels, num_classes)
                          : uniform_weights(item.labels, num_classes));
  }

  Eigen::VectorXd params = net.init_params();
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(params.size());
  std::mt19937_64 shuffle_rng(config.seed);

  std::vector<std::size_t> order(train_items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0.0;
    std::int64_t epoch_valid = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<ImageGrad> per_image(end - start);

      auto compute = [&](std::size_t k) {
        const std::size_t idx = order[start + k];
        auto [loss, grad] =
            net.backward(params, train_items[idx].image, train_items[idx].labels,
                         weights[idx]);
        per_image[k] = ImageGrad{std::move(loss), std::move(grad)};
      };

      try {
        if (config.threads > 1) {
          std::vector<std::future<void>> jobs;
          jobs.reserve(per_image.size());
          for (std::size_t k = 0; k < per_image.size(); ++k) {
            jobs.push_back(std::async(std::launch::async, compute, k));
          }
          for (auto& job : jobs) job.get();
        } else {
          for (std::size_t k = 0; k < per_image.size(); ++k) compute(k);
        }
      } catch (const NumericError&) {
        // exploded parameters surface as non-finite activations downstream
        throw DivergenceError(epoch);
      }

      // Sequential reduction by image index keeps results thread-invariant.
      double batch_loss = 0.0;
      std::int64_t batch_valid = 0;
      Eigen::VectorXd batch_grad = Eigen::VectorXd::Zero(params.size());
      for (const auto& ig : per_image) {
        batch_loss += ig.loss.total;
        batch_valid += ig.loss.valid_pixels;
        batch_grad += ig.grad;
      }
      if (!std::isfinite(batch_loss)) throw DivergenceError(epoch);

      batch_grad /= static_cast<double>(batch_valid);
      velocity = config.momentum * velocity - config.learning_rate * batch_grad;
      params += velocity;

      epoch_loss += batch_loss;
      epoch_valid += batch_valid;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss / static_cast<double>(epoch_valid);
    if (!std::isfinite(stats.train_loss)) throw DivergenceError(epoch);
    if (!val_items.empty()) {
      stats.has_val = true;
      stats.val_mean_iou = validation_mean_iou(net, params, val_items);
    }
    result.log.push_back(stats);
  }

  result.params = std::move(params);
  return result;
}

}  // namespace gvseg

#include "gvseg/net.hpp"

#include <cmath>
#include <random>

#include "gvseg/layers.hpp"

namespace gvseg {

namespace {

std::span<const double> slot_span(const Eigen::VectorXd& params,
                                  const ParamLayout::Slot& slot) {
  return {params.data() + slot.offset, static_cast<std::size_t>(slot.size)};
}

std::span<double> slot_span(Eigen::VectorXd& params, const ParamLayout::Slot& slot) {
  return {params.data() + slot.offset, static_cast<std::size_t>(slot.size)};
}

}  // namespace

const ParamLayout::Slot& ParamLayout::slot(const std::string& name) const {
  for (const auto& s : slots) {
    if (s.name == name) return s;
  }
  throw DataError("unknown parameter slot '" + name + "'");
}

// Encoder stage l produces base * 2^l channels; the decoder mirrors it and
// reduces back toward base_channels on the way up.
Index EncoderDecoderNet::encoder_channels(int stage) const {
  return static_cast<Index>(config_.base_channels) << stage;
}

Index EncoderDecoderNet::decoder_out_channels(int stage) const {
  return stage > 0 ? (static_cast<Index>(config_.base_channels) << (stage - 1))
                   : static_cast<Index>(config_.base_channels);
}

EncoderDecoderNet::EncoderDecoderNet(NetworkConfig config) : config_(config) {
  if (config_.depth < 1) throw DataError("network depth must be >= 1");
  if (config_.base_channels < 1) throw DataError("base channels must be >= 1");
  if (config_.num_classes < 2) throw DataError("network needs >= 2 output classes");
  if (config_.in_channels < 1) throw DataError("network needs >= 1 input channel");

  auto add = [this](const std::string& name, Index size, Index fan_in) {
    layout_.slots.push_back({name, layout_.total, size, fan_in});
    layout_.total += size;
  };

  for (int l = 0; l < config_.depth; ++l) {
    const Index cin = (l == 0) ? config_.in_channels : encoder_channels(l - 1);
    const Index cout = encoder_channels(l);
    add("enc" + std::to_string(l) + ".conv.w", 9 * cin * cout, 9 * cin);
    add("enc" + std::to_string(l) + ".conv.b", cout, 0);
  }
  for (int l = config_.depth - 1; l >= 0; --l) {
    const Index ch = encoder_channels(l);  // tconv keeps the skip's channel count
    add("dec" + std::to_string(l) + ".tconv.w", 4 * ch * ch, 4 * ch);
    add("dec" + std::to_string(l) + ".tconv.b", ch, 0);
    const Index cout = decoder_out_channels(l);
    add("dec" + std::to_string(l) + ".conv.w", 9 * ch * cout, 9 * ch);
    add("dec" + std::to_string(l) + ".conv.b", cout, 0);
  }
  const Index head_in = decoder_out_channels(0);
  add("head.w", head_in * config_.num_classes, head_in);
  add("head.b", config_.num_classes, 0);
}

Eigen::VectorXd EncoderDecoderNet::init_params() const {
  Eigen::VectorXd params = Eigen::VectorXd::Zero(layout_.total);
  std::mt19937_64 rng(config_.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (const auto& slot : layout_.slots) {
    if (slot.fan_in == 0) continue;  // biases stay zero
    const double scale = std::sqrt(2.0 / static_cast<double>(slot.fan_in));
    for (Index i = 0; i < slot.size; ++i) {
      params[slot.offset + i] = scale * gauss(rng);
    }
  }
  return params;
}

void EncoderDecoderNet::check_input(const Eigen::VectorXd& params,
                                    const Tensor3d& image) const {
  if (params.size() != layout_.total) {
    throw ShapeMismatchError("parameter vector size does not match the layout");
  }
  if (image.channels() != config_.in_channels) {
    throw ShapeMismatchError("input channel count mismatch");
  }
  const Index div = Index{1} << config_.depth;
  if (image.height() <= 0 || image.width() <= 0 || image.height() % div != 0 ||
      image.width() % div != 0) {
    throw ShapeMismatchError("input height and width must be divisible by 2^depth");
  }
}

struct EncoderDecoderNet::Trace {
  std::vector<Tensor3d> enc_in;       // conv input per encoder stage
  std::vector<Tensor3d> enc_pre;      // pre-ReLU conv output
  std::vector<Tensor3d> enc_feat;     // post-ReLU, pre-pool (skip source)
  std::vector<Tensor3i> pool_argmax;
  std::vector<Tensor3d> dec_in;       // tconv input per decoder stage
  std::vector<Tensor3d> dec_sum;      // tconv output (+ skip), conv input
  std::vector<Tensor3d> dec_pre;      // pre-ReLU decoder conv output
  Tensor3d head_in;
};

Tensor3d EncoderDecoderNet::forward_impl(const Eigen::VectorXd& params,
                                         const Tensor3d& image, Trace* trace) const {
  check_input(params, image);
  const int depth = config_.depth;
  if (trace) {
    trace->enc_in.resize(depth);
    trace->enc_pre.resize(depth);
    trace->enc_feat.resize(depth);
    trace->pool_argmax.resize(depth);
    trace->dec_in.resize(depth);
    trace->dec_sum.resize(depth);
    trace->dec_pre.resize(depth);
  }

  std::vector<Tensor3d> skips(depth);
  Tensor3d x = image;
  for (int l = 0; l < depth; ++l) {
    const auto& wslot = layout_.slot("enc" + std::to_string(l) + ".conv.w");
    const auto& bslot = layout_.slot("enc" + std::to_string(l) + ".conv.b");
    if (trace) trace->enc_in[l] = x;
    Tensor3d pre = nn::conv3x3_same(x, slot_span(params, wslot), slot_span(params, bslot),
                                    encoder_channels(l));
    Tensor3d feat = nn::relu(pre);
    if (trace) {
      trace->enc_pre[l] = std::move(pre);
      trace->enc_feat[l] = feat;
    }
    skips[l] = trace ? trace->enc_feat[l] : feat;
    x = nn::maxpool2x2(feat, trace ? &trace->pool_argmax[l] : nullptr);
  }

  for (int l = depth - 1; l >= 0; --l) {
    const auto& twslot = layout_.slot("dec" + std::to_string(l) + ".tconv.w");
    const auto& tbslot = layout_.slot("dec" + std::to_string(l) + ".tconv.b");
    const auto& cwslot = layout_.slot("dec" + std::to_string(l) + ".conv.w");
    const auto& cbslot = layout_.slot("dec" + std::to_string(l) + ".conv.b");
    if (trace) trace->dec_in[l] = x;
    Tensor3d up = nn::tconv2x2_stride2(x, slot_span(params, twslot),
                                       slot_span(params, tbslot), encoder_channels(l));
    if (config_.skip_connections) {
      up.flat() += skips[l].flat();
    }
    if (trace) trace->dec_sum[l] = up;
    Tensor3d pre = nn::conv3x3_same(up, slot_span(params, cwslot),
                                    slot_span(params, cbslot), decoder_out_channels(l));
    x = nn::relu(pre);
    if (trace) trace->dec_pre[l] = std::move(pre);
  }

  if (trace) trace->head_in = x;
  const auto& hw = layout_.slot("head.w");
  const auto& hb = layout_.slot("head.b");
  return nn::conv1x1(x, slot_span(params, hw), slot_span(params, hb),
                     config_.num_classes);
}

Tensor3d EncoderDecoderNet::forward(const Eigen::VectorXd& params,
                                    const Tensor3d& image) const {
  return forward_impl(params, image, nullptr);
}

std::pair<LossValue, Eigen::VectorXd> EncoderDecoderNet::backward(
    const Eigen::VectorXd& params, const Tensor3d& image, const LabelMap& labels,
    const WeightVector& weights) const {
  Trace trace;
  const Tensor3d activations = forward_impl(params, image, &trace);
  auto [loss, dact] = loss_and_gradient(labels, activations, weights);

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(layout_.total);
  const int depth = config_.depth;

  const auto& hw = layout_.slot("head.w");
  const auto& hb = layout_.slot("head.b");
  Tensor3d dx;
  nn::conv1x1_backward(trace.head_in, slot_span(params, hw), dact, &dx,
                       slot_span(grad, hw), slot_span(grad, hb));

  // Decoder stages in reverse execution order (shallowest first).
  std::vector<Tensor3d> skip_grads(depth);
  for (int l = 0; l < depth; ++l) {
    const auto& twslot = layout_.slot("dec" + std::to_string(l) + ".tconv.w");
    const auto& tbslot = layout_.slot("dec" + std::to_string(l) + ".tconv.b");
    const auto& cwslot = layout_.slot("dec" + std::to_string(l) + ".conv.w");
    const auto& cbslot = layout_.slot("dec" + std::to_string(l) + ".conv.b");

    Tensor3d dpre = nn::relu_backward(dx, trace.dec_pre[l]);
    Tensor3d dsum;
    nn::conv3x3_same_backward(trace.dec_sum[l], slot_span(params, cwslot), dpre, &dsum,
                              slot_span(grad, cwslot), slot_span(grad, cbslot));
    if (config_.skip_connections) skip_grads[l] = dsum;
    nn::tconv2x2_stride2_backward(trace.dec_in[l], slot_span(params, twslot), dsum, &dx,
                                  slot_span(grad, twslot), slot_span(grad, tbslot));
  }

  // dx now holds the gradient at the bottleneck (deepest pooled output).
  for (int l = depth - 1; l >= 0; --l) {
    const auto& wslot = layout_.slot("enc" + std::to_string(l) + ".conv.w");
    const auto& bslot = layout_.slot("enc" + std::to_string(l) + ".conv.b");

    Tensor3d dfeat = nn::maxpool2x2_backward(dx, trace.pool_argmax[l],
                                             trace.enc_feat[l].height(),
                                             trace.enc_feat[l].width());
    if (config_.skip_connections) {
      dfeat.flat() += skip_grads[l].flat();
    }
    Tensor3d dpre = nn::relu_backward(dfeat, trace.enc_pre[l]);
    nn::conv3x3_same_backward(trace.enc_in[l], slot_span(params, wslot), dpre,
                              l > 0 ? &dx : nullptr, slot_span(grad, wslot),
                              slot_span(grad, bslot));
  }

  return {std::move(loss), std::move(grad)};
}

LabelMap argmax_labels(const Tensor3d& activations) {
  LabelMap out(activations.height(), activations.width());
  for (Index h = 0; h < activations.height(); ++h) {
    for (Index w = 0; w < activations.width(); ++w) {
      Index best = 0;
      double best_v = activations(h, w, 0);
      for (Index c = 1; c < activations.channels(); ++c) {
        const double v = activations(h, w, c);
        if (v > best_v) {  // strict: ties break toward the lowest index
          best_v = v;
          best = c;
        }
      }
      out(h, w) = static_cast<std::int32_t>(best);
    }
  }
  return out;
}

LabelMap EncoderDecoderNet::predict(const Eigen::VectorXd& params,
                                    const Tensor3d& image) const {
  // argmax over softmax equals argmax over activations (softmax is monotone).
  return argmax_labels(forward(params, image));
}

}  // namespace gvseg

#include "koa/gan/spec_network.hpp"

#include "koa/common/errors.hpp"

namespace koa::gan {
namespace F = torch::nn::functional;

namespace {

// TensorFlow "same" split of the total padding: floor half before, remainder after.
std::pair<std::int64_t, std::int64_t> same_padding(std::int64_t in, int kernel, int stride) {
  const std::int64_t out = (in + stride - 1) / stride;
  const std::int64_t total = std::max<std::int64_t>((out - 1) * stride + kernel - in, 0);
  return {total / 2, total - total / 2};
}

}  // namespace

SpecNetworkImpl::SpecNetworkImpl(NetworkSpec spec, double leaky_slope, double norm_eps)
    : spec_(std::move(spec)), leaky_slope_(leaky_slope) {
  check_consistency(spec_);
  slot_.assign(spec_.layers.size(), -1);
  int in_channels = spec_.layers.front().output.c;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const auto& l = spec_.layers[i];
    const auto name = "layer" + std::to_string(i);
    switch (l.kind) {
      case LayerKind::Conv:
        slot_[i] = static_cast<int>(convs_.size());
        convs_.push_back(register_module(
            name, torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, l.filters, l.kernel).stride(l.stride).bias(l.bias))));
        break;
      case LayerKind::ConvTranspose:
        slot_[i] = static_cast<int>(transposed_.size());
        transposed_.push_back(register_module(
            name, torch::nn::ConvTranspose2d(
                      torch::nn::ConvTranspose2dOptions(in_channels, l.filters, l.kernel).stride(l.stride).bias(l.bias))));
        break;
      case LayerKind::InstanceNorm:
        slot_[i] = static_cast<int>(norms_.size());
        norms_.push_back(register_module(
            name, torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(l.output.c).eps(norm_eps).affine(true))));
        break;
      default:
        break;
    }
    in_channels = l.output.c;
  }
  reset_weights();
  if (parameter_count() != spec_.total_params) {
    throw ShapeError(spec_.name + ": module has " + std::to_string(parameter_count()) + " parameters, spec declares " +
                     std::to_string(spec_.total_params));
  }
}

std::int64_t SpecNetworkImpl::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : parameters()) n += p.numel();
  return n;
}

void SpecNetworkImpl::reset_weights() {
  torch::NoGradGuard no_grad;
  for (auto& c : convs_) {
    c->weight.normal_(0.0, 0.02);
    if (c->bias.defined()) c->bias.zero_();
  }
  for (auto& c : transposed_) {
    c->weight.normal_(0.0, 0.02);
    if (c->bias.defined()) c->bias.zero_();
  }
  for (auto& n : norms_) {
    n->weight.normal_(1.0, 0.02);
    n->bias.zero_();
  }
}

torch::Tensor SpecNetworkImpl::forward(torch::Tensor x) {
  if (x.dim() != 4 || x.size(1) != spec_.layers.front().output.c) {
    throw ShapeError(spec_.name + ": expected NCHW input with " + std::to_string(spec_.layers.front().output.c) +
                     " channel(s)");
  }
  std::vector<torch::Tensor> outputs(spec_.layers.size());
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const auto& l = spec_.layers[i];
    switch (l.kind) {
      case LayerKind::Input:
        break;
      case LayerKind::ReflectionPad:
        x = F::pad(x, F::PadFuncOptions({l.pad, l.pad, l.pad, l.pad}).mode(torch::kReflect));
        break;
      case LayerKind::Conv: {
        if (l.padding == Padding::Same) {
          const auto [top, bottom] = same_padding(x.size(2), l.kernel, l.stride);
          const auto [left, right] = same_padding(x.size(3), l.kernel, l.stride);
          if (top + bottom + left + right > 0) x = F::pad(x, F::PadFuncOptions({left, right, top, bottom}));
        }
        x = convs_[static_cast<std::size_t>(slot_[i])]->forward(x);
        break;
      }
      case LayerKind::ConvTranspose: {
        const auto h = x.size(2), w = x.size(3);
        x = transposed_[static_cast<std::size_t>(slot_[i])]->forward(x);
        const auto crop_h = x.size(2) - h * l.stride;
        const auto crop_w = x.size(3) - w * l.stride;
        x = x.narrow(2, crop_h / 2, h * l.stride).narrow(3, crop_w / 2, w * l.stride);
        break;
      }
      case LayerKind::InstanceNorm:
        x = norms_[static_cast<std::size_t>(slot_[i])]->forward(x);
        break;
      case LayerKind::Activation:
        break;
      case LayerKind::Add:
        x = x + outputs[static_cast<std::size_t>(l.skip_from)];
        break;
    }
    if (l.kind == LayerKind::Conv || l.kind == LayerKind::Activation) {
      switch (l.activation) {
        case Activation::ReLU:
          x = torch::relu(x);
          break;
        case Activation::LeakyReLU:
          x = F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(leaky_slope_));
          break;
        case Activation::Tanh:
          x = torch::tanh(x);
          break;
        case Activation::Linear:
          break;
      }
    }
    outputs[i] = x;
  }
  return x;
}

}  // namespace koa::gan

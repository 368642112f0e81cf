#include "koa/classifier/blocks.hpp"

#include <cmath>

#include "koa/common/errors.hpp"

namespace koa::cnn {

int round_width(double width) {
  constexpr int divisor = 8;
  int w = std::max(divisor, static_cast<int>(width + divisor / 2.0) / divisor * divisor);
  if (w < 0.9 * width) w += divisor;
  return w;
}

ScaledDims compound_scale(const ScalingConfig& c) {
  if (!(c.alpha >= 1.0 && c.beta >= 1.0 && c.gamma >= 1.0)) throw DomainError("compound_scale: coefficients must be >= 1");
  if (!(c.phi >= 0.0)) throw DomainError("compound_scale: phi must be non-negative");
  if (c.d0 <= 0 || c.w0 <= 0 || c.r0 <= 0) throw DomainError("compound_scale: base dimensions must be positive");
  // The small tolerance keeps exact products such as 2^2 * 3 from rounding up to 13.
  const double d = std::pow(c.alpha, c.phi) * c.d0;
  return {static_cast<int>(std::ceil(d - 1e-9 * d)), round_width(std::pow(c.beta, c.phi) * c.w0),
          static_cast<int>(std::lround(std::pow(c.gamma, c.phi) * c.r0))};
}

std::string_view block_kind_name(BlockKind k) noexcept { return k == BlockKind::MBConv ? "MBConv" : "FusedMBConv"; }

int BlockSpec::se_channels() const {
  const int s = static_cast<int>(std::floor(mid_channels() * se_ratio));
  if (s < 1) throw DomainError("block: squeeze-and-excitation bottleneck below one channel");
  return s;
}

SqueezeExciteImpl::SqueezeExciteImpl(int channels, int squeezed) {
  if (squeezed < 1) throw DomainError("squeeze-and-excitation: bottleneck below one channel");
  reduce = register_module("reduce", torch::nn::Linear(channels, squeezed));
  expand = register_module("expand", torch::nn::Linear(squeezed, channels));
}

torch::Tensor SqueezeExciteImpl::forward(const torch::Tensor& x) {
  auto s = x.mean({2, 3});
  s = torch::sigmoid(expand->forward(torch::relu(reduce->forward(s))));
  return x * s.unsqueeze(-1).unsqueeze(-1);
}

MBBlockImpl::MBBlockImpl(const BlockSpec& spec) : spec_(spec) {
  if (spec.in_channels <= 0 || spec.out_channels <= 0 || spec.expansion <= 0 || spec.stride <= 0 || spec.kernel % 2 == 0) {
    throw DomainError("block: invalid spec");
  }
  const int mid = spec.mid_channels();
  const int pad = spec.kernel / 2;
  using torch::nn::Conv2dOptions;
  if (spec.kind == BlockKind::MBConv) {
    expand = register_module("expand", torch::nn::Conv2d(Conv2dOptions(spec.in_channels, mid, 1)));
    depthwise = register_module(
        "depthwise", torch::nn::Conv2d(Conv2dOptions(mid, mid, spec.kernel).stride(spec.stride).padding(pad).groups(mid)));
  } else {
    expand = register_module(
        "expand", torch::nn::Conv2d(Conv2dOptions(spec.in_channels, mid, spec.kernel).stride(spec.stride).padding(pad)));
  }
  se = register_module("se", SqueezeExcite(mid, spec.se_channels()));
  project = register_module("project", torch::nn::Conv2d(Conv2dOptions(mid, spec.out_channels, 1)));
}

torch::Tensor MBBlockImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != spec_.in_channels) {
    throw ShapeError(std::string(block_kind_name(spec_.kind)) + ": expected " + std::to_string(spec_.in_channels) +
                     " input channels");
  }
  auto h = torch::silu(expand->forward(x));
  if (depthwise) h = torch::silu(depthwise->forward(h));
  h = project->forward(se->forward(h));
  return spec_.has_skip() ? h + x : h;
}

}  // namespace koa::cnn

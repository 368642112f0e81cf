#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string_view>

namespace koa::cnn {

struct ScalingConfig {
  double alpha = 1.2;  // depth
  double beta = 1.1;   // width
  double gamma = 1.15; // resolution
  double phi = 0.0;
  int d0 = 1;
  int w0 = 16;
  int r0 = 64;
};

struct ScaledDims {
  int depth = 0;
  int width = 0;
  int resolution = 0;
  friend bool operator==(const ScaledDims&, const ScaledDims&) = default;
};

// d = ceil(alpha^phi * d0); w = beta^phi * w0 rounded to the nearest multiple of 8 (never
// below 8, never more than 10% under the unrounded value); r = round(gamma^phi * r0).
// Throws DomainError when a coefficient is below 1, phi is negative or a base is not positive.
ScaledDims compound_scale(const ScalingConfig& cfg);

int round_width(double width);

enum class BlockKind { MBConv, FusedMBConv };

std::string_view block_kind_name(BlockKind k) noexcept;

struct BlockSpec {
  BlockKind kind = BlockKind::MBConv;
  int expansion = 4;
  double se_ratio = 0.25;
  int in_channels = 0;
  int out_channels = 0;
  int stride = 1;
  int kernel = 3;

  bool has_skip() const noexcept { return stride == 1 && in_channels == out_channels; }
  int mid_channels() const noexcept { return in_channels * expansion; }
  // floor(mid_channels * se_ratio); must be at least 1.
  int se_channels() const;
};

// Squeeze-and-excitation: global average pool, dense bottleneck with ReLU, dense with
// sigmoid, per-channel gate.
class SqueezeExciteImpl : public torch::nn::Module {
 public:
  SqueezeExciteImpl(int channels, int squeezed);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Linear reduce{nullptr};
  torch::nn::Linear expand{nullptr};
};
TORCH_MODULE(SqueezeExcite);

// MBConv:       1x1 expand -> SiLU -> depthwise kxk (stride) -> SiLU -> SE -> 1x1 project
// Fused-MBConv: kxk expand (stride) -> SiLU -> SE -> 1x1 project
// Every convolution carries a bias (no batch normalization); the projection is linear.
// The input is added back when has_skip().
class MBBlockImpl : public torch::nn::Module {
 public:
  explicit MBBlockImpl(const BlockSpec& spec);
  torch::Tensor forward(const torch::Tensor& x);

  const BlockSpec& spec() const noexcept { return spec_; }

  torch::nn::Conv2d expand{nullptr};
  torch::nn::Conv2d depthwise{nullptr};  // MBConv only
  SqueezeExcite se{nullptr};
  torch::nn::Conv2d project{nullptr};

 private:
  BlockSpec spec_;
};
TORCH_MODULE(MBBlock);

// Output spatial extent of a block: ceil(in / stride).
inline std::int64_t block_output_extent(std::int64_t in, int stride) { return (in + stride - 1) / stride; }

}  // namespace koa::cnn

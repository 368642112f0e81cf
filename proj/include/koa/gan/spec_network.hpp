#pragma once

#include <torch/torch.h>

#include <vector>

#include "koa/gan/network_spec.hpp"

namespace koa::gan {

// Executes a NetworkSpec layer by layer, so the parameters always match the declared
// architecture. Input and output are NCHW.
//
// "same" padding follows the TensorFlow convention the tables were printed with: for
// convolutions the odd extra pixel goes after (bottom/right), and transposed convolutions
// are computed at full size and cropped the same way.
class SpecNetworkImpl : public torch::nn::Module {
 public:
  SpecNetworkImpl(NetworkSpec spec, double leaky_slope = 0.2, double norm_eps = 1e-5);

  torch::Tensor forward(torch::Tensor x);

  const NetworkSpec& spec() const noexcept { return spec_; }
  std::int64_t parameter_count() const;

  // Conv kernels ~ N(0, 0.02), biases 0, instance-norm scale ~ N(1, 0.02), offset 0.
  void reset_weights();

 private:
  NetworkSpec spec_;
  double leaky_slope_;
  std::vector<torch::nn::Conv2d> convs_;
  std::vector<torch::nn::ConvTranspose2d> transposed_;
  std::vector<torch::nn::InstanceNorm2d> norms_;
  // Index into the module vector of each layer's kind, -1 for parameter-free layers.
  std::vector<int> slot_;
};

TORCH_MODULE(SpecNetwork);

}  // namespace koa::gan

#pragma once

#include <torch/torch.h>

#include <optional>

namespace koa::gan {

enum class AdversarialRole { Discriminator, Generator };

// Least-squares patch loss.
//   Discriminator: mean((d_real - 1)^2) + mean(d_fake^2)
//   Generator:     mean((d_fake - 1)^2)           (d_real unused)
// Throws NumericError on non-finite patch maps.
torch::Tensor adversarial_loss(const std::optional<torch::Tensor>& d_real, const torch::Tensor& d_fake,
                               AdversarialRole role);

// mean|x_rec - x| + mean|y_rec - y|
torch::Tensor cycle_loss(const torch::Tensor& x, const torch::Tensor& x_rec, const torch::Tensor& y,
                         const torch::Tensor& y_rec);

// mean|g_of_y - y|
torch::Tensor identity_loss(const torch::Tensor& g_of_y, const torch::Tensor& y);

// Per-batch terms of the generator objective. G maps X -> Y, F maps Y -> X.
struct GeneratorLossParts {
  torch::Tensor adv_g;       // LSGAN(D_Y(G(x)))
  torch::Tensor adv_f;       // LSGAN(D_X(F(y)))
  torch::Tensor cycle_x;     // mean|F(G(x)) - x|
  torch::Tensor cycle_y;     // mean|G(F(y)) - y|
  torch::Tensor identity_g;  // mean|G(y) - y|
  torch::Tensor identity_f;  // mean|F(x) - x|
};

struct LossWeights {
  double lambda_cycle = 10.0;
  // Multiplier of each identity term (lambda_identity * lambda_cycle by default).
  double identity = 5.0;
};

// adv_g + adv_f + lambda_cycle * (cycle_x + cycle_y) + identity * (identity_g + identity_f)
torch::Tensor total_generator_loss(const GeneratorLossParts& parts, const LossWeights& weights);

// Share of the total attributed to each generator:
//   G: adv_g + lambda_cycle * cycle_x + identity * identity_g
//   F: adv_f + lambda_cycle * cycle_y + identity * identity_f
torch::Tensor generator_g_loss(const GeneratorLossParts& parts, const LossWeights& weights);
torch::Tensor generator_f_loss(const GeneratorLossParts& parts, const LossWeights& weights);

}  // namespace koa::gan

#include "koa/gan/losses.hpp"

#include <sstream>

#include "koa/common/errors.hpp"

namespace koa::gan {
namespace {

void require_finite(const torch::Tensor& t, const char* what) {
  if (!torch::isfinite(t).all().item<bool>()) throw NumericError(std::string(what) + " contains non-finite values");
}

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.sizes() != b.sizes()) {
    std::ostringstream os;
    os << what << ": shape " << a.sizes() << " vs " << b.sizes();
    throw ShapeError(os.str());
  }
}

}  // namespace

torch::Tensor adversarial_loss(const std::optional<torch::Tensor>& d_real, const torch::Tensor& d_fake,
                               AdversarialRole role) {
  require_finite(d_fake, "fake patch map");
  if (role == AdversarialRole::Generator) return (d_fake - 1.0).pow(2).mean();
  if (!d_real) throw DomainError("discriminator loss needs the real patch map");
  require_finite(*d_real, "real patch map");
  return (*d_real - 1.0).pow(2).mean() + d_fake.pow(2).mean();
}

torch::Tensor cycle_loss(const torch::Tensor& x, const torch::Tensor& x_rec, const torch::Tensor& y,
                         const torch::Tensor& y_rec) {
  require_same_shape(x, x_rec, "cycle loss (domain X)");
  require_same_shape(y, y_rec, "cycle loss (domain Y)");
  return (x_rec - x).abs().mean() + (y_rec - y).abs().mean();
}

torch::Tensor identity_loss(const torch::Tensor& g_of_y, const torch::Tensor& y) {
  require_same_shape(g_of_y, y, "identity loss");
  return (g_of_y - y).abs().mean();
}

torch::Tensor generator_g_loss(const GeneratorLossParts& p, const LossWeights& w) {
  return p.adv_g + w.lambda_cycle * p.cycle_x + w.identity * p.identity_g;
}

torch::Tensor generator_f_loss(const GeneratorLossParts& p, const LossWeights& w) {
  return p.adv_f + w.lambda_cycle * p.cycle_y + w.identity * p.identity_f;
}

torch::Tensor total_generator_loss(const GeneratorLossParts& p, const LossWeights& w) {
  return p.adv_g + p.adv_f + w.lambda_cycle * (p.cycle_x + p.cycle_y) + w.identity * (p.identity_g + p.identity_f);
}

}  // namespace koa::gan

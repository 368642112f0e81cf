#pragma once

#include <torch/torch.h>

#include "grad_check.hpp"
#include "koa/gan/cycle_gan.hpp"

namespace test_oracle {

struct GanGradCheck {
  GradCheckResult generators;
  GradCheckResult discriminators;
};

// Miniature CycleGAN (8x8 images, 8 filters, 1 residual block) in double precision.
// Analytic gradients come from the library's loss assembly and autograd; the numeric side
// re-assembles the objective here, recomputing only the terms that depend on the perturbed
// network. Batches are concatenated through a single generator pass, which is exact
// because instance normalization is per sample.
inline GanGradCheck gan_gradient_check(std::int64_t stride, double h = 1e-6, double floor = 1e-6) {
  using namespace koa::gan;
  torch::set_num_threads(1);
  CycleGanConfig cfg;
  cfg.image_size = 8;
  cfg.base_filters = 8;
  cfg.disc_base_filters = 8;
  cfg.residual_blocks = 1;
  cfg.batch_size = 1;
  CycleTrainState state(cfg, 20240611);
  auto& n = state.nets;
  n.to(torch::kFloat64);
  const auto w = state.weights();
  // Zero-initialised offsets put the 1x1 instance-norm outputs of the 8x8 discriminator
  // exactly on the LeakyReLU kink; move to a generic point.
  torch::manual_seed(98);
  {
    torch::NoGradGuard ng;
    for (auto* net : {&n.g, &n.f, &n.d_x, &n.d_y}) {
      for (auto& kv : (*net)->named_parameters()) {
        if (kv.key().ends_with("bias")) kv.value().normal_(0.0, 0.1);
      }
    }
  }

  torch::manual_seed(99);
  const auto x = torch::rand({1, 1, 8, 8}, torch::kFloat64) * 2 - 1;
  const auto y = torch::rand({1, 1, 8, 8}, torch::kFloat64) * 2 - 1;

  auto parts = generator_loss_parts(n, x, y);
  for (auto& p : n.g->parameters()) p.mutable_grad() = torch::Tensor();
  for (auto& p : n.f->parameters()) p.mutable_grad() = torch::Tensor();
  total_generator_loss(parts, w).backward();

  torch::Tensor fake_x, fake_y;
  {
    torch::NoGradGuard ng;
    fake_x = n.f->forward(y);
    fake_y = n.g->forward(x);
  }
  for (auto& p : n.d_x->parameters()) p.mutable_grad() = torch::Tensor();
  for (auto& p : n.d_y->parameters()) p.mutable_grad() = torch::Tensor();
  auto d = discriminator_losses(n, x, y, fake_x, fake_y);
  (d.d_x + d.d_y).backward();

  auto l1 = [](const torch::Tensor& a, const torch::Tensor& b) { return (a - b).abs().mean(); };
  auto ls = [](const torch::Tensor& t, double target) { return (t - target).pow(2).mean(); };

  GanGradCheck out;
  // G-dependent part of the objective: adv_g, both cycle terms, identity_g.
  auto g_loss = [&] {
    const auto fy = n.f->forward(y);
    const auto o = n.g->forward(torch::cat({x, fy, y}));
    const auto gx = o.narrow(0, 0, 1), gfy = o.narrow(0, 1, 1), gy = o.narrow(0, 2, 1);
    return (ls(n.d_y->forward(gx), 1.0) + w.lambda_cycle * (l1(n.f->forward(gx), x) + l1(gfy, y)) +
            w.identity * l1(gy, y))
        .item<double>();
  };
  auto f_loss = [&] {
    const auto gx = n.g->forward(x);
    const auto o = n.f->forward(torch::cat({y, gx, x}));
    const auto fy = o.narrow(0, 0, 1), fgx = o.narrow(0, 1, 1), fx = o.narrow(0, 2, 1);
    return (ls(n.d_x->forward(fy), 1.0) + w.lambda_cycle * (l1(fgx, x) + l1(n.g->forward(fy), y)) +
            w.identity * l1(fx, x))
        .item<double>();
  };
  out.generators = check_gradients(named("G", n.g), g_loss, h, floor, stride);
  auto fr = check_gradients(named("F", n.f), f_loss, h, floor, stride);
  out.generators.checked += fr.checked;
  if (fr.max_rel_error > out.generators.max_rel_error) {
    out.generators.max_rel_error = fr.max_rel_error;
    out.generators.worst = fr.worst;
  }

  auto dx_loss = [&] {
    const auto o = n.d_x->forward(torch::cat({x, fake_x}));
    return (ls(o.narrow(0, 0, 1), 1.0) + ls(o.narrow(0, 1, 1), 0.0)).item<double>();
  };
  auto dy_loss = [&] {
    const auto o = n.d_y->forward(torch::cat({y, fake_y}));
    return (ls(o.narrow(0, 0, 1), 1.0) + ls(o.narrow(0, 1, 1), 0.0)).item<double>();
  };
  out.discriminators = check_gradients(named("D_X", n.d_x), dx_loss, h, floor, stride);
  auto dr = check_gradients(named("D_Y", n.d_y), dy_loss, h, floor, stride);
  out.discriminators.checked += dr.checked;
  if (dr.max_rel_error > out.discriminators.max_rel_error) {
    out.discriminators.max_rel_error = dr.max_rel_error;
    out.discriminators.worst = dr.worst;
  }
  return out;
}

}  // namespace test_oracle

#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "koa/common/image.hpp"
#include "koa/gan/losses.hpp"
#include "koa/gan/network_spec.hpp"
#include "koa/gan/spec_network.hpp"

namespace koa::gan {

// X is the NoneDoubtful domain, Y the ModerateSevere domain. G: X -> Y, F: Y -> X.
enum class Direction { TowardFuture, TowardPast };

std::string_view direction_name(Direction d) noexcept;
Direction parse_direction(std::string_view s);

struct CycleNetworks {
  SpecNetwork g{nullptr};
  SpecNetwork f{nullptr};
  SpecNetwork d_x{nullptr};
  SpecNetwork d_y{nullptr};

  static CycleNetworks build(const CycleGanConfig& cfg);
  void to(torch::Dtype dtype);
  void train(bool on);
};

// Scalar value of every loss term of one batch (or the mean over the batches of an epoch).
struct LossRecord {
  double adv_g = 0;
  double adv_f = 0;
  double cycle = 0;
  double identity_g = 0;
  double identity_f = 0;
  double g_total = 0;  // G's share of the generator objective
  double f_total = 0;  // F's share
  double total = 0;    // full generator objective
  double d_x = 0;
  double d_y = 0;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  LossRecord train;
  LossRecord validation;
};

// Forward pass of both generators and discriminators on one batch pair (values in [-1, 1]).
GeneratorLossParts generator_loss_parts(CycleNetworks& nets, const torch::Tensor& x, const torch::Tensor& y);

struct DiscriminatorLosses {
  torch::Tensor d_x;
  torch::Tensor d_y;
};

// Discriminator objectives given the generated batches (detached internally).
DiscriminatorLosses discriminator_losses(CycleNetworks& nets, const torch::Tensor& x, const torch::Tensor& y,
                                         const torch::Tensor& fake_x, const torch::Tensor& fake_y);

class CycleTrainState {
 public:
  CycleTrainState(const CycleGanConfig& cfg, std::uint64_t seed);

  const CycleGanConfig& config() const noexcept { return cfg_; }
  LossWeights weights() const noexcept { return {cfg_.lambda_cycle, cfg_.identity_weight()}; }
  std::uint64_t seed() const noexcept { return seed_; }

  CycleNetworks nets;
  torch::optim::Adam opt_g;
  torch::optim::Adam opt_f;
  torch::optim::Adam opt_dx;
  torch::optim::Adam opt_dy;
  int epoch = 0;  // completed epochs
  std::vector<EpochRecord> history;

 private:
  CycleGanConfig cfg_;
  std::uint64_t seed_;
};

// One Adam update of each of the four networks. Generators step on the total generator
// objective, then each discriminator on its adversarial loss against the same fakes.
// Throws NumericError naming the first non-finite term.
LossRecord train_step(CycleTrainState& state, const torch::Tensor& batch_x, const torch::Tensor& batch_y);

// Loss terms without any update, averaged over batches of `batch_size`.
LossRecord evaluate_losses(CycleNetworks& nets, const LossWeights& w, const torch::Tensor& x, const torch::Tensor& y,
                           int batch_size);

// Epoch (1-based) minimising G + F validation totals; ties go to the earliest epoch.
int select_checkpoint(const std::vector<EpochRecord>& history);

// uint8 images -> N x 1 x H x W float tensor in [-1, 1].
torch::Tensor to_model_range(const std::vector<GrayImage>& images);
torch::Tensor to_model_range(const GrayImage& image);
// Inverse mapping with rounding and clamping.
GrayImage from_model_range(const torch::Tensor& t);

// Applies G (TowardFuture) or F (TowardPast) to a single image.
GrayImage transform(const GrayImage& img, Direction direction, CycleNetworks& nets);
// Same contract with an arbitrary network; used with stubs in tests.
GrayImage transform_with(const GrayImage& img, const std::function<torch::Tensor(const torch::Tensor&)>& net);

struct GanTrainOptions {
  std::int64_t max_steps = -1;  // cap on total steps, -1 for none
  // Called after every epoch with the state already holding the new history row.
  std::function<void(const CycleTrainState&)> on_epoch;
};

// Runs state.config().epochs epochs (or until max_steps). Batches are drawn from per-epoch
// shuffles of both domains; an epoch has min(|X|, |Y|) / batch_size steps.
void train_cycle_gan(CycleTrainState& state, const torch::Tensor& train_x, const torch::Tensor& train_y,
                     const torch::Tensor& val_x, const torch::Tensor& val_y, const GanTrainOptions& opts = {});

// Versioned container: config, seed, epoch, history, four networks, four optimizers.
// `provenance` is stored verbatim (run config hash and seed when written by the CLI).
void save_checkpoint(const CycleTrainState& state, const std::filesystem::path& path,
                     const std::string& provenance = "");
std::unique_ptr<CycleTrainState> load_checkpoint(const std::filesystem::path& path);

std::string config_to_json(const CycleGanConfig& cfg);
CycleGanConfig config_from_json(const std::string& text);

}  // namespace koa::gan

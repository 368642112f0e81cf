#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "koa/classifier/blocks.hpp"
#include "koa/common/image.hpp"
#include "koa/dataset/records.hpp"

namespace koa::cnn {

// A group of identical blocks; only the first applies the stride and channel change.
struct StageSpec {
  BlockKind kind = BlockKind::MBConv;
  int expansion = 4;
  double se_ratio = 0.25;
  int out_channels = 16;
  int stride = 1;
  int layers = 1;
};

struct Augmentation {
  double max_rotation_deg = 5.0;
  double max_translation = 0.05;  // fraction of the image side
  double max_brightness = 0.10;   // relative gain
  bool enabled = true;
};

struct ClassifierConfig {
  int image_size = 64;
  int stem_channels = 16;
  // Two Fused-MBConv stages then two MBConv stages.
  std::vector<StageSpec> stages = {
      {BlockKind::FusedMBConv, 1, 0.25, 16, 1, 1},
      {BlockKind::FusedMBConv, 4, 0.25, 24, 2, 2},
      {BlockKind::MBConv, 4, 0.25, 32, 2, 2},
      {BlockKind::MBConv, 4, 0.25, 48, 1, 1},
  };
  // Compound scaling of the plan: depth multiplies stage layers, width the channels.
  double depth_coefficient = 1.0;
  double width_coefficient = 1.0;
  int head_units = 256;
  double lr = 2e-5;
  int batch_size = 32;
  int max_epochs = 15;
  int patience = 4;
  Augmentation augmentation;

  void validate() const;
};

// Block list after depth/width scaling, with channel chaining resolved.
std::vector<BlockSpec> expand_plan(const ClassifierConfig& cfg);

// Stem (3x3 stride-2 conv, SiLU) -> blocks -> flatten -> dense(head_units, ELU) -> dense(3).
// The block output is the pre-flattening feature map used by Grad-CAM.
class ClassifierNetImpl : public torch::nn::Module {
 public:
  explicit ClassifierNetImpl(const ClassifierConfig& cfg);

  torch::Tensor forward(const torch::Tensor& x);  // logits
  torch::Tensor features(const torch::Tensor& x); // pre-flattening map
  torch::Tensor head(const torch::Tensor& features);
  torch::Tensor embed(const torch::Tensor& x);    // dense-layer activations

  const ClassifierConfig& config() const noexcept { return cfg_; }
  std::int64_t parameter_count() const;

  torch::nn::Conv2d stem{nullptr};
  torch::nn::Sequential blocks{nullptr};
  torch::nn::Linear dense{nullptr};
  torch::nn::Linear logits{nullptr};

 private:
  ClassifierConfig cfg_;
};
TORCH_MODULE(ClassifierNet);

using Probabilities = std::array<double, data::kNumStages>;

// Numerically stable softmax of a logit triple.
Probabilities softmax3(const std::array<double, data::kNumStages>& logits);

// uint8 images -> N x 1 x H x W in [-1, 1].
torch::Tensor images_to_tensor(const std::vector<GrayImage>& images);

struct LabeledSet {
  std::vector<GrayImage> images;
  std::vector<data::Stage> labels;
};

struct ClassifierEpoch {
  int epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_accuracy = 0;
};

// Patience bookkeeping on validation loss; the best epoch is the earliest minimum.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}
  // Returns true when training should stop after this epoch.
  bool update(int epoch, double val_loss);
  int best_epoch() const noexcept { return best_epoch_; }
  double best_loss() const noexcept { return best_loss_; }
  bool improved_last() const noexcept { return improved_last_; }

 private:
  int patience_;
  int best_epoch_ = 0;
  double best_loss_ = 0;
  int since_best_ = 0;
  bool improved_last_ = false;
};

struct TrainedClassifier {
  ClassifierNet model{nullptr};
  std::vector<ClassifierEpoch> history;
  int best_epoch = 0;
  bool stopped_early = false;
};

// Adam on categorical cross-entropy; restores the best-validation-loss parameters.
// Throws DomainError when a class is absent from the training set.
TrainedClassifier train_classifier(const LabeledSet& train, const LabeledSet& validation, const ClassifierConfig& cfg,
                                   std::uint64_t seed);

// Random rotation, translation and brightness gain (never a horizontal flip).
GrayImage augment(const GrayImage& img, const Augmentation& aug, std::uint64_t seed);

// Softmax probabilities for one image; throws ShapeError on a resolution mismatch.
Probabilities predict_stage(ClassifierNet& model, const GrayImage& img);
std::vector<Probabilities> predict_batch(ClassifierNet& model, const std::vector<GrayImage>& images);

// Dense-layer features for t-SNE.
std::vector<std::vector<double>> embed_batch(ClassifierNet& model, const std::vector<GrayImage>& images);

// `provenance` is stored verbatim (run config hash and seed when written by the CLI).
void save_classifier(const TrainedClassifier& c, const std::filesystem::path& path,
                     const std::string& provenance = "");
TrainedClassifier load_classifier(const std::filesystem::path& path);

std::string classifier_config_to_json(const ClassifierConfig& cfg);
ClassifierConfig classifier_config_from_json(const std::string& text);

}  // namespace koa::cnn

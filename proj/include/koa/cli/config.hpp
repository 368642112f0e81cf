#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "koa/classifier/classifier.hpp"
#include "koa/common/errors.hpp"
#include "koa/dataset/split.hpp"
#include "koa/gan/network_spec.hpp"
#include "koa/preprocess/preprocess.hpp"

namespace koa::cli {

// Bad flag, unknown config key or unparsable value; maps to exit status 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct PhantomSettings {
  std::size_t count_per_class = 600;
  int size = 64;
  double noise_sigma = 0.0;
  double negative_fraction = 0.1;
  double right_fraction = 0.5;
  int images_per_patient = 2;
};

struct AttackSettings {
  std::size_t k = 100;
};

struct VisualSettings {
  std::size_t count = 150;  // original test images in the embedding
  double perplexity = 30;
  int tsne_iterations = 1000;
  double overlay_alpha = 0.4;
  int strip_gutter = 2;
  int strip_frames = 8;
  int tile = 32;
  std::size_t probe_index = 0;
  std::size_t top_images = 6;
};

struct RunConfig {
  std::uint64_t seed = 42;
  std::string source = "phantoms";  // or "manifest"
  std::filesystem::path manifest;
  PhantomSettings phantoms;
  prep::PreprocessOptions preprocess;
  data::SplitFractions split;
  gan::CycleGanConfig gan = desk_gan();
  std::int64_t gan_max_steps = -1;
  cnn::ClassifierConfig cnn = desk_cnn();
  AttackSettings attack;
  VisualSettings viz;

  // Desk-scale defaults for 64 px phantoms; the published networks are 224 px.
  static gan::CycleGanConfig desk_gan();
  static cnn::ClassifierConfig desk_cnn();
};

// One documented key per line.
struct KeyDoc {
  std::string key;
  std::string description;
};
const std::vector<KeyDoc>& config_keys();

// Throws UsageError on an unknown key or a malformed value.
void set_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_value(const RunConfig& cfg, const std::string& key);

// "key = value" lines; '#' starts a comment; blank lines are ignored.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin = "config");
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);
// "key=value".
void apply_override(RunConfig& cfg, const std::string& assignment);

// Every key in documented order, rendered with get_value. Parsing it back reproduces cfg.
std::string canonical_text(const RunConfig& cfg);
// FNV-1a of the canonical text, 16 hex digits.
std::string config_hash(const RunConfig& cfg);

void validate(const RunConfig& cfg);

}  // namespace koa::cli

#include "koa/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "koa/common/hash.hpp"

namespace koa::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw UsageError("config key '" + key + "': cannot parse '" + value + "' as " + expected);
}

template <typename T>
T parse_int(const std::string& key, const std::string& v) {
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

std::string num(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

template <typename T>
std::string num_int(T v) {
  return std::to_string(v);
}

std::string boolean(bool b) { return b ? "true" : "false"; }

struct Entry {
  KeyDoc doc;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define KOA_INT(KEY, FIELD, TYPE, DOC)                                                                    \
  Entry {                                                                                                 \
    {KEY, DOC}, [](RunConfig& c, const std::string& k, const std::string& v) { c.FIELD = parse_int<TYPE>(k, v); }, \
        [](const RunConfig& c) { return num_int(c.FIELD); }                                               \
  }
#define KOA_DBL(KEY, FIELD, DOC)                                                                           \
  Entry {                                                                                                  \
    {KEY, DOC}, [](RunConfig& c, const std::string& k, const std::string& v) { c.FIELD = parse_double(k, v); }, \
        [](const RunConfig& c) { return num(c.FIELD); }                                                    \
  }
#define KOA_BOOL(KEY, FIELD, DOC)                                                                        \
  Entry {                                                                                                \
    {KEY, DOC}, [](RunConfig& c, const std::string& k, const std::string& v) { c.FIELD = parse_bool(k, v); }, \
        [](const RunConfig& c) { return boolean(c.FIELD); }                                              \
  }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table{
      KOA_INT("seed", seed, std::uint64_t, "run seed; every random stream derives from it"),
      Entry{{"data.source", "phantoms or manifest"},
            [](RunConfig& c, const std::string& k, const std::string& v) {
              if (v != "phantoms" && v != "manifest") bad_value(k, v, "'phantoms' or 'manifest'");
              c.source = v;
            },
            [](const RunConfig& c) { return c.source; }},
      Entry{{"data.manifest", "manifest CSV used when data.source = manifest"},
            [](RunConfig& c, const std::string&, const std::string& v) { c.manifest = v; },
            [](const RunConfig& c) { return c.manifest.string(); }},
      KOA_INT("phantoms.count_per_class", phantoms.count_per_class, std::size_t, "phantoms generated per stage"),
      KOA_INT("phantoms.size", phantoms.size, int, "phantom side in pixels"),
      KOA_DBL("phantoms.noise_sigma", phantoms.noise_sigma, "additive Gaussian sensor noise"),
      KOA_DBL("phantoms.negative_fraction", phantoms.negative_fraction, "share emitted as negative films"),
      KOA_DBL("phantoms.right_fraction", phantoms.right_fraction, "share of right knees"),
      KOA_INT("phantoms.images_per_patient", phantoms.images_per_patient, int, "consecutive phantoms per patient id"),
      KOA_BOOL("preprocess.flip", preprocess.flip, "mirror right knees"),
      KOA_BOOL("preprocess.invert", preprocess.invert, "invert detected negatives"),
      KOA_BOOL("preprocess.equalize", preprocess.equalize, "cumulative-histogram equalization"),
      KOA_DBL("preprocess.negative_threshold", preprocess.detector.threshold, "corner minus centre margin"),
      KOA_DBL("preprocess.corner_fraction", preprocess.detector.corner_fraction, "corner patch side / image side"),
      KOA_DBL("preprocess.center_fraction", preprocess.detector.center_fraction, "centre patch side / image side"),
      KOA_DBL("split.train", split.train, "patient fraction for training"),
      KOA_DBL("split.validation", split.validation, "patient fraction for validation"),
      KOA_DBL("split.test", split.test, "patient fraction for testing"),
      KOA_INT("gan.image_size", gan.image_size, int, "CycleGAN input side"),
      KOA_INT("gan.base_filters", gan.base_filters, int, "generator stem filters"),
      KOA_INT("gan.disc_base_filters", gan.disc_base_filters, int, "discriminator first-layer filters"),
      KOA_INT("gan.residual_blocks", gan.residual_blocks, int, "generator residual blocks"),
      KOA_DBL("gan.lambda_cycle", gan.lambda_cycle, "cycle-consistency weight"),
      KOA_DBL("gan.lambda_identity", gan.lambda_identity, "identity weight factor"),
      Entry{{"gan.identity_weighting", "relative (lambda_identity * lambda_cycle) or absolute"},
            [](RunConfig& c, const std::string& k, const std::string& v) {
              if (v == "relative") c.gan.identity_weighting = gan::IdentityWeighting::RelativeToCycle;
              else if (v == "absolute") c.gan.identity_weighting = gan::IdentityWeighting::Absolute;
              else bad_value(k, v, "'relative' or 'absolute'");
            },
            [](const RunConfig& c) {
              return std::string(c.gan.identity_weighting == gan::IdentityWeighting::Absolute ? "absolute" : "relative");
            }},
      KOA_DBL("gan.lr", gan.lr, "Adam learning rate"),
      KOA_DBL("gan.beta1", gan.beta1, "Adam beta1"),
      KOA_DBL("gan.beta2", gan.beta2, "Adam beta2"),
      KOA_INT("gan.batch_size", gan.batch_size, int, "images per domain per step"),
      KOA_INT("gan.epochs", gan.epochs, int, "training epochs"),
      KOA_INT("gan.max_steps", gan_max_steps, std::int64_t, "cap on total steps, -1 for none"),
      KOA_INT("cnn.image_size", cnn.image_size, int, "classifier input side"),
      KOA_INT("cnn.stem_channels", cnn.stem_channels, int, "stem convolution channels"),
      KOA_DBL("cnn.depth_coefficient", cnn.depth_coefficient, "stage depth multiplier"),
      KOA_DBL("cnn.width_coefficient", cnn.width_coefficient, "channel width multiplier"),
      KOA_INT("cnn.head_units", cnn.head_units, int, "dense layer before the logits"),
      KOA_DBL("cnn.lr", cnn.lr, "Adam learning rate"),
      KOA_INT("cnn.batch_size", cnn.batch_size, int, "mini-batch size"),
      KOA_INT("cnn.max_epochs", cnn.max_epochs, int, "epoch limit"),
      KOA_INT("cnn.patience", cnn.patience, int, "early-stopping patience in epochs"),
      KOA_BOOL("cnn.augment", cnn.augmentation.enabled, "rotation, translation and brightness jitter"),
      KOA_INT("attack.k", attack.k, std::size_t, "cohort size per attack"),
      KOA_INT("viz.count", viz.count, std::size_t, "original test images in the embedding"),
      KOA_DBL("viz.perplexity", viz.perplexity, "t-SNE perplexity"),
      KOA_INT("viz.tsne_iterations", viz.tsne_iterations, int, "t-SNE gradient steps"),
      KOA_DBL("viz.overlay_alpha", viz.overlay_alpha, "weight of the transformed image in overlays"),
      KOA_INT("viz.strip_gutter", viz.strip_gutter, int, "pixels between progress frames"),
      KOA_INT("viz.strip_frames", viz.strip_frames, int, "checkpoints shown in the progress strip"),
      KOA_INT("viz.tile", viz.tile, int, "thumbnail side in the raster grid"),
      KOA_INT("viz.probe_index", viz.probe_index, std::size_t, "test image used for the progress strip"),
      KOA_INT("viz.top_images", viz.top_images, std::size_t, "overlay panels per attack"),
  };
  return table;
}

const Entry& find(const std::string& key) {
  for (const auto& e : entries())
    if (e.doc.key == key) return e;
  throw UsageError("unknown config key '" + key + "'");
}

}  // namespace

gan::CycleGanConfig RunConfig::desk_gan() {
  gan::CycleGanConfig g;
  g.image_size = 64;
  g.base_filters = 16;
  g.disc_base_filters = 16;
  g.residual_blocks = 3;
  g.batch_size = 1;
  g.epochs = 5;
  return g;
}

cnn::ClassifierConfig RunConfig::desk_cnn() {
  cnn::ClassifierConfig c;
  c.lr = 1e-3;
  return c;
}

const std::vector<KeyDoc>& config_keys() {
  static const std::vector<KeyDoc> docs = [] {
    std::vector<KeyDoc> d;
    for (const auto& e : entries()) d.push_back(e.doc);
    return d;
  }();
  return docs;
}

void set_value(RunConfig& cfg, const std::string& key, const std::string& value) { find(key).set(cfg, key, value); }

std::string get_value(const RunConfig& cfg, const std::string& key) { return find(key).get(cfg); }

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(origin + ":" + std::to_string(n) + ": expected key = value");
    set_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str(), path.string());
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + assignment + "'");
  set_value(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string canonical_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& e : entries()) out += e.doc.key + " = " + e.get(cfg) + "\n";
  return out;
}

std::string config_hash(const RunConfig& cfg) { return to_hex(fnv1a64(canonical_text(cfg))); }

void validate(const RunConfig& cfg) {
  if (cfg.source == "manifest" && cfg.manifest.empty()) throw UsageError("data.source = manifest needs data.manifest");
  if (cfg.phantoms.count_per_class == 0) throw UsageError("phantoms.count_per_class must be positive");
  if (cfg.attack.k == 0) throw UsageError("attack.k must be positive");
  if (cfg.viz.tile < 1 || cfg.viz.strip_frames < 1 || cfg.viz.strip_gutter < 0)
    throw UsageError("viz sizes must be positive");
  if (!(cfg.viz.overlay_alpha >= 0 && cfg.viz.overlay_alpha <= 1)) throw UsageError("viz.overlay_alpha must be in [0,1]");
  try {
    cfg.gan.validate();
    cfg.cnn.validate();
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
}

}  // namespace koa::cli

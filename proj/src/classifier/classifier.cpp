#include "koa/classifier/classifier.hpp"

#include <nlohmann/json.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "koa/common/errors.hpp"
#include "koa/common/random.hpp"

namespace koa::cnn {
namespace {

constexpr const char* kFormat = "koa-classifier";
constexpr std::int64_t kVersion = 1;

std::vector<torch::Tensor> clone_parameters(const ClassifierNet& m) {
  std::vector<torch::Tensor> out;
  for (const auto& p : m->parameters()) out.push_back(p.detach().clone());
  return out;
}

void restore_parameters(ClassifierNet& m, const std::vector<torch::Tensor>& saved) {
  torch::NoGradGuard ng;
  auto params = m->parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i].copy_(saved[i]);
}

torch::Tensor label_tensor(const std::vector<data::Stage>& labels) {
  std::vector<std::int64_t> idx;
  idx.reserve(labels.size());
  for (auto s : labels) idx.push_back(static_cast<std::int64_t>(data::index_of(s)));
  return torch::tensor(idx, torch::kInt64);
}

struct EvalResult {
  double loss = 0;
  double accuracy = 0;
};

EvalResult evaluate(ClassifierNet& model, const torch::Tensor& x, const torch::Tensor& y, int batch) {
  torch::NoGradGuard ng;
  model->eval();
  double loss = 0;
  std::int64_t correct = 0;
  const auto n = x.size(0);
  for (std::int64_t s = 0; s < n; s += batch) {
    const auto len = std::min<std::int64_t>(batch, n - s);
    const auto logits = model->forward(x.narrow(0, s, len));
    const auto target = y.narrow(0, s, len);
    loss += torch::nn::functional::cross_entropy(logits, target).item<double>() * static_cast<double>(len);
    correct += logits.argmax(1).eq(target).sum().item<std::int64_t>();
  }
  return {loss / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)};
}

nlohmann::ordered_json stage_json(const StageSpec& s) {
  return {{"kind", block_kind_name(s.kind)}, {"expansion", s.expansion}, {"se_ratio", s.se_ratio},
          {"out_channels", s.out_channels},  {"stride", s.stride},       {"layers", s.layers}};
}

template <typename T>
T read_value(torch::serialize::InputArchive& ar, const char* key) {
  c10::IValue v;
  if (!ar.try_read(key, v)) throw SchemaError(std::string("classifier checkpoint: missing '") + key + "'");
  return v.to<T>();
}

}  // namespace

void ClassifierConfig::validate() const {
  if (image_size <= 0 || stem_channels <= 0 || head_units <= 0) throw DomainError("classifier config: sizes must be positive");
  if (stages.empty()) throw DomainError("classifier config: empty stage plan");
  if (!(lr >= 0.0) || batch_size <= 0 || max_epochs <= 0 || patience <= 0) {
    throw DomainError("classifier config: invalid training schedule");
  }
  if (depth_coefficient < 1.0 || width_coefficient < 1.0) throw DomainError("classifier config: scaling below 1");
  for (const auto& s : stages) {
    if (s.layers <= 0 || s.out_channels <= 0 || s.stride <= 0 || s.expansion <= 0 || !(s.se_ratio > 0.0)) {
      throw DomainError("classifier config: invalid stage");
    }
  }
}

std::vector<BlockSpec> expand_plan(const ClassifierConfig& cfg) {
  cfg.validate();
  std::vector<BlockSpec> out;
  int in = round_width(cfg.stem_channels * cfg.width_coefficient);
  for (const auto& s : cfg.stages) {
    const int layers = static_cast<int>(std::ceil(cfg.depth_coefficient * s.layers - 1e-9));
    const int width = round_width(s.out_channels * cfg.width_coefficient);
    for (int i = 0; i < layers; ++i) {
      BlockSpec b;
      b.kind = s.kind;
      b.expansion = s.expansion;
      b.se_ratio = s.se_ratio;
      b.in_channels = in;
      b.out_channels = width;
      b.stride = i == 0 ? s.stride : 1;
      out.push_back(b);
      in = width;
    }
  }
  return out;
}

ClassifierNetImpl::ClassifierNetImpl(const ClassifierConfig& cfg) : cfg_(cfg) {
  const auto plan = expand_plan(cfg);
  const int stem_out = plan.front().in_channels;
  stem = register_module("stem", torch::nn::Conv2d(torch::nn::Conv2dOptions(1, stem_out, 3).stride(2).padding(1)));
  blocks = register_module("blocks", torch::nn::Sequential());
  std::int64_t extent = block_output_extent(cfg.image_size, 2);
  for (const auto& b : plan) {
    blocks->push_back(MBBlock(b));
    extent = block_output_extent(extent, b.stride);
  }
  const auto flat = extent * extent * plan.back().out_channels;
  dense = register_module("dense", torch::nn::Linear(flat, cfg.head_units));
  logits = register_module("logits", torch::nn::Linear(cfg.head_units, data::kNumStages));
}

torch::Tensor ClassifierNetImpl::features(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != 1 || x.size(2) != cfg_.image_size || x.size(3) != cfg_.image_size) {
    throw ShapeError("classifier: expected N x 1 x " + std::to_string(cfg_.image_size) + " x " +
                     std::to_string(cfg_.image_size) + " input");
  }
  return blocks->forward(torch::silu(stem->forward(x)));
}

torch::Tensor ClassifierNetImpl::head(const torch::Tensor& f) {
  return logits->forward(torch::elu(dense->forward(f.flatten(1))));
}

torch::Tensor ClassifierNetImpl::forward(const torch::Tensor& x) { return head(features(x)); }

torch::Tensor ClassifierNetImpl::embed(const torch::Tensor& x) { return torch::elu(dense->forward(features(x).flatten(1))); }

std::int64_t ClassifierNetImpl::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : parameters()) n += p.numel();
  return n;
}

Probabilities softmax3(const std::array<double, data::kNumStages>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  Probabilities p{};
  double sum = 0;
  for (std::size_t i = 0; i < z.size(); ++i) sum += p[i] = std::exp(z[i] - m);
  for (auto& v : p) v /= sum;
  return p;
}

torch::Tensor images_to_tensor(const std::vector<GrayImage>& images) {
  if (images.empty()) throw DomainError("classifier: no images");
  const int rows = images.front().rows, cols = images.front().cols;
  auto out = torch::empty({static_cast<std::int64_t>(images.size()), 1, rows, cols}, torch::kUInt8);
  auto* dst = out.data_ptr<std::uint8_t>();
  for (const auto& img : images) {
    if (img.rows != rows || img.cols != cols) throw ShapeError("classifier: images differ in size");
    dst = std::copy(img.pixels.begin(), img.pixels.end(), dst);
  }
  return out.to(torch::kFloat32) / 127.5 - 1.0;
}

bool EarlyStopping::update(int epoch, double val_loss) {
  improved_last_ = best_epoch_ == 0 || val_loss < best_loss_;
  if (improved_last_) {
    best_epoch_ = epoch;
    best_loss_ = val_loss;
    since_best_ = 0;
    return false;
  }
  return ++since_best_ >= patience_;
}

GrayImage augment(const GrayImage& img, const Augmentation& aug, std::uint64_t seed) {
  if (!aug.enabled) return img;
  Rng rng(seed);
  const double angle = uniform_real(rng, -aug.max_rotation_deg, aug.max_rotation_deg);
  const double tx = uniform_real(rng, -aug.max_translation, aug.max_translation) * img.cols;
  const double ty = uniform_real(rng, -aug.max_translation, aug.max_translation) * img.rows;
  const double gain = 1.0 + uniform_real(rng, -aug.max_brightness, aug.max_brightness);

  const cv::Mat src(img.rows, img.cols, CV_8UC1, const_cast<std::uint8_t*>(img.pixels.data()));
  cv::Mat m = cv::getRotationMatrix2D(cv::Point2f((img.cols - 1) / 2.0f, (img.rows - 1) / 2.0f), angle, 1.0);
  m.at<double>(0, 2) += tx;
  m.at<double>(1, 2) += ty;
  cv::Mat warped;
  cv::warpAffine(src, warped, m, src.size(), cv::INTER_LINEAR, cv::BORDER_REFLECT_101);
  cv::Mat out;
  warped.convertTo(out, CV_8UC1, gain);  // saturating
  return GrayImage(img.rows, img.cols, std::vector<std::uint8_t>(out.datastart, out.dataend));
}

TrainedClassifier train_classifier(const LabeledSet& train, const LabeledSet& validation, const ClassifierConfig& cfg,
                                   std::uint64_t seed) {
  cfg.validate();
  if (train.images.size() != train.labels.size() || validation.images.size() != validation.labels.size()) {
    throw DomainError("train_classifier: images and labels differ in count");
  }
  if (validation.images.empty()) throw DomainError("train_classifier: empty validation set");
  for (auto s : data::kAllStages) {
    if (std::find(train.labels.begin(), train.labels.end(), s) == train.labels.end()) {
      throw DomainError("train_classifier: no training images for class " + std::string(data::stage_name(s)));
    }
  }

  torch::manual_seed(seed);
  TrainedClassifier out;
  out.model = ClassifierNet(cfg);
  auto& model = out.model;
  torch::optim::Adam opt(model->parameters(), torch::optim::AdamOptions(cfg.lr));

  const auto y_train = label_tensor(train.labels);
  const auto x_val = images_to_tensor(validation.images);
  const auto y_val = label_tensor(validation.labels);
  const std::size_t n = train.images.size();
  std::vector<std::size_t> order(n);
  EarlyStopping stopper(cfg.patience);
  std::vector<torch::Tensor> best = clone_parameters(model);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    model->train();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, 0xc1a55000ULL + static_cast<std::uint64_t>(epoch)));
    fisher_yates(std::span(order), rng);
    double loss_sum = 0;
    for (std::size_t s = 0; s < n; s += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n - s);
      std::vector<GrayImage> batch;
      std::vector<std::int64_t> idx;
      for (std::size_t k = s; k < s + len; ++k) {
        const auto i = order[k];
        batch.push_back(augment(train.images[i], cfg.augmentation, derive_seed(rng(), i)));
        idx.push_back(static_cast<std::int64_t>(i));
      }
      const auto target = y_train.index_select(0, torch::tensor(idx, torch::kInt64));
      const auto loss = torch::nn::functional::cross_entropy(model->forward(images_to_tensor(batch)), target);
      if (!std::isfinite(loss.item<double>())) throw NumericError("train_classifier: non-finite loss");
      opt.zero_grad();
      loss.backward();
      opt.step();
      loss_sum += loss.item<double>() * static_cast<double>(len);
    }
    const auto val = evaluate(model, x_val, y_val, cfg.batch_size);
    out.history.push_back({epoch, loss_sum / static_cast<double>(n), val.loss, val.accuracy});
    const bool stop = stopper.update(epoch, val.loss);
    if (stopper.improved_last()) best = clone_parameters(model);
    if (stop) {
      out.stopped_early = epoch < cfg.max_epochs;
      break;
    }
  }
  restore_parameters(model, best);
  model->eval();
  out.best_epoch = stopper.best_epoch();
  return out;
}

std::vector<Probabilities> predict_batch(ClassifierNet& model, const std::vector<GrayImage>& images) {
  std::vector<Probabilities> out;
  if (images.empty()) return out;
  torch::NoGradGuard ng;
  model->eval();
  const int size = model->config().image_size;
  for (const auto& img : images) {
    if (img.rows != size || img.cols != size) {
      throw ShapeError("predict: image is " + std::to_string(img.rows) + "x" + std::to_string(img.cols) +
                       ", classifier expects " + std::to_string(size) + "x" + std::to_string(size));
    }
  }
  constexpr std::size_t chunk = 64;
  const auto dtype = model->parameters().front().scalar_type();
  for (std::size_t s = 0; s < images.size(); s += chunk) {
    std::vector<GrayImage> part(images.begin() + static_cast<std::ptrdiff_t>(s),
                                images.begin() + static_cast<std::ptrdiff_t>(std::min(images.size(), s + chunk)));
    const auto logits = model->forward(images_to_tensor(part).to(dtype)).to(torch::kFloat64).contiguous();
    const auto* z = logits.data_ptr<double>();
    for (std::size_t i = 0; i < part.size(); ++i) out.push_back(softmax3({z[3 * i], z[3 * i + 1], z[3 * i + 2]}));
  }
  return out;
}

Probabilities predict_stage(ClassifierNet& model, const GrayImage& img) { return predict_batch(model, {img}).front(); }

std::vector<std::vector<double>> embed_batch(ClassifierNet& model, const std::vector<GrayImage>& images) {
  std::vector<std::vector<double>> out;
  if (images.empty()) return out;
  torch::NoGradGuard ng;
  model->eval();
  const auto e = model->embed(images_to_tensor(images)).to(torch::kFloat64).contiguous();
  const auto* p = e.data_ptr<double>();
  const auto d = e.size(1);
  for (std::int64_t i = 0; i < e.size(0); ++i) out.emplace_back(p + i * d, p + (i + 1) * d);
  return out;
}

std::string classifier_config_to_json(const ClassifierConfig& c) {
  nlohmann::ordered_json stages = nlohmann::ordered_json::array();
  for (const auto& s : c.stages) stages.push_back(stage_json(s));
  nlohmann::ordered_json j = {
      {"image_size", c.image_size},
      {"stem_channels", c.stem_channels},
      {"stages", stages},
      {"depth_coefficient", c.depth_coefficient},
      {"width_coefficient", c.width_coefficient},
      {"head_units", c.head_units},
      {"lr", c.lr},
      {"batch_size", c.batch_size},
      {"max_epochs", c.max_epochs},
      {"patience", c.patience},
      {"augmentation",
       {{"enabled", c.augmentation.enabled},
        {"max_rotation_deg", c.augmentation.max_rotation_deg},
        {"max_translation", c.augmentation.max_translation},
        {"max_brightness", c.augmentation.max_brightness}}},
  };
  return j.dump();
}

ClassifierConfig classifier_config_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ClassifierConfig c;
  c.image_size = j.at("image_size");
  c.stem_channels = j.at("stem_channels");
  c.stages.clear();
  for (const auto& s : j.at("stages")) {
    StageSpec st;
    st.kind = s.at("kind") == "MBConv" ? BlockKind::MBConv : BlockKind::FusedMBConv;
    st.expansion = s.at("expansion");
    st.se_ratio = s.at("se_ratio");
    st.out_channels = s.at("out_channels");
    st.stride = s.at("stride");
    st.layers = s.at("layers");
    c.stages.push_back(st);
  }
  c.depth_coefficient = j.at("depth_coefficient");
  c.width_coefficient = j.at("width_coefficient");
  c.head_units = j.at("head_units");
  c.lr = j.at("lr");
  c.batch_size = j.at("batch_size");
  c.max_epochs = j.at("max_epochs");
  c.patience = j.at("patience");
  const auto& a = j.at("augmentation");
  c.augmentation.enabled = a.at("enabled");
  c.augmentation.max_rotation_deg = a.at("max_rotation_deg");
  c.augmentation.max_translation = a.at("max_translation");
  c.augmentation.max_brightness = a.at("max_brightness");
  c.validate();
  return c;
}

void save_classifier(const TrainedClassifier& c, const std::filesystem::path& path, const std::string& provenance) {
  torch::serialize::OutputArchive root;
  if (!provenance.empty()) root.write("provenance", c10::IValue(provenance));
  root.write("format", c10::IValue(std::string(kFormat)));
  root.write("version", c10::IValue(kVersion));
  root.write("config", c10::IValue(classifier_config_to_json(c.model->config())));
  std::string classes;
  for (auto s : data::kAllStages) classes += (classes.empty() ? "" : ",") + std::string(data::stage_name(s));
  root.write("classes", c10::IValue(classes));
  root.write("best_epoch", c10::IValue(static_cast<std::int64_t>(c.best_epoch)));
  root.write("stopped_early", c10::IValue(c.stopped_early));
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& h : c.history) {
    hist.push_back({{"epoch", h.epoch}, {"train_loss", h.train_loss}, {"val_loss", h.val_loss}, {"val_accuracy", h.val_accuracy}});
  }
  root.write("history", c10::IValue(hist.dump()));
  torch::serialize::OutputArchive m;
  c.model->save(m);
  root.write("model", m);
  try {
    root.save_to(path.string());
  } catch (const c10::Error& e) {
    throw IoError("cannot write classifier " + path.string() + ": " + e.what_without_backtrace());
  }
}

TrainedClassifier load_classifier(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingArtifactError("classifier not found: " + path.string());
  torch::serialize::InputArchive root;
  try {
    root.load_from(path.string());
  } catch (const c10::Error& e) {
    throw IoError("cannot read classifier " + path.string() + ": " + e.what_without_backtrace());
  }
  if (read_value<std::string>(root, "format") != kFormat) throw SchemaError("not a classifier checkpoint");
  if (read_value<std::int64_t>(root, "version") != kVersion) throw SchemaError("unsupported classifier version");
  std::string expected;
  for (auto s : data::kAllStages) expected += (expected.empty() ? "" : ",") + std::string(data::stage_name(s));
  if (read_value<std::string>(root, "classes") != expected) throw SchemaError("classifier class ordering differs");
  TrainedClassifier c;
  c.model = ClassifierNet(classifier_config_from_json(read_value<std::string>(root, "config")));
  c.best_epoch = static_cast<int>(read_value<std::int64_t>(root, "best_epoch"));
  c.stopped_early = read_value<bool>(root, "stopped_early");
  for (const auto& h : nlohmann::json::parse(read_value<std::string>(root, "history"))) {
    c.history.push_back({h.at("epoch").get<int>(), h.at("train_loss").get<double>(), h.at("val_loss").get<double>(),
                         h.at("val_accuracy").get<double>()});
  }
  torch::serialize::InputArchive m;
  if (!root.try_read("model", m)) throw SchemaError("classifier checkpoint: missing model");
  c.model->load(m);
  c.model->eval();
  return c;
}

}  // namespace koa::cnn

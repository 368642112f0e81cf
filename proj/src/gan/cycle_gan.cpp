#include "koa/gan/cycle_gan.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "koa/common/errors.hpp"
#include "koa/common/random.hpp"

namespace koa::gan {
namespace {

constexpr const char* kFormat = "koa-cyclegan";
constexpr std::int64_t kVersion = 2;

torch::Tensor l1(const torch::Tensor& a, const torch::Tensor& b) { return identity_loss(a, b); }

struct GeneratorForward {
  GeneratorLossParts parts;
  torch::Tensor fake_x;  // F(y)
  torch::Tensor fake_y;  // G(x)
};

GeneratorForward forward_generators(CycleNetworks& nets, const torch::Tensor& x, const torch::Tensor& y) {
  if (x.sizes() != y.sizes()) throw ShapeError("cycle-gan: domain batches differ in shape");
  GeneratorForward out;
  out.fake_y = nets.g->forward(x);
  out.fake_x = nets.f->forward(y);
  auto& p = out.parts;
  p.adv_g = adversarial_loss(std::nullopt, nets.d_y->forward(out.fake_y), AdversarialRole::Generator);
  p.adv_f = adversarial_loss(std::nullopt, nets.d_x->forward(out.fake_x), AdversarialRole::Generator);
  p.cycle_x = l1(nets.f->forward(out.fake_y), x);
  p.cycle_y = l1(nets.g->forward(out.fake_x), y);
  p.identity_g = identity_loss(nets.g->forward(y), y);
  p.identity_f = identity_loss(nets.f->forward(x), x);
  return out;
}

double checked(const torch::Tensor& t, const char* term) {
  const double v = t.item<double>();
  if (!std::isfinite(v)) throw NumericError(std::string("cycle-gan: non-finite ") + term + " loss");
  return v;
}

LossRecord record_of(const GeneratorLossParts& p, const LossWeights& w, const DiscriminatorLosses& d) {
  LossRecord r;
  r.adv_g = checked(p.adv_g, "adversarial G");
  r.adv_f = checked(p.adv_f, "adversarial F");
  r.cycle = checked(p.cycle_x, "cycle X") + checked(p.cycle_y, "cycle Y");
  r.identity_g = checked(p.identity_g, "identity G");
  r.identity_f = checked(p.identity_f, "identity F");
  r.g_total = checked(generator_g_loss(p, w), "G total");
  r.f_total = checked(generator_f_loss(p, w), "F total");
  r.total = checked(total_generator_loss(p, w), "generator total");
  r.d_x = checked(d.d_x, "discriminator X");
  r.d_y = checked(d.d_y, "discriminator Y");
  return r;
}

void accumulate(LossRecord& acc, const LossRecord& r, double weight) {
  acc.adv_g += weight * r.adv_g;
  acc.adv_f += weight * r.adv_f;
  acc.cycle += weight * r.cycle;
  acc.identity_g += weight * r.identity_g;
  acc.identity_f += weight * r.identity_f;
  acc.g_total += weight * r.g_total;
  acc.f_total += weight * r.f_total;
  acc.total += weight * r.total;
  acc.d_x += weight * r.d_x;
  acc.d_y += weight * r.d_y;
}

torch::optim::AdamOptions adam_options(const CycleGanConfig& cfg) {
  return torch::optim::AdamOptions(cfg.lr).betas({cfg.beta1, cfg.beta2});
}

nlohmann::json record_json(const LossRecord& r) {
  return {{"adv_g", r.adv_g},       {"adv_f", r.adv_f},           {"cycle", r.cycle},
          {"identity_g", r.identity_g}, {"identity_f", r.identity_f}, {"g_total", r.g_total},
          {"f_total", r.f_total},   {"total", r.total},           {"d_x", r.d_x},
          {"d_y", r.d_y}};
}

LossRecord record_from(const nlohmann::json& j) {
  LossRecord r;
  r.adv_g = j.at("adv_g");
  r.adv_f = j.at("adv_f");
  r.cycle = j.at("cycle");
  r.identity_g = j.at("identity_g");
  r.identity_f = j.at("identity_f");
  r.g_total = j.at("g_total");
  r.f_total = j.at("f_total");
  r.total = j.at("total");
  r.d_x = j.at("d_x");
  r.d_y = j.at("d_y");
  return r;
}

template <typename T>
T read_value(torch::serialize::InputArchive& ar, const char* key) {
  c10::IValue v;
  if (!ar.try_read(key, v)) throw SchemaError(std::string("checkpoint: missing '") + key + "'");
  return v.to<T>();
}

}  // namespace

std::string_view direction_name(Direction d) noexcept {
  return d == Direction::TowardFuture ? "toward_future" : "toward_past";
}

Direction parse_direction(std::string_view s) {
  if (s == "toward_future" || s == "future") return Direction::TowardFuture;
  if (s == "toward_past" || s == "past") return Direction::TowardPast;
  throw DomainError("unknown direction '" + std::string(s) + "'");
}

CycleNetworks CycleNetworks::build(const CycleGanConfig& cfg) {
  const auto gen = build_generator(cfg);
  const auto disc = build_discriminator(cfg);
  CycleNetworks n;
  n.g = SpecNetwork(gen, cfg.leaky_slope, cfg.norm_eps);
  n.f = SpecNetwork(gen, cfg.leaky_slope, cfg.norm_eps);
  n.d_x = SpecNetwork(disc, cfg.leaky_slope, cfg.norm_eps);
  n.d_y = SpecNetwork(disc, cfg.leaky_slope, cfg.norm_eps);
  return n;
}

void CycleNetworks::to(torch::Dtype dtype) {
  g->to(dtype);
  f->to(dtype);
  d_x->to(dtype);
  d_y->to(dtype);
}

void CycleNetworks::train(bool on) {
  g->train(on);
  f->train(on);
  d_x->train(on);
  d_y->train(on);
}

GeneratorLossParts generator_loss_parts(CycleNetworks& nets, const torch::Tensor& x, const torch::Tensor& y) {
  return forward_generators(nets, x, y).parts;
}

DiscriminatorLosses discriminator_losses(CycleNetworks& nets, const torch::Tensor& x, const torch::Tensor& y,
                                         const torch::Tensor& fake_x, const torch::Tensor& fake_y) {
  return {adversarial_loss(nets.d_x->forward(x), nets.d_x->forward(fake_x.detach()), AdversarialRole::Discriminator),
          adversarial_loss(nets.d_y->forward(y), nets.d_y->forward(fake_y.detach()), AdversarialRole::Discriminator)};
}

CycleTrainState::CycleTrainState(const CycleGanConfig& cfg, std::uint64_t seed)
    : nets((torch::manual_seed(seed), CycleNetworks::build(cfg))),
      opt_g(nets.g->parameters(), adam_options(cfg)),
      opt_f(nets.f->parameters(), adam_options(cfg)),
      opt_dx(nets.d_x->parameters(), adam_options(cfg)),
      opt_dy(nets.d_y->parameters(), adam_options(cfg)),
      cfg_(cfg),
      seed_(seed) {}

LossRecord train_step(CycleTrainState& state, const torch::Tensor& batch_x, const torch::Tensor& batch_y) {
  auto& nets = state.nets;
  nets.train(true);
  const auto w = state.weights();

  auto fwd = forward_generators(nets, batch_x, batch_y);
  auto total = total_generator_loss(fwd.parts, w);
  checked(total, "generator total");
  state.opt_g.zero_grad();
  state.opt_f.zero_grad();
  total.backward();
  state.opt_g.step();
  state.opt_f.step();

  auto d = discriminator_losses(nets, batch_x, batch_y, fwd.fake_x, fwd.fake_y);
  checked(d.d_x, "discriminator X");
  checked(d.d_y, "discriminator Y");
  state.opt_dx.zero_grad();
  state.opt_dy.zero_grad();
  (d.d_x + d.d_y).backward();
  state.opt_dx.step();
  state.opt_dy.step();

  torch::NoGradGuard no_grad;
  return record_of(fwd.parts, w, d);
}

LossRecord evaluate_losses(CycleNetworks& nets, const LossWeights& w, const torch::Tensor& x, const torch::Tensor& y,
                           int batch_size) {
  if (batch_size <= 0) throw DomainError("evaluate_losses: batch_size must be positive");
  const auto n = std::min(x.size(0), y.size(0));
  if (n == 0) throw DomainError("evaluate_losses: empty validation set");
  torch::NoGradGuard no_grad;
  nets.train(false);
  LossRecord acc;
  for (std::int64_t start = 0; start < n; start += batch_size) {
    const auto len = std::min<std::int64_t>(batch_size, n - start);
    const auto bx = x.narrow(0, start, len);
    const auto by = y.narrow(0, start, len);
    auto fwd = forward_generators(nets, bx, by);
    auto d = discriminator_losses(nets, bx, by, fwd.fake_x, fwd.fake_y);
    accumulate(acc, record_of(fwd.parts, w, d), static_cast<double>(len) / static_cast<double>(n));
  }
  return acc;
}

int select_checkpoint(const std::vector<EpochRecord>& history) {
  if (history.empty()) throw DomainError("select_checkpoint: empty history");
  const EpochRecord* best = nullptr;
  double best_value = 0.0;
  for (const auto& r : history) {
    const double v = r.validation.g_total + r.validation.f_total;
    if (!std::isfinite(v)) continue;
    if (best == nullptr || v < best_value || (v == best_value && r.epoch < best->epoch)) {
      best = &r;
      best_value = v;
    }
  }
  if (best == nullptr) throw NumericError("select_checkpoint: no finite validation loss");
  return best->epoch;
}

torch::Tensor to_model_range(const std::vector<GrayImage>& images) {
  if (images.empty()) throw DomainError("to_model_range: no images");
  const int rows = images.front().rows, cols = images.front().cols;
  auto out = torch::empty({static_cast<std::int64_t>(images.size()), 1, rows, cols}, torch::kUInt8);
  auto* dst = out.data_ptr<std::uint8_t>();
  for (const auto& img : images) {
    if (img.rows != rows || img.cols != cols) throw ShapeError("to_model_range: images differ in size");
    dst = std::copy(img.pixels.begin(), img.pixels.end(), dst);
  }
  return out.to(torch::kFloat32) / 127.5 - 1.0;
}

torch::Tensor to_model_range(const GrayImage& image) { return to_model_range(std::vector<GrayImage>{image}); }

GrayImage from_model_range(const torch::Tensor& t) {
  if (t.dim() < 2 || t.numel() != t.size(-2) * t.size(-1)) {
    throw ShapeError("from_model_range: expected a single-channel image");
  }
  auto s = t.detach().reshape({t.size(-2), t.size(-1)});
  auto px = ((s.to(torch::kFloat64) + 1.0) * 127.5).round().clamp(0, 255).to(torch::kUInt8).contiguous();
  const auto* p = px.data_ptr<std::uint8_t>();
  return GrayImage(static_cast<int>(s.size(0)), static_cast<int>(s.size(1)),
                   std::vector<std::uint8_t>(p, p + px.numel()));
}

GrayImage transform_with(const GrayImage& img, const std::function<torch::Tensor(const torch::Tensor&)>& net) {
  torch::NoGradGuard no_grad;
  auto out = net(to_model_range(img));
  if (out.size(-1) != img.cols || out.size(-2) != img.rows) throw ShapeError("transform: output shape differs from input");
  return from_model_range(out);
}

GrayImage transform(const GrayImage& img, Direction direction, CycleNetworks& nets) {
  auto& net = direction == Direction::TowardFuture ? nets.g : nets.f;
  const auto& in = net->spec().layers.front().output;
  if (img.rows != in.h || img.cols != in.w) {
    throw ShapeError("transform: image is " + std::to_string(img.rows) + "x" + std::to_string(img.cols) +
                     ", generator expects " + std::to_string(in.h) + "x" + std::to_string(in.w));
  }
  net->train(false);
  const auto dtype = net->parameters().front().scalar_type();
  return transform_with(img, [&](const torch::Tensor& t) { return net->forward(t.to(dtype)); });
}

void train_cycle_gan(CycleTrainState& state, const torch::Tensor& train_x, const torch::Tensor& train_y,
                     const torch::Tensor& val_x, const torch::Tensor& val_y, const GanTrainOptions& opts) {
  const auto& cfg = state.config();
  const auto nx = train_x.size(0), ny = train_y.size(0);
  if (nx == 0 || ny == 0) throw DomainError("train_cycle_gan: empty training domain");
  const auto per_epoch = std::max<std::int64_t>(std::min(nx, ny) / cfg.batch_size, 1);
  const auto batch = std::min<std::int64_t>({cfg.batch_size, nx, ny});
  std::int64_t steps_done = 0;

  while (state.epoch < cfg.epochs && (opts.max_steps < 0 || steps_done < opts.max_steps)) {
    Rng rng(derive_seed(state.seed(), 0x6a4e0000ULL + static_cast<std::uint64_t>(state.epoch)));
    std::vector<std::int64_t> ix(static_cast<std::size_t>(nx)), iy(static_cast<std::size_t>(ny));
    std::iota(ix.begin(), ix.end(), 0);
    std::iota(iy.begin(), iy.end(), 0);
    fisher_yates(std::span(ix), rng);
    fisher_yates(std::span(iy), rng);

    LossRecord acc;
    std::int64_t steps = 0;
    for (std::int64_t s = 0; s < per_epoch; ++s) {
      if (opts.max_steps >= 0 && steps_done >= opts.max_steps) break;
      auto sel_x = torch::tensor(std::vector<std::int64_t>(ix.begin() + s * batch, ix.begin() + (s + 1) * batch));
      auto sel_y = torch::tensor(std::vector<std::int64_t>(iy.begin() + s * batch, iy.begin() + (s + 1) * batch));
      accumulate(acc, train_step(state, train_x.index_select(0, sel_x), train_y.index_select(0, sel_y)), 1.0);
      ++steps;
      ++steps_done;
    }
    if (steps == 0) break;
    LossRecord mean;
    accumulate(mean, acc, 1.0 / static_cast<double>(steps));

    ++state.epoch;
    state.history.push_back({state.epoch, mean, evaluate_losses(state.nets, state.weights(), val_x, val_y, cfg.batch_size)});
    if (opts.on_epoch) opts.on_epoch(state);
  }
}

std::string config_to_json(const CycleGanConfig& c) {
  nlohmann::ordered_json j = {
      {"image_size", c.image_size},
      {"base_filters", c.base_filters},
      {"disc_base_filters", c.disc_base_filters},
      {"residual_blocks", c.residual_blocks},
      {"lambda_cycle", c.lambda_cycle},
      {"lambda_identity", c.lambda_identity},
      {"identity_weighting", c.identity_weighting == IdentityWeighting::RelativeToCycle ? "relative" : "absolute"},
      {"lr", c.lr},
      {"beta1", c.beta1},
      {"beta2", c.beta2},
      {"batch_size", c.batch_size},
      {"epochs", c.epochs},
      {"leaky_slope", c.leaky_slope},
      {"norm_eps", c.norm_eps},
  };
  return j.dump();
}

CycleGanConfig config_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  CycleGanConfig c;
  c.image_size = j.at("image_size");
  c.base_filters = j.at("base_filters");
  c.disc_base_filters = j.at("disc_base_filters");
  c.residual_blocks = j.at("residual_blocks");
  c.lambda_cycle = j.at("lambda_cycle");
  c.lambda_identity = j.at("lambda_identity");
  c.identity_weighting =
      j.at("identity_weighting") == "absolute" ? IdentityWeighting::Absolute : IdentityWeighting::RelativeToCycle;
  c.lr = j.at("lr");
  c.beta1 = j.at("beta1");
  c.beta2 = j.at("beta2");
  c.batch_size = j.at("batch_size");
  c.epochs = j.at("epochs");
  c.leaky_slope = j.at("leaky_slope");
  c.norm_eps = j.at("norm_eps");
  c.validate();
  return c;
}

void save_checkpoint(const CycleTrainState& state, const std::filesystem::path& path, const std::string& provenance) {
  torch::serialize::OutputArchive root;
  if (!provenance.empty()) root.write("provenance", c10::IValue(provenance));
  root.write("format", c10::IValue(std::string(kFormat)));
  root.write("version", c10::IValue(kVersion));
  root.write("config", c10::IValue(config_to_json(state.config())));
  root.write("seed", c10::IValue(static_cast<std::int64_t>(state.seed())));
  root.write("epoch", c10::IValue(static_cast<std::int64_t>(state.epoch)));
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& r : state.history) {
    hist.push_back({{"epoch", r.epoch}, {"train", record_json(r.train)}, {"validation", record_json(r.validation)}});
  }
  root.write("history", c10::IValue(hist.dump()));

  auto put_net = [&](const char* key, const SpecNetwork& net) {
    torch::serialize::OutputArchive a;
    net->save(a);
    root.write(key, a);
  };
  put_net("net_g", state.nets.g);
  put_net("net_f", state.nets.f);
  put_net("net_dx", state.nets.d_x);
  put_net("net_dy", state.nets.d_y);
  // Adam moments in parameter order. The library's own serializer keys them by tensor
  // address, which makes checkpoint bytes depend on the allocator.
  auto put_opt = [&](const char* key, const torch::optim::Adam& opt) {
    torch::serialize::OutputArchive a;
    const auto& params = opt.param_groups().front().params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto it = opt.state().find(params[i].unsafeGetTensorImpl());
      if (it == opt.state().end()) continue;
      const auto& st = static_cast<const torch::optim::AdamParamState&>(*it->second);
      const auto k = std::to_string(i);
      a.write(k + ".step", c10::IValue(st.step()));
      a.write(k + ".exp_avg", st.exp_avg(), true);
      a.write(k + ".exp_avg_sq", st.exp_avg_sq(), true);
    }
    root.write(key, a);
  };
  put_opt("opt_g", state.opt_g);
  put_opt("opt_f", state.opt_f);
  put_opt("opt_dx", state.opt_dx);
  put_opt("opt_dy", state.opt_dy);
  try {
    root.save_to(path.string());
  } catch (const c10::Error& e) {
    throw IoError("cannot write checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
}

std::unique_ptr<CycleTrainState> load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingArtifactError("checkpoint not found: " + path.string());
  torch::serialize::InputArchive root;
  try {
    root.load_from(path.string());
  } catch (const c10::Error& e) {
    throw IoError("cannot read checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
  if (read_value<std::string>(root, "format") != kFormat) throw SchemaError("checkpoint: not a cycle-gan checkpoint");
  if (const auto v = read_value<std::int64_t>(root, "version"); v != kVersion) {
    throw SchemaError("checkpoint: unsupported version " + std::to_string(v));
  }
  const auto cfg = config_from_json(read_value<std::string>(root, "config"));
  auto state = std::make_unique<CycleTrainState>(cfg, static_cast<std::uint64_t>(read_value<std::int64_t>(root, "seed")));
  state->epoch = static_cast<int>(read_value<std::int64_t>(root, "epoch"));
  for (const auto& r : nlohmann::json::parse(read_value<std::string>(root, "history"))) {
    state->history.push_back({r.at("epoch").get<int>(), record_from(r.at("train")), record_from(r.at("validation"))});
  }

  auto get_net = [&](const char* key, SpecNetwork& net) {
    torch::serialize::InputArchive a;
    if (!root.try_read(key, a)) throw SchemaError(std::string("checkpoint: missing '") + key + "'");
    net->load(a);
  };
  get_net("net_g", state->nets.g);
  get_net("net_f", state->nets.f);
  get_net("net_dx", state->nets.d_x);
  get_net("net_dy", state->nets.d_y);
  auto get_opt = [&](const char* key, torch::optim::Adam& opt) {
    torch::serialize::InputArchive a;
    if (!root.try_read(key, a)) throw SchemaError(std::string("checkpoint: missing '") + key + "'");
    const auto& params = opt.param_groups().front().params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto k = std::to_string(i);
      c10::IValue step;
      if (!a.try_read(k + ".step", step)) continue;
      auto st = std::make_unique<torch::optim::AdamParamState>();
      torch::Tensor m, v;
      a.read(k + ".exp_avg", m, true);
      a.read(k + ".exp_avg_sq", v, true);
      st->step(step.toInt());
      st->exp_avg(m);
      st->exp_avg_sq(v);
      opt.state()[params[i].unsafeGetTensorImpl()] = std::move(st);
    }
  };
  get_opt("opt_g", state->opt_g);
  get_opt("opt_f", state->opt_f);
  get_opt("opt_dx", state->opt_dx);
  get_opt("opt_dy", state->opt_dy);
  return state;
}

}  // namespace koa::gan

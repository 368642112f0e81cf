#include "koa/gan/network_spec.hpp"

#include <iomanip>
#include <sstream>

#include "koa/common/errors.hpp"

namespace koa::gan {
namespace {

std::string shape_str(const Shape& s) {
  return "(" + std::to_string(s.h) + ", " + std::to_string(s.w) + ", " + std::to_string(s.c) + ")";
}

std::string_view padding_name(Padding p) {
  switch (p) {
    case Padding::Valid:
      return "valid";
    case Padding::Same:
      return "same";
    default:
      return "-";
  }
}

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::ReLU:
      return "ReLU";
    case Activation::LeakyReLU:
      return "LeakyReLU";
    case Activation::Tanh:
      return "Tanh";
    default:
      return "Linear";
  }
}

int ceil_div(int a, int b) { return (a + b - 1) / b; }

// Appends layers while propagating shapes; every error names the offending layer.
class Builder {
 public:
  explicit Builder(std::string name) { spec_.name = std::move(name); }

  void input(Shape s) {
    LayerSpec l;
    l.kind = LayerKind::Input;
    l.output = s;
    push(l);
  }

  void reflect(int pad) {
    LayerSpec l;
    l.kind = LayerKind::ReflectionPad;
    l.pad = pad;
    if (pad >= cur().h || pad >= cur().w) fail(l, "reflection padding must be smaller than the input extent");
    l.output = {cur().h + 2 * pad, cur().w + 2 * pad, cur().c};
    push(l);
  }

  void conv(int filters, int kernel, int stride, Padding padding, bool bias, Activation act = Activation::Linear) {
    LayerSpec l;
    l.kind = LayerKind::Conv;
    l.filters = filters;
    l.kernel = kernel;
    l.stride = stride;
    l.padding = padding;
    l.bias = bias;
    l.activation = act;
    if (padding == Padding::Valid) {
      if (cur().h < kernel || cur().w < kernel) fail(l, "kernel larger than unpadded input");
      l.output = {(cur().h - kernel) / stride + 1, (cur().w - kernel) / stride + 1, filters};
    } else {
      l.output = {ceil_div(cur().h, stride), ceil_div(cur().w, stride), filters};
    }
    l.params = static_cast<std::int64_t>(kernel) * kernel * cur().c * filters + (bias ? filters : 0);
    push(l);
  }

  void conv_transpose(int filters, int kernel, int stride, bool bias) {
    LayerSpec l;
    l.kind = LayerKind::ConvTranspose;
    l.filters = filters;
    l.kernel = kernel;
    l.stride = stride;
    l.padding = Padding::Same;
    l.bias = bias;
    if (kernel < stride) fail(l, "transposed kernel smaller than its stride");
    l.output = {cur().h * stride, cur().w * stride, filters};
    l.params = static_cast<std::int64_t>(kernel) * kernel * cur().c * filters + (bias ? filters : 0);
    push(l);
  }

  void norm() {
    LayerSpec l;
    l.kind = LayerKind::InstanceNorm;
    l.output = cur();
    l.params = 2LL * cur().c;
    push(l);
  }

  void act(Activation a) {
    LayerSpec l;
    l.kind = LayerKind::Activation;
    l.activation = a;
    l.output = cur();
    push(l);
  }

  void add(int skip_from) {
    LayerSpec l;
    l.kind = LayerKind::Add;
    l.skip_from = skip_from;
    l.output = cur();
    if (skip_from < 0 || skip_from >= static_cast<int>(spec_.layers.size())) fail(l, "skip source out of range");
    if (!(spec_.layers[static_cast<std::size_t>(skip_from)].output == cur())) {
      fail(l, "skip source shape " + shape_str(spec_.layers[static_cast<std::size_t>(skip_from)].output) +
                  " differs from " + shape_str(cur()));
    }
    push(l);
  }

  int last_index() const { return static_cast<int>(spec_.layers.size()) - 1; }

  NetworkSpec finish() {
    for (const auto& l : spec_.layers) spec_.total_params += l.params;
    return std::move(spec_);
  }

 private:
  const Shape& cur() const { return spec_.layers.back().output; }

  void push(const LayerSpec& l) {
    if (l.output.h <= 0 || l.output.w <= 0 || l.output.c <= 0) fail(l, "non-positive output shape " + shape_str(l.output));
    spec_.layers.push_back(l);
  }

  [[noreturn]] void fail(const LayerSpec& l, const std::string& why) const {
    throw ShapeError(spec_.name + " layer " + std::to_string(spec_.layers.size()) + " (" + std::string(l.type_name()) +
                     "): " + why);
  }

  NetworkSpec spec_;
};

void append(Builder& b, const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::Input:
      b.input(l.output);
      break;
    case LayerKind::ReflectionPad:
      b.reflect(l.pad);
      break;
    case LayerKind::Conv:
      b.conv(l.filters, l.kernel, l.stride, l.padding, l.bias, l.activation);
      break;
    case LayerKind::ConvTranspose:
      b.conv_transpose(l.filters, l.kernel, l.stride, l.bias);
      break;
    case LayerKind::InstanceNorm:
      b.norm();
      break;
    case LayerKind::Activation:
      b.act(l.activation);
      break;
    case LayerKind::Add:
      b.add(l.skip_from);
      break;
  }
}

}  // namespace

std::string_view LayerSpec::type_name() const noexcept {
  switch (kind) {
    case LayerKind::Input:
      return "InputLayer";
    case LayerKind::ReflectionPad:
      return "ReflectionPadding2D";
    case LayerKind::Conv:
      return "Conv2D";
    case LayerKind::ConvTranspose:
      return "Conv2DTranspose";
    case LayerKind::InstanceNorm:
      return "InstanceNormalization";
    case LayerKind::Activation:
      return "Activation";
    case LayerKind::Add:
      return "Add";
  }
  return "?";
}

void CycleGanConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw DomainError(std::string("cycle-gan config: ") + name + " must be positive");
  };
  positive(image_size, "image_size");
  positive(base_filters, "base_filters");
  positive(disc_base_filters, "disc_base_filters");
  positive(lambda_cycle, "lambda_cycle");
  positive(beta1, "beta1");
  positive(beta2, "beta2");
  positive(batch_size, "batch_size");
  positive(epochs, "epochs");
  if (residual_blocks < 0) throw DomainError("cycle-gan config: residual_blocks must be non-negative");
  if (!(lr >= 0.0)) throw DomainError("cycle-gan config: lr must be non-negative");
  if (beta1 >= 1.0 || beta2 >= 1.0) throw DomainError("cycle-gan config: betas must be below 1");
  if (lambda_identity < 0.0) throw DomainError("cycle-gan config: lambda_identity must be non-negative");
  if (image_size % 4 != 0) throw DomainError("cycle-gan config: image_size must be divisible by 4");
}

NetworkSpec build_generator(const CycleGanConfig& cfg) {
  cfg.validate();
  const int f = cfg.base_filters;
  Builder b("generator");
  b.input({cfg.image_size, cfg.image_size, 1});
  b.reflect(3);
  b.conv(f, 7, 1, Padding::Valid, false);
  b.norm();
  b.act(Activation::ReLU);
  for (int mult : {2, 4}) {
    b.conv(f * mult, 3, 2, Padding::Same, false);
    b.norm();
    b.act(Activation::ReLU);
  }
  for (int i = 0; i < cfg.residual_blocks; ++i) {
    const int block_input = b.last_index();
    b.reflect(1);
    b.conv(4 * f, 3, 1, Padding::Valid, false);
    b.norm();
    b.act(Activation::ReLU);
    b.reflect(1);
    b.conv(4 * f, 3, 1, Padding::Valid, false);
    b.norm();
    b.add(block_input);
  }
  for (int mult : {2, 1}) {
    b.conv_transpose(f * mult, 3, 2, false);
    b.norm();
    b.act(Activation::ReLU);
  }
  b.reflect(3);
  b.conv(1, 7, 1, Padding::Valid, true, Activation::Tanh);
  return b.finish();
}

NetworkSpec build_discriminator(const CycleGanConfig& cfg) {
  cfg.validate();
  const int d = cfg.disc_base_filters;
  Builder b("discriminator");
  b.input({cfg.image_size, cfg.image_size, 1});
  b.conv(d, 4, 2, Padding::Same, true);
  b.act(Activation::LeakyReLU);
  for (int mult : {2, 4}) {
    b.conv(d * mult, 4, 2, Padding::Same, false);
    b.norm();
    b.act(Activation::LeakyReLU);
  }
  b.conv(d * 8, 4, 1, Padding::Same, false);
  b.norm();
  b.act(Activation::LeakyReLU);
  b.conv(1, 4, 1, Padding::Same, true);
  return b.finish();
}

void check_consistency(const NetworkSpec& spec) {
  if (spec.layers.empty() || spec.layers.front().kind != LayerKind::Input) {
    throw ShapeError(spec.name + ": first layer must be an input layer");
  }
  Builder b(spec.name);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    append(b, spec.layers[i]);
  }
  const auto rebuilt = b.finish();
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& want = rebuilt.layers[i];
    const auto& have = spec.layers[i];
    if (!(want.output == have.output) || want.params != have.params) {
      throw ShapeError(spec.name + " layer " + std::to_string(i) + " (" + std::string(have.type_name()) +
                       "): recorded " + shape_str(have.output) + "/" + std::to_string(have.params) + " but propagates to " +
                       shape_str(want.output) + "/" + std::to_string(want.params));
    }
  }
  if (rebuilt.total_params != spec.total_params) {
    throw ShapeError(spec.name + ": total_params " + std::to_string(spec.total_params) + " != layer sum " +
                     std::to_string(rebuilt.total_params));
  }
}

std::string render_table(const NetworkSpec& spec) {
  std::ostringstream os;
  os << std::left << std::setw(24) << "Layer Type" << std::setw(18) << "Output Shape" << std::right << std::setw(10)
     << "Params" << std::setw(9) << "Filters" << std::setw(8) << "Kernel" << std::setw(8) << "Stride" << std::setw(8)
     << "Padding" << std::setw(11) << "Activation" << '\n';
  for (const auto& l : spec.layers) {
    const bool convolution = l.kind == LayerKind::Conv || l.kind == LayerKind::ConvTranspose;
    os << std::left << std::setw(24) << l.type_name() << std::setw(18) << shape_str(l.output) << std::right
       << std::setw(10) << l.params << std::setw(9) << (convolution ? std::to_string(l.filters) : "-") << std::setw(8)
       << (convolution ? std::to_string(l.kernel) + "x" + std::to_string(l.kernel) : "-") << std::setw(8)
       << (convolution ? std::to_string(l.stride) : "-") << std::setw(8) << padding_name(l.padding) << std::setw(11)
       << (convolution || l.kind == LayerKind::Activation ? activation_name(l.activation) : "-") << '\n';
  }
  os << "Total params: " << spec.total_params << '\n';
  return os.str();
}

std::vector<ReferenceRow> ReferenceTable::expand(int blocks) const {
  std::vector<ReferenceRow> rows(head);
  for (int i = 0; i < blocks; ++i) rows.insert(rows.end(), block.begin(), block.end());
  rows.insert(rows.end(), tail.begin(), tail.end());
  return rows;
}

const ReferenceTable& reference_generator_table() {
  static const ReferenceTable table{
      .head =
          {
              {"InputLayer", {224, 224, 1}, 0},
              {"ReflectionPadding2D", {230, 230, 1}, 0},
              {"Conv2D", {224, 224, 64}, 3136},
              {"InstanceNormalization", {224, 224, 64}, 128},
              {"Activation", {224, 224, 64}, 0},
              {"Conv2D", {112, 112, 128}, 73728},
              {"InstanceNormalization", {112, 112, 128}, 256},
              {"Activation", {112, 112, 128}, 0},
              {"Conv2D", {56, 56, 256}, 294912},
              {"InstanceNormalization", {56, 56, 256}, 512},
              {"Activation", {56, 56, 256}, 0},
          },
      .block =
          {
              {"ReflectionPadding2D", {58, 58, 256}, 0},
              {"Conv2D", {56, 56, 256}, 589824},
              {"InstanceNormalization", {56, 56, 256}, 512},
              {"Activation", {56, 56, 256}, 0},
              {"ReflectionPadding2D", {58, 58, 256}, 0},
              {"Conv2D", {56, 56, 256}, 589824},
              {"InstanceNormalization", {56, 56, 256}, 512},
              {"Add", {56, 56, 256}, 0},
          },
      .tail =
          {
              {"Conv2DTranspose", {112, 112, 128}, 294912},
              {"InstanceNormalization", {112, 112, 128}, 256},
              {"Activation", {112, 112, 128}, 0},
              {"Conv2DTranspose", {224, 224, 64}, 73728},
              {"InstanceNormalization", {224, 224, 64}, 128},
              {"Activation", {224, 224, 64}, 0},
              {"ReflectionPadding2D", {230, 230, 64}, 0},
              {"Conv2D", {224, 224, 1}, 3137},
          },
      .stated_total = 11'370'881,
  };
  return table;
}

const ReferenceTable& reference_discriminator_table() {
  static const ReferenceTable table{
      .head =
          {
              {"InputLayer", {224, 224, 1}, 0},
              {"Conv2D", {112, 112, 128}, 2176},
              {"Activation", {112, 112, 128}, 0},
              {"Conv2D", {56, 56, 256}, 524288},
              {"InstanceNormalization", {56, 56, 256}, 512},
              {"Activation", {56, 56, 256}, 0},
              {"Conv2D", {28, 28, 512}, 2097152},
              {"InstanceNormalization", {28, 28, 512}, 1024},
              {"Activation", {28, 28, 512}, 0},
              {"Conv2D", {28, 28, 1024}, 8388608},
              {"InstanceNormalization", {28, 28, 1024}, 2048},
              {"Activation", {28, 28, 1024}, 0},
              {"Conv2D", {28, 28, 1}, 16385},
          },
      .block = {},
      .tail = {},
      .stated_total = 11'032'193,
  };
  return table;
}

std::vector<ArchMismatch> compare_to_reference(const NetworkSpec& spec, const ReferenceTable& table, int blocks) {
  std::vector<ArchMismatch> out;
  const auto rows = table.expand(blocks);
  if (rows.size() != spec.layers.size()) {
    out.push_back({0, spec.name, "layer count", std::to_string(rows.size()), std::to_string(spec.layers.size())});
  }
  const std::size_t n = std::min(rows.size(), spec.layers.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& want = rows[i];
    const auto& have = spec.layers[i];
    const std::string label = spec.name + "[" + std::to_string(i) + "] " + std::string(have.type_name());
    if (want.type != have.type_name()) out.push_back({i, label, "type", std::string(want.type), std::string(have.type_name())});
    if (!(want.output == have.output)) out.push_back({i, label, "output shape", shape_str(want.output), shape_str(have.output)});
    if (want.params != have.params) {
      out.push_back({i, label, "params", std::to_string(want.params), std::to_string(have.params)});
    }
  }
  if (spec.total_params != table.stated_total) {
    out.push_back({spec.layers.size(), spec.name, "total params", std::to_string(table.stated_total),
                   std::to_string(spec.total_params)});
  }
  return out;
}

}  // namespace koa::gan

#include "koa/interpret/overlay.hpp"

#include <algorithm>
#include <cmath>

#include "koa/common/errors.hpp"

namespace koa::viz {
namespace detail {
// Generated at configure time from assets/inferno.txt.
extern const std::uint8_t kInfernoTable[256][3];
}  // namespace detail

namespace {

void check_same_shape(const GrayImage& a, const GrayImage& b) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw ShapeError("overlay: images differ in shape (" + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                     " vs " + std::to_string(b.rows) + "x" + std::to_string(b.cols) + ")");
  }
}

std::uint8_t mix(std::uint8_t a, std::uint8_t b, double alpha) {
  const double v = alpha * a + (1.0 - alpha) * b;
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

}  // namespace

const Colormap& inferno() noexcept {
  static const Colormap cm = [] {
    Colormap m{};
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = {detail::kInfernoTable[i][0], detail::kInfernoTable[i][1], detail::kInfernoTable[i][2]};
    return m;
  }();
  return cm;
}

Colormap reversed(const Colormap& cm) {
  Colormap r = cm;
  std::reverse(r.begin(), r.end());
  return r;
}

Rgb blend(Rgb a, Rgb b, double alpha) noexcept { return {mix(a.r, b.r, alpha), mix(a.g, b.g, alpha), mix(a.b, b.b, alpha)}; }

RgbImage saliency_overlay(const GrayImage& original, const GrayImage& transformed, double alpha, const Colormap& cm) {
  check_same_shape(original, transformed);
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("overlay transparency must be in [0,1]");
  const auto rev = reversed(cm);
  RgbImage out(original.rows, original.cols);
  for (std::size_t i = 0; i < original.pixels.size(); ++i)
    out.pixels[i] = blend(cm[transformed.pixels[i]], rev[original.pixels[i]], alpha);
  return out;
}

RgbImage difference_map(const GrayImage& original, const GrayImage& transformed) {
  check_same_shape(original, transformed);
  RgbImage out(original.rows, original.cols, {255, 255, 255});
  for (std::size_t i = 0; i < original.pixels.size(); ++i) {
    const int d = int{transformed.pixels[i]} - int{original.pixels[i]};
    const auto fade = static_cast<std::uint8_t>(255 - std::abs(d));
    if (d > 0) out.pixels[i] = {255, fade, fade};
    if (d < 0) out.pixels[i] = {fade, fade, 255};
  }
  return out;
}

}  // namespace koa::viz

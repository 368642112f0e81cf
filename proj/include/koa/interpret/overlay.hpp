#pragma once

#include <array>

#include "koa/common/image.hpp"

namespace koa::viz {

using Colormap = std::array<Rgb, 256>;

// The bundled 256-entry inferno table.
const Colormap& inferno() noexcept;
Colormap reversed(const Colormap& cm);

// alpha * a + (1 - alpha) * b per channel, rounded half-up and clamped to [0, 255].
Rgb blend(Rgb a, Rgb b, double alpha) noexcept;

// out = alpha * C(transformed) + (1 - alpha) * C_rev(original).
// Throws ShapeError when the images differ in shape.
RgbImage saliency_overlay(const GrayImage& original, const GrayImage& transformed, double alpha = 0.4,
                          const Colormap& cm = inferno());

// White where unchanged, red where the transform brightened, blue where it darkened;
// saturation proportional to |transformed - original|.
RgbImage difference_map(const GrayImage& original, const GrayImage& transformed);

}  // namespace koa::viz

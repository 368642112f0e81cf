#include "koa/common/image.hpp"

#include "koa/common/errors.hpp"

namespace koa {

GrayImage::GrayImage(int rows, int cols, std::uint8_t fill)
    : rows(rows), cols(cols), pixels(static_cast<std::size_t>(rows) * cols, fill) {
  if (rows < 0 || cols < 0) throw ShapeError("negative image dimensions");
}

GrayImage::GrayImage(int rows, int cols, std::vector<std::uint8_t> data)
    : rows(rows), cols(cols), pixels(std::move(data)) {
  if (rows < 0 || cols < 0 || pixels.size() != static_cast<std::size_t>(rows) * cols) {
    throw ShapeError("pixel buffer does not match " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

RgbImage::RgbImage(int rows, int cols, Rgb fill)
    : rows(rows), cols(cols), pixels(static_cast<std::size_t>(rows) * cols, fill) {
  if (rows < 0 || cols < 0) throw ShapeError("negative image dimensions");
}

RgbImage to_rgb(const GrayImage& img) {
  RgbImage out(img.rows, img.cols);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const auto v = img.pixels[i];
    out.pixels[i] = {v, v, v};
  }
  return out;
}

}  // namespace koa

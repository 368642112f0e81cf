#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace koa {

// Single-channel 8-bit image, row-major.
struct GrayImage {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int rows, int cols, std::uint8_t fill = 0);
  GrayImage(int rows, int cols, std::vector<std::uint8_t> data);

  std::uint8_t& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * cols + c]; }
  std::uint8_t at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t size() const noexcept { return pixels.size(); }
  bool empty() const noexcept { return pixels.empty(); }
  std::span<const std::uint8_t> row(int r) const {
    return {pixels.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Interleaved 8-bit RGB image, row-major.
struct RgbImage {
  int rows = 0;
  int cols = 0;
  std::vector<Rgb> pixels;

  RgbImage() = default;
  RgbImage(int rows, int cols, Rgb fill = {});

  Rgb& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * cols + c]; }
  const Rgb& at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * cols + c]; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

RgbImage to_rgb(const GrayImage& img);

}  // namespace koa

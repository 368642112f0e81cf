#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "koa/common/image.hpp"

namespace koa {

// Key/value pairs stored as PNG tEXt chunks (used for config hash and seed provenance).
using PngText = std::vector<std::pair<std::string, std::string>>;

// Reads any 8-bit PNG and converts it to a single channel (luma for colour inputs).
GrayImage read_png_gray(const std::filesystem::path& path);
PngText read_png_text(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const GrayImage& img, const PngText& text = {});
void write_png(const std::filesystem::path& path, const RgbImage& img, const PngText& text = {});

}  // namespace koa

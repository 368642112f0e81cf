#include "koa/preprocess/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

#include <nlohmann/json.hpp>

#include "koa/common/errors.hpp"

namespace koa::prep {
namespace {

double patch_mean(const GrayImage& img, int r0, int c0, int side) {
  double sum = 0.0;
  for (int r = r0; r < r0 + side; ++r) {
    for (int c = c0; c < c0 + side; ++c) sum += img.at(r, c);
  }
  return sum / (static_cast<double>(side) * side);
}

int patch_side(int extent, double fraction) {
  return std::clamp(static_cast<int>(std::lround(fraction * extent)), 1, extent);
}

}  // namespace

GrayImage flip_lateral(const GrayImage& img, data::Side side) {
  if (side == data::Side::Left) return img;
  GrayImage out = img;
  for (int r = 0; r < out.rows; ++r) {
    auto* row = out.pixels.data() + static_cast<std::size_t>(r) * out.cols;
    std::reverse(row, row + out.cols);
  }
  return out;
}

bool detect_negative(const GrayImage& img, const NegativeDetector& detector) {
  if (img.empty()) return false;
  const int extent = std::min(img.rows, img.cols);
  const int corner = patch_side(extent, detector.corner_fraction);
  const int center = patch_side(extent, detector.center_fraction);

  const double corners = 0.25 * (patch_mean(img, 0, 0, corner) + patch_mean(img, 0, img.cols - corner, corner) +
                                 patch_mean(img, img.rows - corner, 0, corner) +
                                 patch_mean(img, img.rows - corner, img.cols - corner, corner));
  const double middle = patch_mean(img, (img.rows - center) / 2, (img.cols - center) / 2, center);
  return corners - middle > detector.threshold;
}

GrayImage invert_channels(const GrayImage& img) {
  GrayImage out = img;
  for (auto& v : out.pixels) v = static_cast<std::uint8_t>(255 - v);
  return out;
}

EqualizeResult equalize_contrast(const GrayImage& img) {
  if (img.empty()) throw ShapeError("cannot equalize an empty image");
  std::array<std::uint64_t, 256> cdf{};
  for (auto v : img.pixels) ++cdf[v];
  for (std::size_t i = 1; i < cdf.size(); ++i) cdf[i] += cdf[i - 1];

  const std::uint64_t total = img.pixels.size();
  const std::uint64_t cdf_min = *std::find_if(cdf.begin(), cdf.end(), [](std::uint64_t c) { return c > 0; });
  if (total == cdf_min) return {img, true};

  // Exact round-half-up of 255 * num / den in integers: floor((2 * 255 * num + den) / (2 * den)).
  const std::uint64_t den = total - cdf_min;
  std::array<std::uint8_t, 256> lut{};
  for (std::size_t v = 0; v < lut.size(); ++v) {
    const std::uint64_t num = cdf[v] > cdf_min ? cdf[v] - cdf_min : 0;
    const std::uint64_t h = (2 * 255 * num + den) / (2 * den);
    lut[v] = static_cast<std::uint8_t>(std::min<std::uint64_t>(h, 255));
  }
  EqualizeResult out{img, false};
  for (auto& v : out.image.pixels) v = lut[v];
  return out;
}

PreprocessResult preprocess_pipeline(const data::ImageRecord& rec, const NegativeDetector& detector) {
  return preprocess_pipeline(rec, PreprocessOptions{true, true, true, detector});
}

PreprocessResult preprocess_pipeline(const data::ImageRecord& rec, const PreprocessOptions& options) {
  PreprocessResult result;
  GrayImage img = rec.load_pixels();
  if (options.flip) {
    img = flip_lateral(img, rec.side);
    result.provenance.flipped = rec.side == data::Side::Right;
  }

  if (options.invert) {
    bool negative = false;
    if (rec.negative_hint) {
      negative = *rec.negative_hint;
      result.provenance.inversion_from_manifest = true;
    } else {
      negative = detect_negative(img, options.detector);
    }
    if (negative) img = invert_channels(img);
    result.provenance.inverted = negative;
  }

  if (options.equalize) {
    auto eq = equalize_contrast(img);
    img = std::move(eq.image);
    result.provenance.equalization_degenerate = eq.degenerate;
  }
  result.image = std::move(img);
  return result;
}

std::string provenance_json(const Provenance& p, const std::string& image_id) {
  nlohmann::ordered_json j;
  j["image"] = image_id;
  j["flipped"] = p.flipped;
  j["inverted"] = p.inverted;
  j["inversion_source"] = p.inversion_from_manifest ? "manifest" : "detector";
  j["warning"] = p.equalization_degenerate ? "constant image: equalization skipped" : "";
  return j.dump();
}

}  // namespace koa::prep

#pragma once

#include <string>

#include "koa/common/image.hpp"
#include "koa/dataset/records.hpp"

namespace koa::prep {

// Mirrors right knees so every radiograph shows a left-oriented joint.
GrayImage flip_lateral(const GrayImage& img, data::Side side);

struct NegativeDetector {
  // Corner patches are 10% of the shorter side, the centre patch 40%.
  double corner_fraction = 0.10;
  double center_fraction = 0.40;
  // Mean gray-level margin by which corners must exceed the centre.
  double threshold = 20.0;
};

// True when the four corner patches are brighter than the centre patch by more than the
// threshold: radiographic bone is bright on a dark background in a positive film.
bool detect_negative(const GrayImage& img, const NegativeDetector& detector = {});

GrayImage invert_channels(const GrayImage& img);

struct EqualizeResult {
  GrayImage image;
  // Set for constant images, where the equalization denominator vanishes; the input is
  // returned unchanged.
  bool degenerate = false;
};

// Cumulative-histogram contrast equalization over 256 fixed bins:
//   h(v) = 255 * (cdf(v) - cdf_min) / (m*n - cdf_min)
// with cdf_min the smallest non-zero cdf value, rounded half-up.
EqualizeResult equalize_contrast(const GrayImage& img);

struct Provenance {
  bool flipped = false;
  bool inverted = false;
  // True when inversion came from the manifest override rather than the detector.
  bool inversion_from_manifest = false;
  bool equalization_degenerate = false;
};

struct PreprocessResult {
  GrayImage image;
  Provenance provenance;
};

struct PreprocessOptions {
  bool flip = true;
  bool invert = true;
  bool equalize = true;
  NegativeDetector detector;
};

// flip -> conditional inversion -> equalization, in that order.
PreprocessResult preprocess_pipeline(const data::ImageRecord& rec, const NegativeDetector& detector = {});
// Same order with individual steps switched off.
PreprocessResult preprocess_pipeline(const data::ImageRecord& rec, const PreprocessOptions& options);

// Single-line JSON rendering of the provenance, used for per-image sidecars.
std::string provenance_json(const Provenance& p, const std::string& image_id);

}  // namespace koa::prep

#include "koa/dataset/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "koa/common/errors.hpp"
#include "koa/common/random.hpp"

namespace koa::data {
namespace {

constexpr int kBackground = 12;
constexpr int kGapLevel = 22;

int scaled(double px64, double scale) { return std::max(1, static_cast<int>(std::lround(px64 * scale))); }

void paint_ellipse(std::vector<double>& canvas, int size, double cr, double cc, double a, double b, double value) {
  const int r0 = std::max(0, static_cast<int>(std::floor(cr - b)));
  const int r1 = std::min(size - 1, static_cast<int>(std::ceil(cr + b)));
  const int c0 = std::max(0, static_cast<int>(std::floor(cc - a)));
  const int c1 = std::min(size - 1, static_cast<int>(std::ceil(cc + a)));
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const double dr = (r - cr) / b;
      const double dc = (c - cc) / a;
      if (dr * dr + dc * dc <= 1.0) {
        auto& px = canvas[static_cast<std::size_t>(r) * size + c];
        px = std::max(px, value);
      }
    }
  }
}

}  // namespace

Stage phantom_stage(int gap_width, int wide_threshold, int narrow_threshold) noexcept {
  if (gap_width >= wide_threshold) return Stage::NoneDoubtful;
  if (gap_width > narrow_threshold) return Stage::Mild;
  return Stage::ModerateSevere;
}

ColumnRange gap_measurement_strip(int cols) noexcept { return {3 * cols / 8, std::max(3 * cols / 8 + 1, 5 * cols / 8)}; }

ImageRecord generate_phantom(const PhantomParams& p) {
  if (p.size < 16) throw DomainError("phantom size must be at least 16");
  if (p.gap_width < 0) throw DomainError("gap_width must be non-negative");
  if (p.gap_width >= p.size) throw DomainError("gap_width must be smaller than the image height");
  if (p.osteophyte_count < 0) throw DomainError("osteophyte_count must be non-negative");
  if (p.bone_intensity < 0 || p.bone_intensity > 255) throw DomainError("bone_intensity must be in [0,255]");
  if (!(p.noise_sigma >= 0.0)) throw DomainError("noise_sigma must be non-negative");
  if (p.narrow_threshold >= p.wide_threshold) throw DomainError("narrow threshold must be below wide threshold");

  const int n = p.size;
  const double scale = n / 64.0;
  Rng rng(p.seed);

  const int jitter = scaled(2, scale);
  const int left = static_cast<int>(std::lround(0.16 * n)) + uniform_int(rng, -jitter, jitter);
  const int right = n - 1 - static_cast<int>(std::lround(0.16 * n)) + uniform_int(rng, -jitter, jitter);
  const int max_offset = scaled(3, scale);
  const int center = n / 2 + uniform_int(rng, -max_offset, max_offset);
  const int latest_start = std::max(0, n - 1 - p.gap_width);
  const int gap_start = std::clamp(center - p.gap_width / 2, std::min(1, latest_start), latest_start);
  const int gap_stop = gap_start + p.gap_width;

  const double bone = p.bone_intensity;
  const double falloff = 12.0 * scale;
  std::vector<double> canvas(static_cast<std::size_t>(n) * n, kBackground);
  for (int r = 0; r < n; ++r) {
    const bool in_gap = r >= gap_start && r < gap_stop;
    const int dist = r < gap_start ? gap_start - 1 - r : r - gap_stop;
    for (int c = 0; c < n; ++c) {
      double v = kBackground;
      if (c >= left && c <= right) {
        if (in_gap) {
          v = kGapLevel;
        } else {
          // Subchondral bone is densest next to the joint; the plate itself is brighter still.
          v = bone - 30.0 * std::min<double>(dist, falloff) / falloff;
          if (dist == 0) v += 20.0;
        }
      }
      canvas[static_cast<std::size_t>(r) * n + c] = v;
    }
  }

  // Fibular head on the lateral side of the tibia; makes laterality visible.
  {
    const double cr = gap_stop + 10.0 * scale;
    const double cc = right + 4.0 * scale;
    if (cr < n - 0.15 * n) paint_ellipse(canvas, n, cr, cc, 2.5 * scale, 4.0 * scale, 0.8 * bone);
  }

  for (int i = 0; i < p.osteophyte_count; ++i) {
    const int corner = i % 4;
    const int ring = i / 4;
    const bool top = corner < 2;
    const bool on_left = corner % 2 == 0;
    const double a = (2.5 + uniform01(rng)) * scale;
    const double b = 1.8 * scale;
    const double cr = top ? gap_start - 1 - ring * 3.0 * scale : gap_stop + ring * 3.0 * scale;
    const double cc = on_left ? left - 0.6 * a : right + 0.6 * a;
    paint_ellipse(canvas, n, cr, cc, a, b, bone - 10.0);
  }

  std::normal_distribution<double> noise(0.0, p.noise_sigma > 0.0 ? p.noise_sigma : 1.0);
  GrayImage img(n, n);
  for (std::size_t i = 0; i < canvas.size(); ++i) {
    double v = canvas[i];
    if (p.noise_sigma > 0.0) v += noise(rng);
    img.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }

  if (p.side == Side::Right) {
    for (int r = 0; r < n; ++r) {
      auto* row = img.pixels.data() + static_cast<std::size_t>(r) * n;
      std::reverse(row, row + n);
    }
  }
  if (p.negative) {
    for (auto& v : img.pixels) v = static_cast<std::uint8_t>(255 - v);
  }

  const Stage stage = phantom_stage(p.gap_width, p.wide_threshold, p.narrow_threshold);
  ImageRecord rec;
  rec.patient_id = "phantom-" + std::to_string(p.seed);
  rec.side = p.side;
  switch (stage) {
    case Stage::NoneDoubtful:
      rec.kl_grade = static_cast<int>(rng() & 1U);
      break;
    case Stage::Mild:
      rec.kl_grade = 2;
      break;
    case Stage::ModerateSevere:
      rec.kl_grade = 3 + static_cast<int>(rng() & 1U);
      break;
  }
  rec.pixels = std::move(img);
  return rec;
}

int measure_gap_width(const GrayImage& img) {
  if (img.rows == 0 || img.cols == 0) return 0;
  const auto strip = gap_measurement_strip(img.cols);
  std::vector<double> profile(static_cast<std::size_t>(img.rows));
  for (int r = 0; r < img.rows; ++r) {
    double sum = 0.0;
    for (int c = strip.begin; c < strip.end; ++c) sum += img.at(r, c);
    profile[static_cast<std::size_t>(r)] = sum / (strip.end - strip.begin);
  }
  const auto [lo, hi] = std::minmax_element(profile.begin(), profile.end());
  if (*hi - *lo < 1.0) return 0;
  const double threshold = 0.5 * (*lo + *hi);
  int best = 0;
  int run = 0;
  for (double v : profile) {
    run = v < threshold ? run + 1 : 0;
    best = std::max(best, run);
  }
  return best;
}

std::vector<ImageRecord> generate_phantom_cohort(Stage stage, std::size_t count, std::uint64_t seed,
                                                 const PhantomCorpusOptions& options,
                                                 const std::string& patient_prefix) {
  const double scale = options.size / 64.0;
  auto px = [&](int v) { return static_cast<int>(std::lround(v * scale)); };
  int gap_lo = 0, gap_hi = 0, ost_lo = 0, ost_hi = 0;
  switch (stage) {
    case Stage::NoneDoubtful:
      gap_lo = px(14), gap_hi = px(20), ost_lo = 0, ost_hi = 0;
      break;
    case Stage::Mild:
      gap_lo = px(8), gap_hi = px(12), ost_lo = 0, ost_hi = 1;
      break;
    case Stage::ModerateSevere:
      gap_lo = std::max(1, px(2)), gap_hi = px(6), ost_lo = 1, ost_hi = 3;
      break;
  }
  const char tag = "NMS"[index_of(stage)];
  const std::size_t per_patient = std::max(1, options.images_per_patient);

  std::vector<ImageRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, (static_cast<std::uint64_t>(index_of(stage)) << 32) | i));
    PhantomParams p;
    p.size = options.size;
    p.gap_width = uniform_int(rng, gap_lo, gap_hi);
    p.osteophyte_count = uniform_int(rng, ost_lo, ost_hi);
    p.noise_sigma = options.noise_sigma;
    p.seed = rng();
    p.side = uniform01(rng) < options.right_fraction ? Side::Right : Side::Left;
    p.negative = uniform01(rng) < options.negative_fraction;
    p.wide_threshold = px(14);
    p.narrow_threshold = px(6);
    auto rec = generate_phantom(p);
    rec.patient_id = patient_prefix + tag + std::to_string(i / per_patient);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace koa::data

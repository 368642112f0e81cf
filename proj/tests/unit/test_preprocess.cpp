#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "koa/common/random.hpp"
#include "koa/dataset/phantom.hpp"
#include "koa/preprocess/preprocess.hpp"
#include "unit/equalize_oracle.hpp"

using namespace koa;
using namespace koa::prep;

namespace {

GrayImage random_image(Rng& rng, int rows, int cols, int lo = 0, int hi = 255) {
  GrayImage img(rows, cols);
  for (auto& v : img.pixels) v = static_cast<std::uint8_t>(uniform_int(rng, lo, hi));
  return img;
}

GrayImage positive_phantom(double noise = 4.0) {
  data::PhantomParams p;
  p.gap_width = 16;
  p.noise_sigma = noise;
  p.seed = 3;
  return *data::generate_phantom(p).pixels;
}

}  // namespace

TEST_CASE("lateral flip") {
  const GrayImage img(2, 2, {1, 2, 3, 4});
  CHECK(flip_lateral(img, data::Side::Left) == img);
  CHECK(flip_lateral(img, data::Side::Right) == GrayImage(2, 2, {2, 1, 4, 3}));

  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const auto x = random_image(rng, uniform_int(rng, 1, 9), uniform_int(rng, 1, 9));
    CHECK(flip_lateral(flip_lateral(x, data::Side::Right), data::Side::Right) == x);
  }
}

TEST_CASE("channel inversion") {
  CHECK(invert_channels(GrayImage(3, 3, 0)) == GrayImage(3, 3, 255));
  CHECK(invert_channels(GrayImage(2, 2, {0, 128, 255, 1})) == GrayImage(2, 2, {255, 127, 0, 254}));
  Rng rng(2);
  const auto x = random_image(rng, 7, 5);
  CHECK(invert_channels(invert_channels(x)) == x);
}

TEST_CASE("negative detection") {
  const auto positive = positive_phantom();
  CHECK_FALSE(detect_negative(positive));
  CHECK(detect_negative(invert_channels(positive)));
  CHECK_FALSE(detect_negative(GrayImage(64, 64, 0)));
  CHECK_FALSE(detect_negative(GrayImage(64, 64, 200)));
}

TEST_CASE("property: inversion flips the detector across the phantom corpus") {
  for (auto stage : data::kAllStages) {
    const auto cohort = data::generate_phantom_cohort(stage, 30, 99, {.right_fraction = 0.5});
    for (const auto& rec : cohort) {
      const auto standard = flip_lateral(*rec.pixels, rec.side);
      const bool before = detect_negative(standard);
      CHECK_FALSE(before);
      CHECK(detect_negative(invert_channels(standard)) == !before);
    }
  }
}

TEST_CASE("contrast equalization hand cases") {
  SUBCASE("2x2 ramp") {
    const auto out = equalize_contrast(GrayImage(2, 2, {0, 1, 2, 3}));
    CHECK_FALSE(out.degenerate);
    CHECK(out.image == GrayImage(2, 2, {0, 85, 170, 255}));
  }
  SUBCASE("maximum value maps to 255") {
    Rng rng(4);
    for (int i = 0; i < 50; ++i) {
      const auto x = random_image(rng, 6, 6, 10, 90);
      const auto vmax = *std::max_element(x.pixels.begin(), x.pixels.end());
      const auto out = equalize_contrast(x).image;
      for (std::size_t k = 0; k < x.pixels.size(); ++k) {
        if (x.pixels[k] == vmax) CHECK(out.pixels[k] == 255);
      }
    }
  }
  SUBCASE("constant image is returned unchanged with a warning") {
    const auto out = equalize_contrast(GrayImage(5, 5, 77));
    CHECK(out.degenerate);
    CHECK(out.image == GrayImage(5, 5, 77));
  }
  SUBCASE("half-way values round up") {
    // cdf = 1,3 over two levels with mn = 3: h(second) = 255; three levels 1,2,3 of 3 pixels each.
    const auto out = equalize_contrast(GrayImage(1, 3, {5, 6, 7}));
    CHECK(out.image == GrayImage(1, 3, {0, 128, 255}));  // 127.5 -> 128
  }
}

TEST_CASE("property: equalization matches the brute-force oracle, is monotone and idempotent") {
  Rng rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const int lo = uniform_int(rng, 0, 200);
    const auto x = random_image(rng, 8, 8, lo, uniform_int(rng, lo, 255));
    const auto out = equalize_contrast(x);
    const auto expected = test_oracle::brute_force_equalize(x);
    REQUIRE(out.image == expected);
    for (std::size_t i = 0; i < x.pixels.size(); ++i) {
      for (std::size_t j = 0; j < x.pixels.size(); ++j) {
        if (x.pixels[i] <= x.pixels[j]) REQUIRE(out.image.pixels[i] <= out.image.pixels[j]);
      }
    }
    if (!out.degenerate) CHECK(equalize_contrast(out.image).image == out.image);
  }
}

TEST_CASE("idempotence needs the two lowest levels to stay apart") {
  // One pixel each at 0, 1 and 2, the rest at 3: h(1) = 255/599 rounds to 0, merging the two
  // lowest levels; the second pass sees a larger cdf_min and pulls h(2) = 1 down to 0.
  std::vector<std::uint8_t> px(600, 3);
  px[0] = 0;
  px[1] = 1;
  px[2] = 2;
  const GrayImage x(20, 30, px);
  const auto once = equalize_contrast(x).image;
  CHECK(once.pixels[0] == once.pixels[1]);
  CHECK(equalize_contrast(once).image != once);
}

TEST_CASE("preprocessing pipeline") {
  SUBCASE("composition order for a right negative phantom") {
    data::PhantomParams p;
    p.gap_width = 12;
    p.noise_sigma = 3.0;
    p.side = data::Side::Right;
    p.negative = true;
    const auto rec = data::generate_phantom(p);
    const auto result = preprocess_pipeline(rec);
    CHECK(result.provenance.flipped);
    CHECK(result.provenance.inverted);
    CHECK_FALSE(result.provenance.inversion_from_manifest);
    const auto manual = equalize_contrast(invert_channels(flip_lateral(*rec.pixels, data::Side::Right))).image;
    CHECK(result.image == manual);
  }

  SUBCASE("left positive equalized image is a fixed point") {
    data::ImageRecord rec;
    rec.pixels = equalize_contrast(positive_phantom(0.0)).image;
    const auto result = preprocess_pipeline(rec);
    CHECK_FALSE(result.provenance.inverted);
    CHECK(result.image == *rec.pixels);
  }

  SUBCASE("manifest override beats the detector") {
    data::ImageRecord rec;
    rec.pixels = positive_phantom();
    rec.negative_hint = true;
    const auto result = preprocess_pipeline(rec);
    CHECK(result.provenance.inverted);
    CHECK(result.provenance.inversion_from_manifest);
  }

  SUBCASE("constant record passes through with a warning") {
    data::ImageRecord rec;
    rec.pixels = GrayImage(16, 16, 40);
    const auto result = preprocess_pipeline(rec);
    CHECK(result.provenance.equalization_degenerate);
    CHECK(result.image == GrayImage(16, 16, 40));
    CHECK(provenance_json(result.provenance, "x").find("constant image") != std::string::npos);
  }
}

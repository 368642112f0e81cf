#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "koa/common/image.hpp"
#include "koa/dataset/records.hpp"

namespace koa::data {

// Synthetic knee radiograph: a femur band above and a tibia band below a dark joint gap.
// Band extents and gap position are jittered from `seed`; thresholds scale the stage rule.
struct PhantomParams {
  int size = 64;
  int gap_width = 14;
  int osteophyte_count = 0;
  int bone_intensity = 200;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  Side side = Side::Left;
  // Emit as a negative (inverted) radiograph.
  bool negative = false;
  int wide_threshold = 14;
  int narrow_threshold = 6;
};

// gap >= wide -> NoneDoubtful; narrow < gap < wide -> Mild; gap <= narrow -> ModerateSevere.
Stage phantom_stage(int gap_width, int wide_threshold = 14, int narrow_threshold = 6) noexcept;

// Throws DomainError when the parameters are invalid (gap_width >= size, etc).
ImageRecord generate_phantom(const PhantomParams& params);

// Joint-gap measurement on a standardized (left, positive) image: the longest run of rows
// whose mean over the central column strip falls below the midpoint of the row profile.
int measure_gap_width(const GrayImage& img);

// Central column strip used by measure_gap_width: [3n/8, 5n/8).
struct ColumnRange {
  int begin = 0;
  int end = 0;
};
ColumnRange gap_measurement_strip(int cols) noexcept;

// Gap and osteophyte ranges used to sample a stage-conditional phantom at 64 px; they are
// rescaled linearly for other sizes.
struct PhantomCorpusOptions {
  int size = 64;
  double noise_sigma = 6.0;
  double right_fraction = 0.5;
  double negative_fraction = 0.0;
  int images_per_patient = 2;
};

// `count` phantoms of the given stage, seeded deterministically from `seed`. Patient ids
// carry `patient_prefix`; consecutive images share a patient (left and right knee).
std::vector<ImageRecord> generate_phantom_cohort(Stage stage, std::size_t count, std::uint64_t seed,
                                                 const PhantomCorpusOptions& options = {},
                                                 const std::string& patient_prefix = "P");

}  // namespace koa::data

#include "koa/dataset/records.hpp"

#include <algorithm>
#include <cctype>

#include "koa/common/errors.hpp"
#include "koa/common/png_io.hpp"

namespace koa::data {

Stage stage_from_index(int index) {
  if (index < 0 || index >= static_cast<int>(kNumStages)) {
    throw DomainError("stage index out of range: " + std::to_string(index));
  }
  return static_cast<Stage>(index);
}

std::string_view stage_name(Stage s) noexcept {
  switch (s) {
    case Stage::NoneDoubtful:
      return "NoneDoubtful";
    case Stage::Mild:
      return "Mild";
    case Stage::ModerateSevere:
      return "ModerateSevere";
  }
  return "?";
}

std::string_view side_name(Side s) noexcept { return s == Side::Left ? "Left" : "Right"; }

Side parse_side(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "left" || lower == "l") return Side::Left;
  if (lower == "right" || lower == "r") return Side::Right;
  throw DomainError("unknown side '" + std::string(text) + "'");
}

Stage group_kl_to_stage(int kl) {
  switch (kl) {
    case 0:
    case 1:
      return Stage::NoneDoubtful;
    case 2:
      return Stage::Mild;
    case 3:
    case 4:
      return Stage::ModerateSevere;
    default:
      throw DomainError("KL grade must be in 0..4, got " + std::to_string(kl));
  }
}

GrayImage ImageRecord::load_pixels() const {
  if (pixels) return *pixels;
  if (path.empty()) throw IoError("record for patient " + patient_id + " has neither pixels nor a path");
  return read_png_gray(path);
}

DatasetIndex DatasetIndex::from_records(std::vector<ImageRecord> records) {
  DatasetIndex index;
  index.records = std::move(records);
  for (const auto& rec : index.records) ++index.counts_by_stage[index_of(rec.stage())];
  return index;
}

bool matches_reference_counts(const DatasetIndex& index) noexcept { return index.counts_by_stage == kReferenceStageCounts; }

}  // namespace koa::data

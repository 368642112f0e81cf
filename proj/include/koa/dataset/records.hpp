#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "koa/common/image.hpp"

namespace koa::data {

enum class Side { Left, Right };

// Clinical grouping of Kellgren-Lawrence grades. The integer value is the class index
// used by every model and report.
enum class Stage : int { NoneDoubtful = 0, Mild = 1, ModerateSevere = 2 };

inline constexpr std::size_t kNumStages = 3;
inline constexpr std::array<Stage, kNumStages> kAllStages{Stage::NoneDoubtful, Stage::Mild, Stage::ModerateSevere};

constexpr int index_of(Stage s) noexcept { return static_cast<int>(s); }
Stage stage_from_index(int index);
std::string_view stage_name(Stage s) noexcept;
std::string_view side_name(Side s) noexcept;
Side parse_side(std::string_view text);

// KL0-1 -> NoneDoubtful, KL2 -> Mild, KL3-4 -> ModerateSevere. Throws DomainError outside 0..4.
Stage group_kl_to_stage(int kl);

struct ImageRecord {
  std::filesystem::path path;
  std::string patient_id;
  Side side = Side::Left;
  int kl_grade = 0;
  // Manifest override for the negative-radiograph detector.
  std::optional<bool> negative_hint;
  // Resident pixels (phantoms, preprocessed cohorts). When empty, pixels come from `path`.
  std::optional<GrayImage> pixels;

  Stage stage() const { return group_kl_to_stage(kl_grade); }
  // Returns resident pixels or reads the PNG at `path`; unreadable files surface here.
  GrayImage load_pixels() const;
};

using StageCounts = std::array<std::size_t, kNumStages>;

struct DatasetIndex {
  std::vector<ImageRecord> records;
  StageCounts counts_by_stage{};

  static DatasetIndex from_records(std::vector<ImageRecord> records);
};

// Grouped totals of the curated OAI/MOST knee set (14134 images); lets the CLI assert
// that a real-data manifest is complete.
inline constexpr StageCounts kReferenceStageCounts{8278, 3100, 2756};

bool matches_reference_counts(const DatasetIndex& index) noexcept;

}  // namespace koa::data

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "koa/classifier/classifier.hpp"
#include "koa/common/image.hpp"
#include "koa/evaluation/metrics.hpp"
#include "koa/gan/cycle_gan.hpp"

namespace koa::eval {

struct CohortImage {
  std::string id;
  GrayImage image;
};

struct Ranked {
  std::size_t index = 0;  // position in the input sequence
  double confidence = 0;
};

struct RankResult {
  std::vector<Ranked> items;
  bool truncated = false;  // k exceeded the cohort size; everything was returned
};

// Descending by probability of `target`; ties keep input order.
RankResult rank_by_confidence(std::span<const Probabilities> probabilities, data::Stage target, std::size_t k);
RankResult rank_by_confidence(cnn::ClassifierNet& model, const std::vector<GrayImage>& images, data::Stage target,
                              std::size_t k);

struct AttackRecord {
  std::string id;
  double pre_confidence = 0;  // probability of the original class before the attack
  Probabilities pre{};
  Probabilities post{};
  data::Stage pre_prediction = data::Stage::NoneDoubtful;
  data::Stage post_prediction = data::Stage::NoneDoubtful;
};

struct AttackReport {
  data::Stage original = data::Stage::NoneDoubtful;
  gan::Direction direction = gan::Direction::TowardFuture;
  std::array<std::int64_t, kClasses> counts{};
  std::array<std::int64_t, kClasses> hundredths{};  // percentage x 100, rounded half-up
  std::array<bool, kClasses> reported{};
  std::vector<AttackRecord> records;

  std::int64_t cohort_size() const noexcept;
  double percent(data::Stage s) const noexcept;
  double flip_fraction(data::Stage to) const;
  std::array<double, kClasses> mean_pre() const;
  std::array<double, kClasses> mean_post() const;
};

// Mild attacks either way; NoneDoubtful only toward the future; ModerateSevere only toward the past.
bool direction_valid(data::Stage original, gan::Direction direction) noexcept;

// round_half_up(count * 10000 / total) computed in integers.
std::int64_t percent_hundredths(std::int64_t count, std::int64_t total);
std::string format_hundredths(std::int64_t h);

// Tallies counts and percentages. For Mild cohorts the end class opposite to the attack is
// left unreported when nothing landed there.
AttackReport tabulate(data::Stage original, gan::Direction direction, const std::array<std::int64_t, kClasses>& counts);

using ImageTransform = std::function<GrayImage(const GrayImage&)>;
using BatchPredictor = std::function<std::vector<Probabilities>(const std::vector<GrayImage>&)>;

// Each image is transformed exactly once and re-predicted.
// Throws DomainError on an empty cohort or a direction invalid for the class.
AttackReport one_shot_attack(const ImageTransform& transform, const BatchPredictor& predict,
                             const std::vector<CohortImage>& cohort, data::Stage original, gan::Direction direction);
AttackReport one_shot_attack(gan::CycleNetworks& nets, cnn::ClassifierNet& model, const std::vector<CohortImage>& cohort,
                             data::Stage original, gan::Direction direction);

// One row per report in the layout original, direction, then a percentage per class.
std::string render_attack_table(const std::vector<AttackReport>& reports);
// "original,direction,class,count,percent" plus per-image rows.
std::string attack_rows_csv(const std::vector<AttackReport>& reports);

}  // namespace koa::eval

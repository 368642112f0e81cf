#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "koa/dataset/records.hpp"

namespace koa::eval {

constexpr std::size_t kClasses = data::kNumStages;
using Probabilities = std::array<double, kClasses>;

// Rows are true stages, columns predicted stages.
struct ConfusionMatrix {
  std::array<std::array<std::int64_t, kClasses>, kClasses> counts{};

  std::int64_t total() const noexcept;
  std::int64_t row_sum(std::size_t truth) const noexcept;
  std::int64_t col_sum(std::size_t predicted) const noexcept;
  std::int64_t trace() const noexcept;
};

struct ClassMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::int64_t support = 0;
  // Set when the corresponding denominator was zero and the value was reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

struct Averages {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

struct ClassReport {
  std::array<ClassMetrics, kClasses> per_class{};
  Averages macro;
  Averages weighted;  // support-weighted
  double accuracy = 0;
  std::int64_t total = 0;
};

struct Evaluation {
  ConfusionMatrix matrix;
  ClassReport report;
};

// Throws DomainError on empty or unequal-length inputs.
Evaluation confusion_and_report(std::span<const data::Stage> truths, std::span<const data::Stage> predictions);
ClassReport report_from_confusion(const ConfusionMatrix& m);

// sum(v_i * s_i) / sum(s_i); throws DomainError when the supports sum to zero.
double weighted_average(std::span<const double> values, std::span<const double> supports);

// Area under the ROC curve of `scores` for the positive samples, by the Mann-Whitney rank
// statistic with midranks for ties. Empty when either group is empty.
std::optional<double> auc_mann_whitney(std::span<const double> scores, std::span<const bool> positive);

// One-vs-rest AUC of each class probability against the binarized truth.
std::array<std::optional<double>, kClasses> roc_auc_ovr(std::span<const Probabilities> scores,
                                                        std::span<const data::Stage> truths);

// Text rendering in the layout of a precision/recall/F1 table with support, then the
// accuracy, macro and weighted rows.
std::string render_report_table(const ClassReport& r);
std::string render_confusion(const ConfusionMatrix& m);

// Machine-readable rows: "section,class,metric,value".
std::string report_rows_csv(const Evaluation& e, const std::array<std::optional<double>, kClasses>& auc);

// Fixed-notation rendering used by every report so reruns are byte-identical.
std::string fixed(double v, int decimals);

}  // namespace koa::eval

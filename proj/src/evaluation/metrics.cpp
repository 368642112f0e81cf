#include "koa/evaluation/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>
#include <sstream>

#include "koa/common/errors.hpp"

namespace koa::eval {
namespace {

double ratio(std::int64_t num, std::int64_t den, bool& undefined) {
  undefined = den == 0;
  return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string cname(std::size_t c) { return std::string(data::stage_name(data::stage_from_index(static_cast<int>(c)))); }

}  // namespace

std::int64_t ConfusionMatrix::total() const noexcept {
  std::int64_t t = 0;
  for (const auto& row : counts) t += std::accumulate(row.begin(), row.end(), std::int64_t{0});
  return t;
}

std::int64_t ConfusionMatrix::row_sum(std::size_t truth) const noexcept {
  return std::accumulate(counts[truth].begin(), counts[truth].end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::col_sum(std::size_t predicted) const noexcept {
  std::int64_t t = 0;
  for (const auto& row : counts) t += row[predicted];
  return t;
}

std::int64_t ConfusionMatrix::trace() const noexcept {
  std::int64_t t = 0;
  for (std::size_t i = 0; i < kClasses; ++i) t += counts[i][i];
  return t;
}

ClassReport report_from_confusion(const ConfusionMatrix& m) {
  ClassReport r;
  r.total = m.total();
  if (r.total == 0) throw DomainError("classification report: no samples");
  for (std::size_t c = 0; c < kClasses; ++c) {
    auto& k = r.per_class[c];
    const auto tp = m.counts[c][c];
    k.support = m.row_sum(c);
    k.precision = ratio(tp, m.col_sum(c), k.precision_undefined);
    k.recall = ratio(tp, k.support, k.recall_undefined);
    k.f1_undefined = k.precision + k.recall == 0.0;
    k.f1 = k.f1_undefined ? 0.0 : 2 * k.precision * k.recall / (k.precision + k.recall);
    r.macro.precision += k.precision / kClasses;
    r.macro.recall += k.recall / kClasses;
    r.macro.f1 += k.f1 / kClasses;
    const double w = static_cast<double>(k.support) / static_cast<double>(r.total);
    r.weighted.precision += w * k.precision;
    r.weighted.recall += w * k.recall;
    r.weighted.f1 += w * k.f1;
  }
  r.accuracy = static_cast<double>(m.trace()) / static_cast<double>(r.total);
  return r;
}

Evaluation confusion_and_report(std::span<const data::Stage> truths, std::span<const data::Stage> predictions) {
  if (truths.size() != predictions.size()) throw DomainError("confusion: truths and predictions differ in length");
  if (truths.empty()) throw DomainError("confusion: empty input");
  Evaluation e;
  for (std::size_t i = 0; i < truths.size(); ++i) ++e.matrix.counts[data::index_of(truths[i])][data::index_of(predictions[i])];
  e.report = report_from_confusion(e.matrix);
  return e;
}

double weighted_average(std::span<const double> values, std::span<const double> supports) {
  if (values.size() != supports.size()) throw DomainError("weighted_average: length mismatch");
  double num = 0, den = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    num += values[i] * supports[i];
    den += supports[i];
  }
  if (den == 0.0) throw DomainError("weighted_average: zero total support");
  return num / den;
}

std::optional<double> auc_mann_whitney(std::span<const double> scores, std::span<const bool> positive) {
  if (scores.size() != positive.size()) throw DomainError("auc: length mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (positive[order[k]]) {
        rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const double p = static_cast<double>(n_pos);
  return (rank_sum - p * (p + 1) / 2.0) / (p * static_cast<double>(n_neg));
}

std::array<std::optional<double>, kClasses> roc_auc_ovr(std::span<const Probabilities> scores,
                                                        std::span<const data::Stage> truths) {
  if (scores.size() != truths.size()) throw DomainError("roc_auc_ovr: length mismatch");
  std::array<std::optional<double>, kClasses> out;
  std::vector<double> s(scores.size());
  std::unique_ptr<bool[]> pos(new bool[scores.size()]);
  for (std::size_t c = 0; c < kClasses; ++c) {
    for (std::size_t i = 0; i < scores.size(); ++i) {
      s[i] = scores[i][c];
      pos[i] = static_cast<std::size_t>(data::index_of(truths[i])) == c;
    }
    out[c] = auc_mann_whitney(s, std::span<const bool>(pos.get(), scores.size()));
  }
  return out;
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v == 0.0 ? 0.0 : v);  // no "-0.000"
  return buf;
}

std::string render_report_table(const ClassReport& r) {
  std::ostringstream os;
  os << pad_right("", 22) << pad_left("precision", 10) << pad_left("recall", 10) << pad_left("f1-score", 10)
     << pad_left("support", 10) << '\n';
  for (std::size_t c = 0; c < kClasses; ++c) {
    const auto& k = r.per_class[c];
    os << pad_right(cname(c), 22) << pad_left(fixed(k.precision, 3), 10)
       << pad_left(fixed(k.recall, 3), 10) << pad_left(fixed(k.f1, 3), 10) << pad_left(std::to_string(k.support), 10);
    if (k.precision_undefined || k.recall_undefined) os << "  (undefined set to 0)";
    os << '\n';
  }
  os << '\n'
     << pad_right("accuracy", 22) << pad_left("", 20) << pad_left(fixed(r.accuracy, 3), 10)
     << pad_left(std::to_string(r.total), 10) << '\n';
  os << pad_right("macro avg", 22) << pad_left(fixed(r.macro.precision, 3), 10) << pad_left(fixed(r.macro.recall, 3), 10)
     << pad_left(fixed(r.macro.f1, 3), 10) << pad_left(std::to_string(r.total), 10) << '\n';
  os << pad_right("weighted avg", 22) << pad_left(fixed(r.weighted.precision, 3), 10)
     << pad_left(fixed(r.weighted.recall, 3), 10) << pad_left(fixed(r.weighted.f1, 3), 10)
     << pad_left(std::to_string(r.total), 10) << '\n';
  return os.str();
}

std::string render_confusion(const ConfusionMatrix& m) {
  std::ostringstream os;
  os << pad_right("true \\ predicted", 22);
  for (std::size_t c = 0; c < kClasses; ++c) os << pad_left(cname(c), 16);
  os << '\n';
  for (std::size_t t = 0; t < kClasses; ++t) {
    os << pad_right(cname(t), 22);
    for (std::size_t c = 0; c < kClasses; ++c) os << pad_left(std::to_string(m.counts[t][c]), 16);
    os << '\n';
  }
  return os.str();
}

std::string report_rows_csv(const Evaluation& e, const std::array<std::optional<double>, kClasses>& auc) {
  std::ostringstream os;
  os << "section,class,metric,value\n";
  for (std::size_t t = 0; t < kClasses; ++t) {
    for (std::size_t c = 0; c < kClasses; ++c) {
      os << "confusion," << cname(t) << ",predicted_"
         << cname(c) << ',' << e.matrix.counts[t][c] << '\n';
    }
  }
  for (std::size_t c = 0; c < kClasses; ++c) {
    const auto& k = e.report.per_class[c];
    const auto name = cname(c);
    os << "class," << name << ",precision," << fixed(k.precision, 6) << '\n';
    os << "class," << name << ",recall," << fixed(k.recall, 6) << '\n';
    os << "class," << name << ",f1," << fixed(k.f1, 6) << '\n';
    os << "class," << name << ",support," << k.support << '\n';
    os << "class," << name << ",auc," << (auc[c] ? fixed(*auc[c], 6) : "missing") << '\n';
  }
  os << "overall,all,accuracy," << fixed(e.report.accuracy, 6) << '\n';
  os << "macro,all,precision," << fixed(e.report.macro.precision, 6) << '\n';
  os << "macro,all,recall," << fixed(e.report.macro.recall, 6) << '\n';
  os << "macro,all,f1," << fixed(e.report.macro.f1, 6) << '\n';
  os << "weighted,all,precision," << fixed(e.report.weighted.precision, 6) << '\n';
  os << "weighted,all,recall," << fixed(e.report.weighted.recall, 6) << '\n';
  os << "weighted,all,f1," << fixed(e.report.weighted.f1, 6) << '\n';
  return os.str();
}

}  // namespace koa::eval

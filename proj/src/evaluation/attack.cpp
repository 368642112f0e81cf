#include "koa/evaluation/attack.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "koa/common/errors.hpp"

namespace koa::eval {
namespace {

std::string cname(std::size_t c) { return std::string(data::stage_name(data::stage_from_index(static_cast<int>(c)))); }

std::size_t argmax(const Probabilities& p) {
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

}  // namespace

RankResult rank_by_confidence(std::span<const Probabilities> probabilities, data::Stage target, std::size_t k) {
  const auto c = static_cast<std::size_t>(data::index_of(target));
  std::vector<Ranked> all(probabilities.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = {i, probabilities[i][c]};
  std::stable_sort(all.begin(), all.end(), [](const Ranked& a, const Ranked& b) { return a.confidence > b.confidence; });
  RankResult r;
  r.truncated = k > all.size();
  all.resize(std::min(k, all.size()));
  r.items = std::move(all);
  return r;
}

RankResult rank_by_confidence(cnn::ClassifierNet& model, const std::vector<GrayImage>& images, data::Stage target,
                              std::size_t k) {
  const auto probs = cnn::predict_batch(model, images);
  return rank_by_confidence(probs, target, k);
}

std::int64_t AttackReport::cohort_size() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

double AttackReport::percent(data::Stage s) const noexcept {
  return static_cast<double>(hundredths[static_cast<std::size_t>(data::index_of(s))]) / 100.0;
}

double AttackReport::flip_fraction(data::Stage to) const {
  const auto n = cohort_size();
  if (n == 0) throw DomainError("attack report: empty cohort");
  return static_cast<double>(counts[static_cast<std::size_t>(data::index_of(to))]) / static_cast<double>(n);
}

std::array<double, kClasses> AttackReport::mean_pre() const {
  std::array<double, kClasses> m{};
  for (const auto& r : records)
    for (std::size_t c = 0; c < kClasses; ++c) m[c] += r.pre[c] / static_cast<double>(records.size());
  return m;
}

std::array<double, kClasses> AttackReport::mean_post() const {
  std::array<double, kClasses> m{};
  for (const auto& r : records)
    for (std::size_t c = 0; c < kClasses; ++c) m[c] += r.post[c] / static_cast<double>(records.size());
  return m;
}

bool direction_valid(data::Stage original, gan::Direction direction) noexcept {
  switch (original) {
    case data::Stage::Mild: return true;
    case data::Stage::NoneDoubtful: return direction == gan::Direction::TowardFuture;
    case data::Stage::ModerateSevere: return direction == gan::Direction::TowardPast;
  }
  return false;
}

std::int64_t percent_hundredths(std::int64_t count, std::int64_t total) {
  if (total <= 0) throw DomainError("percentage of an empty total");
  if (count < 0 || count > total) throw DomainError("percentage count out of range");
  return (count * 20000 + total) / (2 * total);
}

std::string format_hundredths(std::int64_t h) {
  std::ostringstream os;
  os << h / 100 << '.' << (h % 100 < 10 ? "0" : "") << h % 100;
  return os.str();
}

AttackReport tabulate(data::Stage original, gan::Direction direction, const std::array<std::int64_t, kClasses>& counts) {
  if (!direction_valid(original, direction)) throw DomainError("attack direction is not valid for this class");
  AttackReport r;
  r.original = original;
  r.direction = direction;
  r.counts = counts;
  const auto n = r.cohort_size();
  if (n == 0) throw DomainError("attack: empty cohort");
  for (std::size_t c = 0; c < kClasses; ++c) {
    r.hundredths[c] = percent_hundredths(counts[c], n);
    r.reported[c] = true;
  }
  if (original == data::Stage::Mild) {
    const auto away = direction == gan::Direction::TowardFuture ? data::Stage::NoneDoubtful : data::Stage::ModerateSevere;
    const auto a = static_cast<std::size_t>(data::index_of(away));
    if (counts[a] == 0) r.reported[a] = false;
  }
  return r;
}

AttackReport one_shot_attack(const ImageTransform& transform, const BatchPredictor& predict,
                             const std::vector<CohortImage>& cohort, data::Stage original, gan::Direction direction) {
  if (cohort.empty()) throw DomainError("attack: empty cohort");
  if (!direction_valid(original, direction)) throw DomainError("attack direction is not valid for this class");
  std::vector<GrayImage> before, after;
  before.reserve(cohort.size());
  after.reserve(cohort.size());
  for (const auto& c : cohort) {
    before.push_back(c.image);
    after.push_back(transform(c.image));
  }
  const auto pre = predict(before);
  const auto post = predict(after);
  if (pre.size() != cohort.size() || post.size() != cohort.size()) throw ShapeError("attack: predictor returned wrong count");

  std::array<std::int64_t, kClasses> counts{};
  std::vector<AttackRecord> records;
  const auto oc = static_cast<std::size_t>(data::index_of(original));
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    AttackRecord rec;
    rec.id = cohort[i].id;
    rec.pre = pre[i];
    rec.post = post[i];
    rec.pre_confidence = pre[i][oc];
    rec.pre_prediction = data::stage_from_index(static_cast<int>(argmax(pre[i])));
    rec.post_prediction = data::stage_from_index(static_cast<int>(argmax(post[i])));
    ++counts[argmax(post[i])];
    records.push_back(std::move(rec));
  }
  auto report = tabulate(original, direction, counts);
  report.records = std::move(records);
  return report;
}

AttackReport one_shot_attack(gan::CycleNetworks& nets, cnn::ClassifierNet& model, const std::vector<CohortImage>& cohort,
                             data::Stage original, gan::Direction direction) {
  return one_shot_attack([&](const GrayImage& img) { return gan::transform(img, direction, nets); },
                         [&](const std::vector<GrayImage>& imgs) { return cnn::predict_batch(model, imgs); }, cohort,
                         original, direction);
}

std::string render_attack_table(const std::vector<AttackReport>& reports) {
  auto pad = [](std::string s, std::size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); };
  std::ostringstream os;
  os << pad("original", 18) << pad("direction", 16);
  for (std::size_t c = 0; c < kClasses; ++c) os << pad(cname(c), 16);
  os << "n\n";
  for (const auto& r : reports) {
    os << pad(std::string(data::stage_name(r.original)), 18) << pad(std::string(gan::direction_name(r.direction)), 16);
    for (std::size_t c = 0; c < kClasses; ++c)
      os << pad(r.reported[c] ? format_hundredths(r.hundredths[c]) + "%" : "-", 16);
    os << r.cohort_size() << '\n';
  }
  return os.str();
}

std::string attack_rows_csv(const std::vector<AttackReport>& reports) {
  std::ostringstream os;
  os << "original,direction,class,count,percent\n";
  for (const auto& r : reports) {
    for (std::size_t c = 0; c < kClasses; ++c) {
      os << data::stage_name(r.original) << ',' << gan::direction_name(r.direction) << ',' << cname(c) << ','
         << r.counts[c] << ',' << (r.reported[c] ? format_hundredths(r.hundredths[c]) : "-") << '\n';
    }
  }
  os << "\noriginal,direction,id,pre_confidence,pre_prediction,post_prediction,post_0,post_1,post_2\n";
  for (const auto& r : reports) {
    for (const auto& rec : r.records) {
      os << data::stage_name(r.original) << ',' << gan::direction_name(r.direction) << ',' << rec.id << ','
         << fixed(rec.pre_confidence, 6) << ',' << data::stage_name(rec.pre_prediction) << ','
         << data::stage_name(rec.post_prediction) << ',' << fixed(rec.post[0], 6) << ',' << fixed(rec.post[1], 6) << ','
         << fixed(rec.post[2], 6) << '\n';
    }
  }
  return os.str();
}

}  // namespace koa::eval

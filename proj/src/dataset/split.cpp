#include "koa/dataset/split.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include "koa/common/errors.hpp"
#include "koa/common/random.hpp"

namespace koa::data {

Split split_patient_aware(const DatasetIndex& index, SplitFractions fractions, std::uint64_t seed,
                          SplitOptions options) {
  const std::array<double, 3> f{fractions.train, fractions.validation, fractions.test};
  if (std::any_of(f.begin(), f.end(), [](double v) { return !(v >= 0.0) || !std::isfinite(v); })) {
    throw DomainError("split fractions must be finite and non-negative");
  }
  if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) throw DomainError("split fractions must sum to 1");

  std::set<std::string> unique_ids;
  for (const auto& rec : index.records) unique_ids.insert(rec.patient_id);
  std::vector<std::string> patients(unique_ids.begin(), unique_ids.end());

  const auto wanted = static_cast<std::size_t>(std::count_if(f.begin(), f.end(), [](double v) { return v > 0.0; }));
  if (options.require_nonempty && patients.size() < wanted) {
    throw InfeasibleError("cannot fill " + std::to_string(wanted) + " partitions from " +
                          std::to_string(patients.size()) + " patients");
  }

  Rng rng(seed);
  fisher_yates(std::span<std::string>(patients), rng);

  std::unordered_map<std::string, int> assignment;
  std::array<std::size_t, 3> counts{};
  for (std::size_t k = 1; k <= patients.size(); ++k) {
    int best = 0;
    double best_deficit = -std::numeric_limits<double>::infinity();
    for (int p = 0; p < 3; ++p) {
      if (f[p] <= 0.0) continue;
      const double deficit = f[p] * static_cast<double>(k) - static_cast<double>(counts[p]);
      if (deficit > best_deficit) {
        best_deficit = deficit;
        best = p;
      }
    }
    ++counts[best];
    assignment[patients[k - 1]] = best;
  }

  if (options.require_nonempty) {
    for (int p = 0; p < 3; ++p) {
      if (f[p] > 0.0 && counts[p] == 0) {
        throw InfeasibleError("partition " + std::to_string(p) + " received no patients");
      }
    }
  }

  Split split;
  split.fractions = fractions;
  for (const auto& rec : index.records) {
    switch (assignment.at(rec.patient_id)) {
      case 0:
        split.train.push_back(rec);
        break;
      case 1:
        split.validation.push_back(rec);
        break;
      default:
        split.test.push_back(rec);
        break;
    }
  }
  return split;
}

}  // namespace koa::data

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

namespace test_oracle {

// Printed attack-table rows, as hundredths of a percent. Every row lists all three classes;
// the Mild rows omit the far end class, which is taken as zero.
struct PrintedRow {
  std::vector<std::int64_t> hundredths;
  std::int64_t cohort = 0;  // known cohort size, 0 when it has to be searched for
};

inline const std::vector<PrintedRow>& printed_attack_rows() {
  static const std::vector<PrintedRow> rows{
      {{513, 1111, 8376}, 0},
      {{7561, 1951, 488}, 0},
      {{0, 2400, 7600}, 100},
      {{3100, 6900, 0}, 100},
  };
  return rows;
}

struct Reconstruction {
  std::int64_t total = 0;
  std::vector<std::int64_t> counts;
};

// Smallest denominator n in [1, max_n] for which integer counts summing to n reproduce every
// printed percentage when rounded to two decimals. Independent of the library: floating-point
// rounding of 100*c/n and a plain scan over c.
inline std::optional<Reconstruction> denominator_search(const std::vector<std::int64_t>& hundredths,
                                                        std::int64_t max_n = 500) {
  for (std::int64_t n = 1; n <= max_n; ++n) {
    Reconstruction r{n, {}};
    std::int64_t sum = 0;
    bool ok = true;
    for (auto h : hundredths) {
      std::optional<std::int64_t> found;
      for (std::int64_t c = 0; c <= n && !found; ++c) {
        if (static_cast<std::int64_t>(std::floor(100.0 * 100.0 * static_cast<double>(c) / static_cast<double>(n) + 0.5)) == h)
          found = c;
      }
      if (!found) {
        ok = false;
        break;
      }
      r.counts.push_back(*found);
      sum += *found;
    }
    if (ok && sum == n) return r;
  }
  return std::nullopt;
}

// Table 2 per-class precision weighted by the test-split supports (15% of each class total).
inline double table2_weighted_precision() {
  const double p[3] = {0.877, 0.601, 0.873};
  const double n[3] = {8278 * 0.15, 3100 * 0.15, 2756 * 0.15};
  return (p[0] * n[0] + p[1] * n[1] + p[2] * n[2]) / (n[0] + n[1] + n[2]);
}

}  // namespace test_oracle

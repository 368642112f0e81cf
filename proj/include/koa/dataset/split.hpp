#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "koa/dataset/records.hpp"

namespace koa::data {

struct SplitFractions {
  double train = 0.7;
  double validation = 0.15;
  double test = 0.15;
};

struct Split {
  std::vector<ImageRecord> train;
  std::vector<ImageRecord> validation;
  std::vector<ImageRecord> test;
  SplitFractions fractions;
};

struct SplitOptions {
  // When set, every partition with a positive fraction must receive at least one patient.
  bool require_nonempty = false;
};

// Patient-level split: distinct patient ids are sorted, shuffled with `seed`, then dealt
// one at a time to the partition with the largest fraction deficit (f_i * k - n_i after
// k patients; ties go to the earlier partition). Records follow their patient.
//
// Fractions must be non-negative, sum to 1 within 1e-9 and include a positive entry.
Split split_patient_aware(const DatasetIndex& index, SplitFractions fractions, std::uint64_t seed,
                          SplitOptions options = {});

}  // namespace koa::data

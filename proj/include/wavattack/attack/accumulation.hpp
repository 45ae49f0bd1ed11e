#pragma once

#include <cstddef>
#include <span>

namespace wavattack::attack {

// Activation change of a linear unit w.x when every input moves by
// epsilon * sign(w): delta = epsilon * w.sign(w) = epsilon * sum |w_i|,
// which equals epsilon * m * n for m = mean |w_i|.
struct AccumulationReport {
  double delta_activation = 0.0;  // epsilon * w.sign(w), sum correctly rounded
  double abs_sum_delta = 0.0;     // epsilon * sum |w_i|, sum correctly rounded
  double mean_abs = 0.0;          // m
  std::size_t n = 0;
  double predicted = 0.0;  // epsilon * m * n
  // |delta_activation - predicted| / max(|delta_activation|, tiny)
  double relative_gap = 0.0;
};

AccumulationReport accumulation_effect(std::span<const double> w, double epsilon);

}  // namespace wavattack::attack

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "wavattack/attack/accumulation.hpp"
#include "wavattack/attack/fgsm.hpp"
#include "wavattack/error.hpp"

namespace wavattack::attack {

void AttackConfig::validate() const {
  if (!std::isfinite(epsilon) || epsilon < 0.0) {
    throw ConfigError("epsilon must be finite and non-negative, got " + std::to_string(epsilon));
  }
  if (steps == 0) throw ConfigError("steps must be at least 1");
  if (!(clip_min < clip_max)) throw ConfigError("clip_min must be below clip_max");
  const double b = effective_ball();
  if (!std::isfinite(b) || b < epsilon) throw ConfigError("ball must be at least epsilon");
}

namespace detail {

void fill_norms(AdversarialResult& r) {
  double linf = 0.0;
  std::vector<double> squares(r.eta.size());
  for (std::size_t i = 0; i < r.eta.size(); ++i) {
    linf = std::max(linf, std::fabs(r.eta[i]));
    squares[i] = r.eta[i] * r.eta[i];
  }
  r.linf = linf;
  r.l2 = std::sqrt(util::exact_sum(squares));
}

}  // namespace detail

AccumulationReport accumulation_effect(std::span<const double> w, double epsilon) {
  AccumulationReport r;
  r.n = w.size();
  std::vector<double> signed_terms(w.size()), abs_terms(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    signed_terms[i] = w[i] * util::sign(w[i]);
    abs_terms[i] = std::fabs(w[i]);
  }
  const double dot = util::exact_sum(signed_terms);
  const double abs_sum = util::exact_sum(abs_terms);
  r.delta_activation = epsilon * dot;
  r.abs_sum_delta = epsilon * abs_sum;
  r.mean_abs = r.n == 0 ? 0.0 : abs_sum / static_cast<double>(r.n);
  r.predicted = epsilon * r.mean_abs * static_cast<double>(r.n);
  const double scale = std::max(std::fabs(r.delta_activation), std::numeric_limits<double>::min());
  r.relative_gap = std::fabs(r.delta_activation - r.predicted) / scale;
  return r;
}

}  // namespace wavattack::attack

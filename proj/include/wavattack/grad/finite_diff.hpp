#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <span>
#include <string>
#include <vector>

#include "wavattack/error.hpp"

namespace wavattack::grad {

// Central difference (fn(x + h e_i) - fn(x - h e_i)) / 2h for each listed
// coordinate i. Used as an independent oracle for backward().
template <typename Fn>
  requires std::invocable<Fn&, std::span<const double>>
std::vector<double> finite_diff_grad(Fn&& fn, std::span<const double> x, double h,
                                     std::span<const std::size_t> coords) {
  if (!(h > 0.0)) throw ConfigError("finite difference step must be positive");
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> out;
  out.reserve(coords.size());
  auto eval = [&](std::size_t i) {
    const double v = fn(std::span<const double>(point));
    if (!std::isfinite(v)) throw OverflowError("non-finite function value at coordinate " + std::to_string(i));
    return v;
  };
  for (std::size_t i : coords) {
    if (i >= point.size()) throw ConfigError("finite difference coordinate out of range");
    const double saved = point[i];
    point[i] = saved + h;
    const double plus = eval(i);
    point[i] = saved - h;
    const double minus = eval(i);
    point[i] = saved;
    out.push_back((plus - minus) / (2.0 * h));
  }
  return out;
}

template <typename Fn>
  requires std::invocable<Fn&, std::span<const double>>
std::vector<double> finite_diff_grad(Fn&& fn, std::span<const double> x, double h) {
  std::vector<std::size_t> all(x.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return finite_diff_grad(std::forward<Fn>(fn), x, h, std::span<const std::size_t>(all));
}

// |a - b| / max(|a|, |b|, floor). The floor keeps coordinates whose true
// derivative is essentially zero from dominating through rounding noise.
inline double relative_error(double a, double b, double floor = 1e-8) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

}  // namespace wavattack::grad

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wavattack/data/waveform.hpp"
#include "wavattack/error.hpp"
#include "wavattack/nn/model.hpp"

namespace wavattack::diag {

// |dJ/dx_i| for every input sample.
struct GradientProfile {
  std::vector<double> magnitudes;
  std::uint32_t sample_rate = 0;
  std::string model_kind;
};

// Raised when the tail window of a profile carries no gradient at all.
class UndefinedRatio : public Error {
 public:
  using Error::Error;
};

void check_profile(const GradientProfile& p);

template <typename M>
GradientProfile input_gradient_profile(const M& model, const data::Waveform& x, std::size_t y,
                                       std::string kind = "custom") {
  const auto lg = model.loss_and_input_grad(x.view(), y);
  GradientProfile p{{}, x.sample_rate, std::move(kind)};
  p.magnitudes.reserve(lg.input_grad.size());
  for (double g : lg.input_grad) p.magnitudes.push_back(std::fabs(g));
  check_profile(p);
  return p;
}

GradientProfile input_gradient_profile(const nn::Model& model, const data::Waveform& x, std::size_t y);

// mean(first head_frac of the profile) / mean(last tail_frac). Window sizes
// are floor(frac * n), at least one sample each, and must not overlap.
double vanishing_ratio(const GradientProfile& profile, double head_frac = 0.1, double tail_frac = 0.1);

// Single-layer tanh RNN s_t = tanh(U x_t + W s_{t-1}), s_0 = 0, with
// hidden-sized inputs, W rescaled to the requested spectral norm and loss
// J = v.s_n. The profile holds the Euclidean norm of dJ/dx_t per step.
// Since tanh' <= 1, |dJ/dx_i| <= bound_constant * spectral_norm^(n - i)
// for steps i = 1..n, with bound_constant = |U|_2 |v|.
struct ContractionDemo {
  GradientProfile profile;  // one magnitude per step
  double spectral_norm = 0.0;
  double bound_constant = 0.0;

  // Bound for the 0-based step index.
  double bound(std::size_t step) const;
};

ContractionDemo contraction_rnn_demo(std::size_t n_steps, double spectral_norm, std::uint64_t seed,
                                     std::size_t hidden = 16);

// "index magnitude" per line after '#' header lines.
std::string format_profile(const GradientProfile& p);
void save_profile(const GradientProfile& p, const std::filesystem::path& path);

}  // namespace wavattack::diag

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "wavattack/data/waveform.hpp"
#include "wavattack/error.hpp"
#include "wavattack/util/numeric.hpp"

namespace wavattack::attack {

struct AttackConfig {
  double epsilon = 0.0;  // per-step magnitude
  std::size_t steps = 1;
  double clip_min = 0.0;
  double clip_max = 1.0;
  double ball = -1.0;  // total L-inf budget; negative means steps * epsilon

  double effective_ball() const { return ball < 0.0 ? static_cast<double>(steps) * epsilon : ball; }
  // Throws ConfigError on a negative or non-finite epsilon, zero steps, an
  // empty clip range or a ball smaller than one step.
  void validate() const;
};

struct AdversarialResult {
  data::Waveform original;
  std::vector<double> eta;
  data::Waveform adversarial;  // clip(original + eta), element-wise
  std::vector<double> pred_before;
  std::vector<double> pred_after;
  double loss_before = 0.0;
  double loss_after = 0.0;
  double linf = 0.0;
  double l2 = 0.0;
  // The loss gradient at the original input was identically zero, so no
  // direction was available and eta is zero.
  bool null_gradient = false;
};

// Anything that can report its loss, input gradient and class probabilities
// for a single example: nn::Model, or a hand-built model in tests.
template <typename M>
concept Attackable = requires(const M& m, std::span<const double> x, std::size_t y) {
  { m.loss_and_input_grad(x, y).loss } -> std::convertible_to<double>;
  { m.loss_and_input_grad(x, y).input_grad } -> std::convertible_to<std::vector<double>>;
  { m.loss_and_input_grad(x, y).probs } -> std::convertible_to<std::vector<double>>;
  { m.score(x, y).loss } -> std::convertible_to<double>;
  { m.score(x, y).probs } -> std::convertible_to<std::vector<double>>;
};

namespace detail {

inline void clip_into(std::span<const double> x, std::span<const double> eta, double lo, double hi,
                      std::vector<double>& out) {
  out.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::clamp(x[i] + eta[i], lo, hi);
}

void fill_norms(AdversarialResult& r);

}  // namespace detail

// Signed-gradient steps inside an L-inf ball. The perturbation accumulates
// as eta <- clamp(eta + epsilon * sign(g), -ball, ball), where g is the loss
// gradient at clip(x + eta); the result is clip(x + eta). Only the true label
// y is ever used. With steps == 1 this is exactly FGSM.
template <Attackable M>
AdversarialResult iterative_fgsm(const M& model, const data::Waveform& x, std::size_t y, const AttackConfig& cfg) {
  cfg.validate();
  const double ball = cfg.effective_ball();
  AdversarialResult r;
  r.original = x;
  r.eta.assign(x.size(), 0.0);
  std::vector<double> point(x.samples);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const auto lg = model.loss_and_input_grad(std::span<const double>(point), y);
    if (step == 0) {
      r.loss_before = lg.loss;
      r.pred_before = lg.probs;
      r.null_gradient = std::all_of(lg.input_grad.begin(), lg.input_grad.end(), [](double g) { return g == 0.0; });
      if (r.null_gradient) break;
    }
    for (std::size_t i = 0; i < r.eta.size(); ++i) {
      r.eta[i] = std::clamp(r.eta[i] + cfg.epsilon * util::sign(lg.input_grad[i]), -ball, ball);
    }
    detail::clip_into(x.samples, r.eta, cfg.clip_min, cfg.clip_max, point);
  }
  r.adversarial = data::Waveform{point, x.sample_rate, x.source_id};
  if (r.null_gradient) {
    r.loss_after = r.loss_before;
    r.pred_after = r.pred_before;
  } else {
    const auto after = model.score(std::span<const double>(point), y);
    r.loss_after = after.loss;
    r.pred_after = after.probs;
  }
  detail::fill_norms(r);
  return r;
}

// eta = epsilon * sign(grad_x J(x, y)), sign(0) = 0; cfg.steps must be 1.
template <Attackable M>
AdversarialResult fgsm(const M& model, const data::Waveform& x, std::size_t y, const AttackConfig& cfg) {
  if (cfg.steps != 1) {
    throw ConfigError("fgsm takes a single step, got steps=" + std::to_string(cfg.steps) + "; use iterative_fgsm");
  }
  return iterative_fgsm(model, x, y, cfg);
}

}  // namespace wavattack::attack

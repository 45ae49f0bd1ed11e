#include "wavattack/diag/profile.hpp"

#include <Eigen/Dense>
#include <cstdio>
#include <sstream>

#include "wavattack/grad/graph.hpp"
#include "wavattack/util/io.hpp"
#include "wavattack/util/numeric.hpp"

namespace wavattack::diag {

void check_profile(const GradientProfile& p) {
  for (std::size_t i = 0; i < p.magnitudes.size(); ++i) {
    const double m = p.magnitudes[i];
    if (!std::isfinite(m) || m < 0.0) {
      throw OverflowError("gradient magnitude at sample " + std::to_string(i) + " is not a finite non-negative value");
    }
  }
}

GradientProfile input_gradient_profile(const nn::Model& model, const data::Waveform& x, std::size_t y) {
  if (x.sample_rate != model.config().sample_rate) {
    throw ConfigError("waveform rate " + std::to_string(x.sample_rate) + " Hz does not match the model's " +
                      std::to_string(model.config().sample_rate) + " Hz");
  }
  return input_gradient_profile<nn::Model>(model, x, y, std::string(nn::kind_name(model.kind())));
}

double vanishing_ratio(const GradientProfile& profile, double head_frac, double tail_frac) {
  const std::size_t n = profile.magnitudes.size();
  if (!(head_frac > 0.0 && head_frac <= 1.0) || !(tail_frac > 0.0 && tail_frac <= 1.0)) {
    throw ConfigError("head and tail fractions must lie in (0, 1]");
  }
  const std::size_t head = std::max<std::size_t>(1, static_cast<std::size_t>(head_frac * static_cast<double>(n)));
  const std::size_t tail = std::max<std::size_t>(1, static_cast<std::size_t>(tail_frac * static_cast<double>(n)));
  if (head + tail > n) {
    throw ConfigError("head (" + std::to_string(head) + ") and tail (" + std::to_string(tail) +
                      ") windows overlap in a profile of " + std::to_string(n) + " samples");
  }
  const std::span<const double> m(profile.magnitudes);
  const double head_mean = util::exact_sum(m.first(head)) / static_cast<double>(head);
  const double tail_mean = util::exact_sum(m.last(tail)) / static_cast<double>(tail);
  if (!(tail_mean > 0.0)) throw UndefinedRatio("tail window has zero mean gradient magnitude; ratio is undefined");
  return head_mean / tail_mean;
}

double ContractionDemo::bound(std::size_t step) const {
  const std::size_t n = profile.magnitudes.size();
  return bound_constant * std::pow(spectral_norm, static_cast<double>(n - 1 - step));
}

ContractionDemo contraction_rnn_demo(std::size_t n_steps, double spectral_norm, std::uint64_t seed, std::size_t hidden) {
  if (n_steps < 2) throw ConfigError("contraction demo needs at least 2 steps");
  if (!(spectral_norm >= 0.0) || !std::isfinite(spectral_norm)) throw ConfigError("spectral norm must be >= 0");
  if (hidden == 0) throw ConfigError("hidden size must be positive");

  auto rng = util::Rng::keyed({static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 7u});
  Eigen::MatrixXd w(hidden, hidden);
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.normal() / std::sqrt(static_cast<double>(hidden));
  }
  const double top = Eigen::JacobiSVD<Eigen::MatrixXd>(w).singularValues()(0);
  w *= spectral_norm / top;

  // Orthogonal input map, so |dJ/dx_t| equals |dJ/da_t| for the
  // pre-activation a_t and the profile inherits the contraction step by step.
  Eigen::MatrixXd gauss(hidden, hidden);
  for (Eigen::Index r = 0; r < gauss.rows(); ++r) {
    for (Eigen::Index c = 0; c < gauss.cols(); ++c) gauss(r, c) = rng.normal();
  }
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(gauss).householderQ();

  grad::Tensor u({hidden, hidden}), rec({hidden, hidden}), v({hidden}), x({n_steps, hidden});
  for (double& e : v.values()) e = rng.normal() / std::sqrt(static_cast<double>(hidden));
  for (double& e : x.values()) e = 0.5 * rng.normal();
  for (std::size_t r = 0; r < hidden; ++r) {
    for (std::size_t c = 0; c < hidden; ++c) {
      const auto ri = static_cast<Eigen::Index>(r), ci = static_cast<Eigen::Index>(c);
      u[r * hidden + c] = q(ri, ci);
      rec[r * hidden + c] = w(ri, ci);
    }
  }

  grad::Graph g;
  const auto xs = g.input("x", {n_steps, hidden});
  const auto un = g.parameter("U", {hidden, hidden});
  const auto wn = g.parameter("W", {hidden, hidden});
  const auto vn = g.parameter("v", {hidden});
  grad::NodeId state = g.tanh(g.matvec(un, g.row(xs, 0)));
  for (std::size_t t = 1; t < n_steps; ++t) state = g.tanh(g.add(g.matvec(un, g.row(xs, t)), g.matvec(wn, state)));
  g.set_loss(g.dot(vn, state));
  g.forward({{"x", std::cref(x)}, {"U", std::cref(u)}, {"W", std::cref(rec)}, {"v", std::cref(v)}});
  const grad::Gradients grads = g.backward();

  ContractionDemo demo;
  demo.spectral_norm = spectral_norm;
  const double u_norm = Eigen::JacobiSVD<Eigen::MatrixXd>(q).singularValues()(0);
  double vn2 = 0.0;
  for (double e : v.values()) vn2 += e * e;
  demo.bound_constant = u_norm * std::sqrt(vn2);
  demo.profile.model_kind = "contraction_rnn";
  demo.profile.sample_rate = 0;
  const auto gx = grads.at("x").values();
  for (std::size_t t = 0; t < n_steps; ++t) {
    double sq = 0.0;
    for (std::size_t k = 0; k < hidden; ++k) sq += gx[t * hidden + k] * gx[t * hidden + k];
    demo.profile.magnitudes.push_back(std::sqrt(sq));
  }
  return demo;
}

std::string format_profile(const GradientProfile& p) {
  std::ostringstream os;
  os << "# kind=" << p.model_kind << " sample_rate=" << p.sample_rate << " samples=" << p.magnitudes.size() << '\n';
  os << "# index magnitude\n";
  char buf[64];
  for (std::size_t i = 0; i < p.magnitudes.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu %.17g\n", i, p.magnitudes[i]);
    os << buf;
  }
  return os.str();
}

void save_profile(const GradientProfile& p, const std::filesystem::path& path) {
  util::write_file_atomic(path, format_profile(p));
}

}  // namespace wavattack::diag

#include "wavattack/eval/metrics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <sstream>

#include "wavattack/error.hpp"
#include "wavattack/util/io.hpp"
#include "wavattack/util/numeric.hpp"

namespace wavattack::eval {

namespace {

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

PerturbationMetrics perturbation_metrics(std::span<const double> x, std::span<const double> x_adv) {
  if (x.size() != x_adv.size()) {
    throw ShapeError("perturbation metrics need equal lengths, got " + std::to_string(x.size()) + " and " +
                     std::to_string(x_adv.size()));
  }
  PerturbationMetrics m;
  std::vector<double> noise(x.size()), signal(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double eta = x_adv[i] - x[i];
    m.linf = std::max(m.linf, std::fabs(eta));
    noise[i] = eta * eta;
    signal[i] = (x[i] - data::kSilence) * (x[i] - data::kSilence);
  }
  const double n2 = util::exact_sum(noise);
  const double s2 = util::exact_sum(signal);
  m.l2 = std::sqrt(n2);
  if (n2 == 0.0) {
    m.snr_db = kSnrCapDb;
  } else if (s2 == 0.0) {
    m.snr_db = -kSnrCapDb;
  } else {
    m.snr_db = std::clamp(10.0 * std::log10(s2 / n2), -kSnrCapDb, kSnrCapDb);
  }
  return m;
}

PerturbationMetrics perturbation_metrics(const data::Waveform& x, const data::Waveform& x_adv) {
  return perturbation_metrics(x.view(), x_adv.view());
}

Spectrogram spectrogram(const data::Waveform& w, std::size_t window, std::size_t hop) {
  if (window < 2) throw ConfigError("spectrogram window must be at least 2 samples");
  if (hop == 0) throw ConfigError("spectrogram hop must be at least 1");
  if (window > w.size()) {
    throw ConfigError("spectrogram window of " + std::to_string(window) + " exceeds the waveform length " +
                      std::to_string(w.size()));
  }
  Spectrogram s;
  s.window = window;
  s.hop = hop;
  s.sample_rate = w.sample_rate;
  s.bins = window / 2 + 1;
  s.frames = 1 + (w.size() - window) / hop;
  s.magnitude.assign(s.bins * s.frames, 0.0);

  std::vector<double> hann(window);
  for (std::size_t i = 0; i < window; ++i) {
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(window));
  }

  double* in = fftw_alloc_real(window);
  fftw_complex* out = fftw_alloc_complex(s.bins);
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(window), in, out, FFTW_ESTIMATE);
  }
  for (std::size_t f = 0; f < s.frames; ++f) {
    const double* src = w.samples.data() + f * hop;
    for (std::size_t i = 0; i < window; ++i) in[i] = (src[i] - data::kSilence) * hann[i];
    fftw_execute(plan);
    for (std::size_t b = 0; b < s.bins; ++b) s.magnitude[b * s.frames + f] = std::hypot(out[b][0], out[b][1]);
  }
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return s;
}

Spectrogram spectrogram_diff(const Spectrogram& a, const Spectrogram& b) {
  if (a.bins != b.bins || a.frames != b.frames || a.window != b.window || a.hop != b.hop) {
    throw ShapeError("spectrograms differ in geometry");
  }
  Spectrogram d = a;
  for (std::size_t i = 0; i < d.magnitude.size(); ++i) d.magnitude[i] = a.magnitude[i] - b.magnitude[i];
  return d;
}

std::string format_spectrogram(const Spectrogram& s) {
  std::ostringstream os;
  os << "# bins=" << s.bins << " frames=" << s.frames << " window=" << s.window << " hop=" << s.hop
     << " sample_rate=" << s.sample_rate << '\n';
  os << "# row = frequency bin (bin * sample_rate / window Hz), column = frame\n";
  char buf[32];
  for (std::size_t b = 0; b < s.bins; ++b) {
    for (std::size_t f = 0; f < s.frames; ++f) {
      std::snprintf(buf, sizeof buf, f == 0 ? "%.9g" : " %.9g", s.at(b, f));
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

void save_spectrogram(const Spectrogram& s, const std::filesystem::path& path) {
  util::write_file_atomic(path, format_spectrogram(s));
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("spearman needs equal-length inputs");
  if (x.size() < 2) throw ConfigError("spearman needs at least two points");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) throw ConfigError("spearman is undefined for a constant input");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace wavattack::eval

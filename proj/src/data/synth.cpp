#include "wavattack/data/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "wavattack/data/wav.hpp"
#include "wavattack/error.hpp"
#include "wavattack/util/numeric.hpp"

namespace wavattack::data {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

struct Band {
  double lo;
  double hi;
};

constexpr std::array<Band, 2> kGenderF0 = {{{90.0, 150.0}, {190.0, 260.0}}};
constexpr std::array<Band, 2> kEmotionRate = {{{2.0, 4.0}, {8.0, 12.0}}};
// Aroused speech is brighter: the fast class keeps more high-harmonic energy.
constexpr std::array<double, 2> kEmotionTilt = {2.0, 0.5};
// (F1, F2) per speaker class.
constexpr std::array<std::array<double, 2>, 4> kSpeakerFormants = {{{300.0, 1400.0},
                                                                     {550.0, 1900.0},
                                                                     {800.0, 2400.0},
                                                                     {1100.0, 2900.0}}};
constexpr double kFormantBandwidth = 120.0;

std::size_t task_id(std::string_view task) {
  const auto& names = task_names();
  const auto it = std::find(names.begin(), names.end(), task);
  if (it == names.end()) throw ConfigError("unknown task '" + std::string(task) + "'");
  return static_cast<std::size_t>(it - names.begin());
}

// Harmonic h gets amplitude h^-tilt.
void add_harmonics(std::vector<double>& s, double f0, double fs, std::size_t max_harmonics, double tilt,
                   util::Rng& rng) {
  for (std::size_t h = 1; h <= max_harmonics && static_cast<double>(h) * f0 < 0.45 * fs; ++h) {
    const double phase = rng.uniform(0.0, kTwoPi);
    const double amp = std::pow(static_cast<double>(h), -tilt);
    const double w = kTwoPi * static_cast<double>(h) * f0 / fs;
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += amp * std::sin(w * static_cast<double>(i) + phase);
  }
}

void resonate(std::vector<double>& s, double freq, double bandwidth, double fs) {
  const double r = std::exp(-M_PI * bandwidth / fs);
  const double a1 = 2.0 * r * std::cos(kTwoPi * freq / fs);
  const double a2 = -r * r;
  double y1 = 0.0, y2 = 0.0;
  for (double& v : s) {
    const double y = (1.0 - r) * v + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    v = y;
  }
}

}  // namespace

const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names = {"gender_proxy", "emotion_proxy", "speaker_proxy"};
  return names;
}

std::vector<std::string> task_labels(std::string_view task) {
  switch (task_id(task)) {
    case 0: return {"low", "high"};
    case 1: return {"slow", "fast"};
    default: return {"spk0", "spk1", "spk2", "spk3"};
  }
}

Waveform synth_example(std::string_view task, std::size_t class_index, std::size_t example_index,
                       std::uint64_t seed, const SynthConfig& config) {
  const std::size_t tid = task_id(task);
  const std::size_t classes = task_labels(task).size();
  if (class_index >= classes) throw ConfigError("class index out of range for task '" + std::string(task) + "'");
  const std::size_t n = clip_samples(config.clip_seconds, config.sample_rate);
  const double fs = config.sample_rate;

  auto rng = util::Rng::keyed({static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                               static_cast<std::uint32_t>(tid), static_cast<std::uint32_t>(class_index),
                               static_cast<std::uint32_t>(example_index)});
  std::vector<double> s(n, 0.0);

  if (tid == 0) {
    const Band band = kGenderF0[class_index];
    add_harmonics(s, rng.uniform(band.lo, band.hi), fs, 12, 1.0, rng);
  } else if (tid == 1) {
    add_harmonics(s, rng.uniform(120.0, 240.0), fs, 12, kEmotionTilt[class_index], rng);
    const Band band = kEmotionRate[class_index];
    const double rate = rng.uniform(band.lo, band.hi);
    const double phase = rng.uniform(0.0, kTwoPi);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / fs;
      s[i] *= 0.15 + 0.85 * 0.5 * (1.0 + std::sin(kTwoPi * rate * t + phase));
    }
  } else {
    const double f0 = rng.uniform(100.0, 200.0);
    const double period = fs / f0;
    double next = rng.uniform(0.0, period);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = 0.02 * rng.normal();
      if (static_cast<double>(i) >= next) {
        s[i] += 1.0;
        next += period;
      }
    }
    for (double formant : kSpeakerFormants[class_index]) resonate(s, formant, kFormantBandwidth, fs);
  }

  double peak = 0.0;
  for (double v : s) peak = std::max(peak, std::fabs(v));
  const double amplitude = rng.uniform(0.25, 0.45);
  double energy = 0.0;
  for (double& v : s) {
    v *= amplitude / peak;
    energy += v * v;
  }
  const double rms = std::sqrt(energy / static_cast<double>(n));
  const double sigma = rms / std::pow(10.0, config.snr_db / 20.0);

  Waveform w;
  w.sample_rate = config.sample_rate;
  w.source_id = generator_spec(task, seed, class_index, example_index);
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    w.samples[i] = std::clamp(kSilence + 0.5 * (s[i] + sigma * rng.normal()), 0.0, 1.0);
  }
  quantize_pcm16(w);
  return w;
}

GeneratedDataset synth_dataset(std::string_view task, std::size_t n_per_class, std::uint64_t seed,
                               const SynthConfig& config) {
  if (n_per_class < 1) throw ConfigError("n_per_class must be at least 1");
  GeneratedDataset out;
  out.manifest.task = std::string(task);
  out.manifest.seed = seed;
  out.manifest.sample_rate = config.sample_rate;
  out.manifest.clip_seconds = config.clip_seconds;
  out.manifest.labels = task_labels(task);
  for (std::size_t c = 0; c < out.manifest.labels.size(); ++c) {
    for (std::size_t i = 0; i < n_per_class; ++i) {
      out.waveforms.push_back(synth_example(task, c, i, seed, config));
      out.manifest.entries.push_back({generator_spec(task, seed, c, i), out.manifest.labels[c], Split::Unassigned});
    }
  }
  return out;
}

std::string generator_spec(std::string_view task, std::uint64_t seed, std::size_t class_index,
                           std::size_t example_index) {
  return "gen:" + std::string(task) + ":" + std::to_string(seed) + ":" + std::to_string(class_index) + ":" +
         std::to_string(example_index);
}

bool is_generator_spec(std::string_view source) { return source.starts_with("gen:"); }

Waveform regenerate(std::string_view spec, const SynthConfig& config) {
  if (!is_generator_spec(spec)) throw FormatError("not a generator spec: " + std::string(spec));
  std::vector<std::string> parts;
  std::size_t start = 4;
  while (true) {
    const std::size_t pos = spec.find(':', start);
    parts.emplace_back(spec.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  if (parts.size() != 4) throw FormatError("malformed generator spec: " + std::string(spec));
  try {
    return synth_example(parts[0], std::stoull(parts[2]), std::stoull(parts[3]), std::stoull(parts[1]), config);
  } catch (const std::logic_error&) {
    throw FormatError("malformed generator spec: " + std::string(spec));
  }
}

}  // namespace wavattack::data

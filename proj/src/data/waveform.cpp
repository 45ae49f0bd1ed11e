#include "wavattack/data/waveform.hpp"

#include <cmath>

#include "wavattack/error.hpp"

namespace wavattack::data {

void check_waveform(const Waveform& w) {
  if (w.sample_rate == 0) throw ConfigError("waveform '" + w.source_id + "' has no sample rate");
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    const double v = w.samples[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ConfigError("waveform '" + w.source_id + "' sample " + std::to_string(i) + " = " + std::to_string(v) +
                        " outside [0, 1]");
    }
  }
}

std::size_t clip_samples(double clip_seconds, std::uint32_t sample_rate) {
  if (!(clip_seconds > 0.0)) throw ConfigError("clip length must be positive");
  return static_cast<std::size_t>(std::llround(clip_seconds * sample_rate));
}

Waveform preprocess(const Waveform& w, double clip_seconds, std::uint32_t target_rate) {
  if (w.sample_rate != target_rate) {
    throw ConfigError("sample rate " + std::to_string(w.sample_rate) + " Hz of '" + w.source_id +
                      "' does not match target " + std::to_string(target_rate) + " Hz (resample first)");
  }
  const std::size_t n = clip_samples(clip_seconds, target_rate);
  Waveform out{w.samples, target_rate, w.source_id};
  out.samples.resize(n, kSilence);
  return out;
}

}  // namespace wavattack::data

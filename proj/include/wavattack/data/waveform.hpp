#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace wavattack::data {

// Mono audio scaled into [0, 1]; 0.5 is digital silence.
struct Waveform {
  std::vector<double> samples;
  std::uint32_t sample_rate = 0;
  std::string source_id;

  std::size_t size() const noexcept { return samples.size(); }
  std::span<const double> view() const noexcept { return samples; }
};

inline constexpr double kSilence = 0.5;

// Throws ConfigError unless every sample lies in [0, 1] and the rate is set.
void check_waveform(const Waveform& w);

// Zero-pads (with silence) or truncates to exactly clip_seconds * target_rate
// samples. Truncation keeps the beginning. Resampling is not supported, so
// the input rate must already equal target_rate.
Waveform preprocess(const Waveform& w, double clip_seconds, std::uint32_t target_rate);

std::size_t clip_samples(double clip_seconds, std::uint32_t sample_rate);

}  // namespace wavattack::data

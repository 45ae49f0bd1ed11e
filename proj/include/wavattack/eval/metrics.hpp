#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wavattack/data/waveform.hpp"

namespace wavattack::eval {

inline constexpr double kSnrCapDb = 160.0;

// Norms of eta = x_adv - x, i.e. the perturbation actually applied after
// clipping. SNR is measured against the signal's deviation from silence and
// clamped to +-160 dB so identical or silent inputs stay finite.
struct PerturbationMetrics {
  double linf = 0.0;
  double l2 = 0.0;
  double snr_db = kSnrCapDb;
};

PerturbationMetrics perturbation_metrics(std::span<const double> x, std::span<const double> x_adv);
PerturbationMetrics perturbation_metrics(const data::Waveform& x, const data::Waveform& x_adv);

// Short-time Fourier magnitudes of (w - 0.5) under a periodic Hann window.
// Row r is frequency bin r (r * rate / window Hz); column c is the frame
// starting at sample c * hop.
struct Spectrogram {
  std::size_t bins = 0;
  std::size_t frames = 0;
  std::size_t window = 0;
  std::size_t hop = 0;
  std::uint32_t sample_rate = 0;
  std::vector<double> magnitude;  // bins x frames, row-major

  double at(std::size_t bin, std::size_t frame) const { return magnitude[bin * frames + frame]; }
};

Spectrogram spectrogram(const data::Waveform& w, std::size_t window = 512, std::size_t hop = 128);

// Element-wise a - b over equal geometries.
Spectrogram spectrogram_diff(const Spectrogram& a, const Spectrogram& b);

// '#' header with the geometry, then one text row per frequency bin.
std::string format_spectrogram(const Spectrogram& s);
void save_spectrogram(const Spectrogram& s, const std::filesystem::path& path);

// Rank correlation with average ranks for ties. Needs at least two points
// and non-constant inputs.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace wavattack::eval

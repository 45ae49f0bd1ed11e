#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "wavattack/data/manifest.hpp"
#include "wavattack/data/waveform.hpp"

namespace wavattack::data {

// Synthetic stand-ins for three paralinguistic tasks:
//
//   gender_proxy   low / high        harmonic tone, F0 in [90,150] vs [190,260] Hz
//   emotion_proxy  slow / fast       amplitude envelope at 2-4 Hz vs 8-12 Hz,
//                                    dark (h^-2) vs bright (h^-0.5) harmonics
//   speaker_proxy  spk0 .. spk3      fixed two-formant resonator per class over
//                                    a shared pulse-train excitation
//
// Every example draws its own phase, amplitude and noise (20 dB SNR by
// default) from a stream keyed by (seed, task, class, index), and is snapped
// to the PCM16 grid so writing it to WAV is lossless.
struct SynthConfig {
  std::uint32_t sample_rate = 8000;
  double clip_seconds = 1.2;
  double snr_db = 20.0;
};

const std::vector<std::string>& task_names();
std::vector<std::string> task_labels(std::string_view task);

Waveform synth_example(std::string_view task, std::size_t class_index, std::size_t example_index,
                       std::uint64_t seed, const SynthConfig& config = {});

struct GeneratedDataset {
  DatasetManifest manifest;  // entries carry generator specs, split unassigned
  std::vector<Waveform> waveforms;
};

GeneratedDataset synth_dataset(std::string_view task, std::size_t n_per_class, std::uint64_t seed,
                               const SynthConfig& config = {});

// "gen:<task>:<seed>:<class>:<index>"
std::string generator_spec(std::string_view task, std::uint64_t seed, std::size_t class_index,
                           std::size_t example_index);
bool is_generator_spec(std::string_view source);
Waveform regenerate(std::string_view spec, const SynthConfig& config);

}  // namespace wavattack::data

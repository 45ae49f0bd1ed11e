#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "wavattack/data/waveform.hpp"

namespace wavattack::data {

// RIFF/WAVE, PCM 16-bit, mono. An int16 sample v maps to (v + 32768) / 65535,
// so -32768 -> 0.0 and 32767 -> 1.0; writing rounds back to the nearest int16.

Waveform decode_wav(std::string_view bytes, std::string source_id = {});
std::string encode_wav(const Waveform& w);

Waveform load_wav(const std::filesystem::path& path);
void save_wav(const Waveform& w, const std::filesystem::path& path);

double pcm16_to_unit(std::int16_t v);
std::int16_t unit_to_pcm16(double x);

// Snaps every sample onto the PCM16 grid, so save/load is lossless.
void quantize_pcm16(Waveform& w);

}  // namespace wavattack::data

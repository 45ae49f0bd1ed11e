#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "wavattack/nn/model.hpp"

namespace wavattack::nn {

// Binary layout, all integers little-endian:
//   "WAVATKCK"  u32 version  u32 kind
//   str config (key=value text)  u32 n_labels  str label...
//   u32 n_params  { str name  u32 rank  u64 dim...  f32 value... }...
// where str is a u32 byte length followed by the bytes.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Model& model);
Model decode_checkpoint(std::string_view bytes);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

// The model with every parameter rounded to float32, i.e. what a save/load
// round trip yields.
Model round_to_float32(const Model& model);

}  // namespace wavattack::nn

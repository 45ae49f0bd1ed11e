#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace wavattack::nn {

enum class Activation { Tanh, Relu };

std::string_view activation_name(Activation a);
Activation parse_activation(std::string_view name);

struct ModelConfig {
  std::uint32_t sample_rate = 8000;
  double clip_seconds = 1.2;
  double frame_ms = 40.0;
  std::size_t frontend_blocks = 4;
  std::size_t backend_blocks = 3;
  std::size_t conv_features = 16;
  std::size_t kernel_len = 40;
  std::size_t pool = 2;
  std::size_t rnn_units = 64;
  std::size_t fc_units = 64;
  std::size_t num_classes = 2;
  Activation activation = Activation::Tanh;

  // 16 kHz, 6 s clips, 8 front-end and 6 back-end blocks of 32 features.
  static ModelConfig full(std::size_t num_classes);
  // 8 kHz, 1.2 s clips, 4 + 3 blocks of 16 features.
  static ModelConfig desk(std::size_t num_classes);

  std::size_t input_samples() const;
  std::size_t frame_len() const;
  std::size_t num_frames() const;
  // Per-frame length after the front-end, and sequence length after the
  // back-end convolutions.
  std::size_t frontend_out_len() const;
  std::size_t backend_out_len() const;

  // Throws ConfigError naming the field or the block that breaks.
  void validate() const;

  // "key=value" per line; parse accepts exactly the keys format writes
  // (missing keys keep their defaults, unknown keys are rejected).
  std::string to_text() const;
  static ModelConfig from_text(std::string_view text);
  // Applies one key=value assignment.
  void set(std::string_view key, std::string_view value);

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace wavattack::nn

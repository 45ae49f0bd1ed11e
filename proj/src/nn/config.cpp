#include "wavattack/nn/config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "wavattack/error.hpp"

namespace wavattack::nn {

namespace {

std::size_t parse_count(std::string_view key, std::string_view value) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("config key '" + std::string(key) + "' expects a non-negative integer, got '" +
                      std::string(value) + "'");
  }
  return out;
}

double parse_real(std::string_view key, std::string_view value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(std::string(value), &used);
    if (used == value.size()) return v;
  } catch (const std::logic_error&) {
  }
  throw ConfigError("config key '" + std::string(key) + "' expects a number, got '" + std::string(value) + "'");
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string format_real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string_view activation_name(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  throw ConfigError("unknown activation '" + std::string(name) + "' (expected tanh or relu)");
}

ModelConfig ModelConfig::full(std::size_t num_classes) {
  ModelConfig c;
  c.sample_rate = 16000;
  c.clip_seconds = 6.0;
  c.frontend_blocks = 8;
  c.backend_blocks = 6;
  c.conv_features = 32;
  c.num_classes = num_classes;
  return c;
}

ModelConfig ModelConfig::desk(std::size_t num_classes) {
  ModelConfig c;
  c.num_classes = num_classes;
  return c;
}

std::size_t ModelConfig::input_samples() const {
  return static_cast<std::size_t>(std::llround(clip_seconds * sample_rate));
}

std::size_t ModelConfig::frame_len() const {
  return static_cast<std::size_t>(std::llround(frame_ms * sample_rate / 1000.0));
}

std::size_t ModelConfig::num_frames() const { return frame_len() == 0 ? 0 : input_samples() / frame_len(); }

std::size_t ModelConfig::frontend_out_len() const {
  std::size_t len = frame_len();
  for (std::size_t b = 0; b < frontend_blocks; ++b) len /= pool;
  return len;
}

std::size_t ModelConfig::backend_out_len() const {
  std::size_t len = num_frames() * frontend_out_len();
  for (std::size_t b = 0; b < backend_blocks; ++b) len /= pool;
  return len;
}

void ModelConfig::validate() const {
  if (sample_rate == 0) throw ConfigError("sample_rate must be positive");
  if (!(clip_seconds > 0.0)) throw ConfigError("clip_seconds must be positive");
  if (!(frame_ms > 0.0)) throw ConfigError("frame_ms must be positive");
  const double frame_exact = frame_ms * sample_rate / 1000.0;
  if (frame_len() == 0 || std::fabs(frame_exact - static_cast<double>(frame_len())) > 1e-9) {
    throw ConfigError("frame_ms=" + format_real(frame_ms) + " does not give a whole number of samples at " +
                      std::to_string(sample_rate) + " Hz");
  }
  const double total_exact = clip_seconds * sample_rate;
  if (std::fabs(total_exact - static_cast<double>(input_samples())) > 1e-6 || input_samples() % frame_len() != 0) {
    throw ConfigError("clip of " + format_real(total_exact) + " samples is not a whole number of " +
                      std::to_string(frame_len()) + "-sample frames");
  }
  if (conv_features == 0) throw ConfigError("conv_features must be positive");
  if (kernel_len == 0) throw ConfigError("kernel_len must be positive");
  if (pool == 0) throw ConfigError("pool must be positive");
  if (fc_units == 0) throw ConfigError("fc_units must be positive");
  if (rnn_units == 0) throw ConfigError("rnn_units must be positive");
  if (num_classes < 2) throw ConfigError("num_classes must be at least 2");

  std::size_t len = frame_len();
  for (std::size_t b = 0; b < frontend_blocks; ++b) {
    const std::size_t before = len;
    len /= pool;
    if (len == 0) {
      throw ConfigError("front-end block " + std::to_string(b) + " pools a frame of " + std::to_string(before) +
                        " samples down to length 0");
    }
  }
  len *= num_frames();
  for (std::size_t b = 0; b < backend_blocks; ++b) {
    const std::size_t before = len;
    len /= pool;
    if (len == 0) {
      throw ConfigError("back-end block " + std::to_string(b) + " pools a sequence of " + std::to_string(before) +
                        " steps down to length 0");
    }
  }
}

std::string ModelConfig::to_text() const {
  std::ostringstream os;
  os << "sample_rate=" << sample_rate << '\n'
     << "clip_seconds=" << format_real(clip_seconds) << '\n'
     << "frame_ms=" << format_real(frame_ms) << '\n'
     << "frontend_blocks=" << frontend_blocks << '\n'
     << "backend_blocks=" << backend_blocks << '\n'
     << "conv_features=" << conv_features << '\n'
     << "kernel_len=" << kernel_len << '\n'
     << "pool=" << pool << '\n'
     << "rnn_units=" << rnn_units << '\n'
     << "fc_units=" << fc_units << '\n'
     << "num_classes=" << num_classes << '\n'
     << "activation=" << activation_name(activation) << '\n';
  return os.str();
}

void ModelConfig::set(std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  if (key == "sample_rate") {
    const std::size_t v = parse_count(key, value);
    if (v > UINT32_MAX) throw ConfigError("sample_rate out of range");
    sample_rate = static_cast<std::uint32_t>(v);
  } else if (key == "clip_seconds") {
    clip_seconds = parse_real(key, value);
  } else if (key == "frame_ms") {
    frame_ms = parse_real(key, value);
  } else if (key == "frontend_blocks") {
    frontend_blocks = parse_count(key, value);
  } else if (key == "backend_blocks") {
    backend_blocks = parse_count(key, value);
  } else if (key == "conv_features") {
    conv_features = parse_count(key, value);
  } else if (key == "kernel_len") {
    kernel_len = parse_count(key, value);
  } else if (key == "pool") {
    pool = parse_count(key, value);
  } else if (key == "rnn_units") {
    rnn_units = parse_count(key, value);
  } else if (key == "fc_units") {
    fc_units = parse_count(key, value);
  } else if (key == "num_classes") {
    num_classes = parse_count(key, value);
  } else if (key == "activation") {
    activation = parse_activation(value);
  } else {
    throw ConfigError("unknown model config key '" + std::string(key) + "'");
  }
}

ModelConfig ModelConfig::from_text(std::string_view text) {
  ModelConfig c;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = trim(text.substr(start, end - start));
    start = end + 1;
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected key=value, got '" + std::string(line) + "'");
    c.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return c;
}

}  // namespace wavattack::nn

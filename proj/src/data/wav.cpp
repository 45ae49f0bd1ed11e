#include "wavattack/data/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "wavattack/error.hpp"
#include "wavattack/util/io.hpp"

namespace wavattack::data {

namespace {

std::uint32_t read_u32(std::string_view b, std::size_t at) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[at])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 3])) << 24;
}

std::uint16_t read_u16(std::string_view b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    static_cast<unsigned char>(b[at + 1]) << 8);
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

double pcm16_to_unit(std::int16_t v) { return (static_cast<double>(v) + 32768.0) / 65535.0; }

std::int16_t unit_to_pcm16(double x) {
  const double v = std::round(x * 65535.0 - 32768.0);
  return static_cast<std::int16_t>(std::clamp(v, -32768.0, 32767.0));
}

void quantize_pcm16(Waveform& w) {
  for (double& s : w.samples) s = pcm16_to_unit(unit_to_pcm16(s));
}

Waveform decode_wav(std::string_view bytes, std::string source_id) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != "RIFF" || bytes.substr(8, 4) != "WAVE") {
    throw FormatError("'" + source_id + "' is not a RIFF/WAVE file");
  }
  std::size_t pos = 12;
  bool have_fmt = false;
  std::uint32_t rate = 0;
  while (pos + 8 <= bytes.size()) {
    const std::string_view id = bytes.substr(pos, 4);
    const std::uint32_t size = read_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size() && id != "data") {
      throw FormatError("'" + source_id + "': truncated chunk '" + std::string(id) + "'");
    }
    if (id == "fmt ") {
      if (size < 16) throw FormatError("'" + source_id + "': fmt chunk too short");
      const std::uint16_t format = read_u16(bytes, body);
      const std::uint16_t channels = read_u16(bytes, body + 2);
      rate = read_u32(bytes, body + 4);
      const std::uint16_t bits = read_u16(bytes, body + 14);
      if (format != 1) {
        throw FormatError("unsupported WAV '" + source_id + "': audio_format=" + std::to_string(format) +
                          " (only PCM=1)");
      }
      if (channels != 1) {
        throw FormatError("unsupported WAV '" + source_id + "': num_channels=" + std::to_string(channels) +
                          " (only mono)");
      }
      if (bits != 16) {
        throw FormatError("unsupported WAV '" + source_id + "': bits_per_sample=" + std::to_string(bits) +
                          " (only 16)");
      }
      if (rate == 0) throw FormatError("unsupported WAV '" + source_id + "': sample_rate=0");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError("'" + source_id + "': data chunk before fmt chunk");
      const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
      Waveform w;
      w.sample_rate = rate;
      w.source_id = std::move(source_id);
      w.samples.resize(avail / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        w.samples[i] = pcm16_to_unit(static_cast<std::int16_t>(read_u16(bytes, body + 2 * i)));
      }
      return w;
    }
    pos = body + size + (size & 1u);
  }
  throw FormatError("'" + source_id + "' has no data chunk");
}

std::string encode_wav(const Waveform& w) {
  check_waveform(w);
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVE";
  out += "fmt ";
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, w.sample_rate);
  put_u32(out, w.sample_rate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (double s : w.samples) put_u16(out, static_cast<std::uint16_t>(unit_to_pcm16(s)));
  return out;
}

Waveform load_wav(const std::filesystem::path& path) { return decode_wav(util::read_file(path), path.string()); }

void save_wav(const Waveform& w, const std::filesystem::path& path) { util::write_file_atomic(path, encode_wav(w)); }

}  // namespace wavattack::data

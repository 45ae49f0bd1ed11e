#include "wavattack/nn/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "wavattack/error.hpp"
#include "wavattack/util/io.hpp"

namespace wavattack::nn {

namespace {

constexpr std::string_view kMagic = "WAVATKCK";

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void raw(std::string_view s) { out_.append(s); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view raw(std::size_t n, const char* what) {
    need(n, what);
    const auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) throw FormatError(std::string("checkpoint truncated while reading ") + what);
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Model& model) {
  Writer w;
  w.raw(kMagic);
  w.u32(kCheckpointVersion);
  w.u32(model.kind() == ModelKind::WaveCNN ? 0 : 1);
  w.str(model.config().to_text());
  w.u32(static_cast<std::uint32_t>(model.labels().size()));
  for (const auto& l : model.labels()) w.str(l);
  w.u32(static_cast<std::uint32_t>(model.params().size()));
  for (const auto& [name, t] : model.params()) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.shape().size()));
    for (std::size_t d : t.shape()) w.u64(d);
    for (double v : t.values()) w.u32(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return w.take();
}

Model decode_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.raw(kMagic.size(), "magic") != kMagic) throw FormatError("not a wavattack checkpoint (bad magic)");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + " (this build reads " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint32_t kind_code = r.u32("kind");
  if (kind_code > 1) throw FormatError("checkpoint has unknown model kind " + std::to_string(kind_code));
  const ModelKind kind = kind_code == 0 ? ModelKind::WaveCNN : ModelKind::WaveRNN;
  const ModelConfig config = ModelConfig::from_text(r.str("config"));
  std::vector<std::string> labels(r.u32("label count"));
  for (auto& l : labels) l = r.str("label");
  ParamMap params;
  const std::uint32_t n_params = r.u32("parameter count");
  for (std::uint32_t p = 0; p < n_params; ++p) {
    std::string name = r.str("parameter name");
    grad::Shape shape(r.u32("rank"));
    for (auto& d : shape) d = r.u64("dimension");
    const std::size_t n = grad::element_count(shape);
    const std::string_view data = r.raw(n * 4, "parameter values");
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[4 * i + b])) << (8 * b);
      values[i] = std::bit_cast<float>(bits);
    }
    if (!params.emplace(name, grad::Tensor(std::move(shape), std::move(values))).second) {
      throw FormatError("checkpoint repeats parameter '" + name + "'");
    }
  }
  if (!r.done()) throw FormatError("checkpoint has trailing bytes");
  try {
    return Model(kind, config, std::move(labels), std::move(params));
  } catch (const ShapeError& e) {
    throw FormatError(std::string("checkpoint does not match its config: ") + e.what());
  }
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  util::write_file_atomic(path, encode_checkpoint(model));
}

Model load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(util::read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Model round_to_float32(const Model& model) {
  ParamMap params = model.params();
  for (auto& [name, t] : params) {
    for (double& v : t.values()) v = static_cast<float>(v);
  }
  return Model(model.kind(), model.config(), model.labels(), std::move(params));
}

}  // namespace wavattack::nn

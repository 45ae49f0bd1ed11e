#include "wavattack/nn/model.hpp"

#include <algorithm>
#include <cmath>

#include "wavattack/error.hpp"
#include "wavattack/util/numeric.hpp"

namespace wavattack::nn {

namespace {

std::string front_name(std::size_t b, std::string_view what) { return "front." + std::to_string(b) + "." + std::string(what); }
std::string back_name(std::size_t b, std::string_view what) { return "back." + std::to_string(b) + "." + std::string(what); }

void glorot(grad::Tensor& t, std::size_t fan_in, std::size_t fan_out, util::Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.values()) v = rng.uniform(-a, a);
}

std::vector<std::string> default_labels(std::size_t k) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(std::to_string(i));
  return out;
}

grad::NodeId activate(grad::Graph& g, grad::NodeId x, Activation a) {
  return a == Activation::Tanh ? g.tanh(x) : g.relu(x);
}

}  // namespace

std::string_view kind_name(ModelKind kind) { return kind == ModelKind::WaveCNN ? "wavecnn" : "wavernn"; }

ModelKind parse_kind(std::string_view name) {
  if (name == "wavecnn" || name == "WaveCNN" || name == "cnn") return ModelKind::WaveCNN;
  if (name == "wavernn" || name == "WaveRNN" || name == "rnn") return ModelKind::WaveRNN;
  throw ConfigError("unknown model kind '" + std::string(name) + "' (expected wavecnn or wavernn)");
}

grad::Tensor frame(std::span<const double> samples, std::size_t frame_len) {
  if (frame_len == 0) throw ConfigError("frame length must be positive");
  if (samples.empty() || samples.size() % frame_len != 0) {
    throw ShapeError("waveform of " + std::to_string(samples.size()) + " samples is not a whole number of " +
                     std::to_string(frame_len) + "-sample frames; preprocess it to the clip length first");
  }
  return grad::Tensor({samples.size() / frame_len, frame_len}, std::vector<double>(samples.begin(), samples.end()));
}

ParamShapes Model::parameter_shapes(const ModelConfig& c, ModelKind kind) {
  c.validate();
  ParamShapes out;
  const std::size_t C = c.conv_features;
  for (std::size_t b = 0; b < c.frontend_blocks; ++b) {
    out.emplace_back(front_name(b, "weight"), grad::Shape{C, b == 0 ? 1 : C, c.kernel_len});
    out.emplace_back(front_name(b, "bias"), grad::Shape{C});
  }
  const std::size_t front_channels = c.frontend_blocks == 0 ? 1 : C;
  if (kind == ModelKind::WaveCNN) {
    std::size_t channels = front_channels;
    for (std::size_t b = 0; b < c.backend_blocks; ++b) {
      out.emplace_back(back_name(b, "weight"), grad::Shape{C, channels, c.kernel_len});
      out.emplace_back(back_name(b, "bias"), grad::Shape{C});
      channels = C;
    }
    out.emplace_back("fc.weight", grad::Shape{c.fc_units, channels * c.backend_out_len()});
    out.emplace_back("fc.bias", grad::Shape{c.fc_units});
    out.emplace_back("out.weight", grad::Shape{c.num_classes, c.fc_units});
  } else {
    const std::size_t H = c.rnn_units;
    const std::size_t D = front_channels * c.frontend_out_len();
    out.emplace_back("lstm.w_ih", grad::Shape{4 * H, D});
    out.emplace_back("lstm.w_hh", grad::Shape{4 * H, H});
    out.emplace_back("lstm.bias", grad::Shape{4 * H});
    out.emplace_back("out.weight", grad::Shape{c.num_classes, H});
  }
  out.emplace_back("out.bias", grad::Shape{c.num_classes});
  return out;
}

std::size_t Model::parameter_count(const ModelConfig& config, ModelKind kind) {
  std::size_t n = 0;
  for (const auto& [name, shape] : parameter_shapes(config, kind)) n += grad::element_count(shape);
  return n;
}

Model::Model(ModelKind kind, ModelConfig config, std::vector<std::string> labels, ParamMap params)
    : kind_(kind), config_(config), labels_(std::move(labels)), params_(std::move(params)) {
  const ParamShapes shapes = parameter_shapes(config_, kind_);
  if (labels_.size() != config_.num_classes) {
    throw ConfigError("model has " + std::to_string(config_.num_classes) + " classes but " +
                      std::to_string(labels_.size()) + " labels");
  }
  if (params_.size() != shapes.size()) {
    throw ShapeError("expected " + std::to_string(shapes.size()) + " parameter tensors, got " +
                     std::to_string(params_.size()));
  }
  for (const auto& [name, shape] : shapes) {
    const auto it = params_.find(name);
    if (it == params_.end()) throw ShapeError("missing parameter '" + name + "'");
    if (it->second.shape() != shape) {
      throw ShapeError("parameter '" + name + "' has shape " + grad::to_string(it->second.shape()) + ", expected " +
                       grad::to_string(shape));
    }
  }
}

std::size_t Model::label_index(std::string_view label) const {
  const auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) throw ConfigError("label '" + std::string(label) + "' is not a class of this model");
  return static_cast<std::size_t>(it - labels_.begin());
}

ModelGraph Model::build_graph() const {
  const ModelConfig& c = config_;
  ModelGraph mg;
  grad::Graph& g = mg.graph;
  const std::size_t F = c.num_frames();
  const std::size_t L = c.frame_len();
  mg.waveform = g.input("waveform", {F, 1, L});
  mg.target = g.input("target", {c.num_classes});

  // Centre on digital silence so the convolutions' zero padding means silence.
  grad::NodeId h = g.add(mg.waveform, g.constant(grad::Tensor({F, 1, L}, std::vector<double>(F * L, -data::kSilence))));
  for (std::size_t b = 0; b < c.frontend_blocks; ++b) {
    const auto w = g.parameter(front_name(b, "weight"), params_.at(front_name(b, "weight")).shape());
    const auto bias = g.parameter(front_name(b, "bias"), params_.at(front_name(b, "bias")).shape());
    h = g.max_pool1d(activate(g, g.conv1d(h, w, bias), c.activation), c.pool);
  }

  grad::NodeId logits_in = 0;
  if (kind_ == ModelKind::WaveCNN) {
    grad::NodeId s = g.frames_to_sequence(h);
    for (std::size_t b = 0; b < c.backend_blocks; ++b) {
      const auto w = g.parameter(back_name(b, "weight"), params_.at(back_name(b, "weight")).shape());
      const auto bias = g.parameter(back_name(b, "bias"), params_.at(back_name(b, "bias")).shape());
      s = g.max_pool1d(activate(g, g.conv1d(s, w, bias), c.activation), c.pool);
    }
    const grad::Shape& ss = g.shape(s);
    const auto flat = g.reshape(s, {ss[1] * ss[2]});
    const auto fw = g.parameter("fc.weight", params_.at("fc.weight").shape());
    const auto fb = g.parameter("fc.bias", params_.at("fc.bias").shape());
    logits_in = activate(g, g.linear(flat, fw, fb), c.activation);
  } else {
    const grad::Shape& hs = g.shape(h);
    const auto seq = g.reshape(h, {hs[0], hs[1] * hs[2]});
    const auto w_ih = g.parameter("lstm.w_ih", params_.at("lstm.w_ih").shape());
    const auto w_hh = g.parameter("lstm.w_hh", params_.at("lstm.w_hh").shape());
    const auto lb = g.parameter("lstm.bias", params_.at("lstm.bias").shape());
    logits_in = g.lstm(seq, w_ih, w_hh, lb);
  }
  const auto ow = g.parameter("out.weight", params_.at("out.weight").shape());
  const auto ob = g.parameter("out.bias", params_.at("out.bias").shape());
  mg.logits = g.linear(logits_in, ow, ob);
  mg.loss = g.softmax_cross_entropy(mg.logits, mg.target);
  g.set_loss(mg.loss);
  return mg;
}

grad::Tensor Model::input_tensor(std::span<const double> samples) const {
  if (samples.size() != config_.input_samples()) {
    throw ShapeError("model expects " + std::to_string(config_.input_samples()) + " samples, got " +
                     std::to_string(samples.size()));
  }
  grad::Tensor t = frame(samples, config_.frame_len());
  t.reshape({config_.num_frames(), 1, config_.frame_len()});
  return t;
}

grad::Tensor Model::one_hot(std::size_t label) const {
  if (label >= config_.num_classes) {
    throw ConfigError("label index " + std::to_string(label) + " out of range for " +
                      std::to_string(config_.num_classes) + " classes");
  }
  grad::Tensor t({config_.num_classes});
  t[label] = 1.0;
  return t;
}

grad::Bindings Model::bindings(const grad::Tensor& input, const grad::Tensor& target) const {
  grad::Bindings b;
  for (const auto& [name, t] : params_) b.emplace(name, std::cref(t));
  b.emplace("waveform", std::cref(input));
  b.emplace("target", std::cref(target));
  return b;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) z += (p[i] = std::exp(logits[i] - m));
  for (double& v : p) v /= z;
  return p;
}

std::vector<double> Model::predict(std::span<const double> samples) const {
  const grad::Tensor input = input_tensor(samples);
  const grad::Tensor target({config_.num_classes});
  ModelGraph mg = build_graph();
  mg.graph.forward(bindings(input, target));
  return softmax(mg.graph.value(mg.logits).values());
}

void Model::check_rate(const data::Waveform& x) const {
  if (x.sample_rate != config_.sample_rate) {
    throw ConfigError("waveform '" + x.source_id + "' is sampled at " + std::to_string(x.sample_rate) +
                      " Hz but the model expects " + std::to_string(config_.sample_rate) + " Hz");
  }
}

std::vector<double> Model::predict(const data::Waveform& x) const {
  check_rate(x);
  return predict(x.view());
}

std::size_t Model::predict_label(std::span<const double> samples) const {
  const auto p = predict(samples);
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

LossAndGrad Model::loss_and_input_grad(std::span<const double> samples, std::size_t label) const {
  const grad::Tensor input = input_tensor(samples);
  const grad::Tensor target = one_hot(label);
  ModelGraph mg = build_graph();
  LossAndGrad out;
  out.loss = mg.graph.forward(bindings(input, target))[0];
  const grad::Gradients grads = mg.graph.backward();
  const auto g = grads.at("waveform").values();
  out.input_grad.assign(g.begin(), g.end());
  out.probs = softmax(mg.graph.value(mg.logits).values());
  return out;
}

double Model::loss(std::span<const double> samples, std::size_t label) const { return score(samples, label).loss; }

Score Model::score(std::span<const double> samples, std::size_t label) const {
  const grad::Tensor input = input_tensor(samples);
  const grad::Tensor target = one_hot(label);
  ModelGraph mg = build_graph();
  Score out;
  out.loss = mg.graph.forward(bindings(input, target))[0];
  out.probs = softmax(mg.graph.value(mg.logits).values());
  return out;
}

Model build_model(ModelKind kind, const ModelConfig& c, std::uint64_t seed, std::vector<std::string> labels) {
  const ParamShapes shapes = Model::parameter_shapes(c, kind);
  if (labels.empty()) labels = default_labels(c.num_classes);

  const auto lo = static_cast<std::uint32_t>(seed);
  const auto hi = static_cast<std::uint32_t>(seed >> 32);
  auto front_rng = util::Rng::keyed({lo, hi, 1u});
  auto back_rng = util::Rng::keyed({lo, hi, kind == ModelKind::WaveCNN ? 2u : 3u});

  ParamMap params;
  for (const auto& [name, shape] : shapes) {
    grad::Tensor t(shape);
    const bool front = name.starts_with("front.");
    util::Rng& rng = front ? front_rng : back_rng;
    if (name.ends_with(".weight") && shape.size() == 3) {
      glorot(t, shape[1] * shape[2], shape[0] * shape[2], rng);
    } else if (name.ends_with(".weight") || name == "lstm.w_ih" || name == "lstm.w_hh") {
      glorot(t, shape[1], shape[0], rng);
    } else if (name == "lstm.bias") {
      const std::size_t H = c.rnn_units;
      for (std::size_t i = H; i < 2 * H; ++i) t[i] = 1.0;
    }
    params.emplace(name, std::move(t));
  }
  return Model(kind, c, std::move(labels), std::move(params));
}

Model build_wavecnn(const ModelConfig& config, std::uint64_t seed, std::vector<std::string> labels) {
  return build_model(ModelKind::WaveCNN, config, seed, std::move(labels));
}

Model build_wavernn(const ModelConfig& config, std::uint64_t seed, std::vector<std::string> labels) {
  return build_model(ModelKind::WaveRNN, config, seed, std::move(labels));
}

Model permute_classes(const Model& model, std::span<const std::size_t> order) {
  const std::size_t k = model.config().num_classes;
  std::vector<bool> seen(k, false);
  if (order.size() != k) throw ConfigError("class order must list every class exactly once");
  for (std::size_t i : order) {
    if (i >= k || seen[i]) throw ConfigError("class order must list every class exactly once");
    seen[i] = true;
  }
  ParamMap params = model.params();
  const grad::Tensor& w = model.params().at("out.weight");
  const grad::Tensor& b = model.params().at("out.bias");
  const std::size_t cols = w.shape()[1];
  grad::Tensor& nw = params.at("out.weight");
  grad::Tensor& nb = params.at("out.bias");
  std::vector<std::string> labels(k);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t c = 0; c < cols; ++c) nw[j * cols + c] = w[order[j] * cols + c];
    nb[j] = b[order[j]];
    labels[j] = model.labels()[order[j]];
  }
  return Model(model.kind(), model.config(), std::move(labels), std::move(params));
}

}  // namespace wavattack::nn

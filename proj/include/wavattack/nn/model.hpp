#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wavattack/data/waveform.hpp"
#include "wavattack/grad/graph.hpp"
#include "wavattack/nn/config.hpp"

namespace wavattack::nn {

enum class ModelKind { WaveCNN, WaveRNN };

std::string_view kind_name(ModelKind kind);
ModelKind parse_kind(std::string_view name);

using ParamMap = std::map<std::string, grad::Tensor>;
using ParamShapes = std::vector<std::pair<std::string, grad::Shape>>;

// Splits a waveform into consecutive non-overlapping frames: [n_frames, frame_len].
grad::Tensor frame(std::span<const double> samples, std::size_t frame_len);

// A freshly built computation graph for one example. The waveform input is
// named "waveform" ([frames, 1, frame_len]) and the one-hot label "target".
struct ModelGraph {
  grad::Graph graph;
  grad::NodeId waveform = 0;
  grad::NodeId target = 0;
  grad::NodeId logits = 0;
  grad::NodeId loss = 0;
};

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> input_grad;
  std::vector<double> probs;
};

struct Score {
  double loss = 0.0;
  std::vector<double> probs;
};

// Parameters plus architecture. Inference methods are const and build their
// own graph per call, so one Model can serve many threads at once.
class Model {
 public:
  Model(ModelKind kind, ModelConfig config, std::vector<std::string> labels, ParamMap params);

  static ParamShapes parameter_shapes(const ModelConfig& config, ModelKind kind);
  static std::size_t parameter_count(const ModelConfig& config, ModelKind kind);

  ModelKind kind() const noexcept { return kind_; }
  const ModelConfig& config() const noexcept { return config_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const ParamMap& params() const noexcept { return params_; }
  // For optimizers; shapes must be left alone.
  ParamMap& mutable_params() noexcept { return params_; }
  std::size_t parameter_count() const { return parameter_count(config_, kind_); }
  std::size_t label_index(std::string_view label) const;

  ModelGraph build_graph() const;
  // The framed input tensor; throws ShapeError on a wrong length.
  grad::Tensor input_tensor(std::span<const double> samples) const;
  grad::Tensor one_hot(std::size_t label) const;
  // Binds every parameter plus the given input and target. The tensors must
  // outlive the forward pass.
  grad::Bindings bindings(const grad::Tensor& input, const grad::Tensor& target) const;

  std::vector<double> predict(std::span<const double> samples) const;
  std::vector<double> predict(const data::Waveform& x) const;
  std::size_t predict_label(std::span<const double> samples) const;

  // Cross-entropy against `label` and its gradient with respect to the input
  // samples. Parameters are not modified.
  LossAndGrad loss_and_input_grad(std::span<const double> samples, std::size_t label) const;
  double loss(std::span<const double> samples, std::size_t label) const;
  // Loss and class probabilities from a single forward pass.
  Score score(std::span<const double> samples, std::size_t label) const;

 private:
  void check_rate(const data::Waveform& x) const;

  ModelKind kind_;
  ModelConfig config_;
  std::vector<std::string> labels_;
  ParamMap params_;
};

// Front-end parameters come from a stream keyed only by the seed, so a
// WaveCNN and a WaveRNN built with the same seed share them exactly. Empty
// labels default to "0" .. "k-1".
Model build_wavecnn(const ModelConfig& config, std::uint64_t seed, std::vector<std::string> labels = {});
Model build_wavernn(const ModelConfig& config, std::uint64_t seed, std::vector<std::string> labels = {});
Model build_model(ModelKind kind, const ModelConfig& config, std::uint64_t seed, std::vector<std::string> labels = {});

// New class j is old class order[j]: output j of the result equals output
// order[j] of the input model.
Model permute_classes(const Model& model, std::span<const std::size_t> order);

std::vector<double> softmax(std::span<const double> logits);

}  // namespace wavattack::nn

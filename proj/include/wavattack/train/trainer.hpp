#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "wavattack/data/dataset.hpp"
#include "wavattack/error.hpp"
#include "wavattack/grad/graph.hpp"
#include "wavattack/nn/model.hpp"

namespace wavattack::train {

struct TrainConfig {
  double lr = 1e-3;  // initial learning rate used by train()
  double lr_min = 1e-5;  // lr_search range
  double lr_max = 1e-2;
  std::size_t max_epochs = 200;
  std::size_t batch_size = 100;
  double lr_decay = 0.1;
  std::size_t patience = 10;  // epochs without validation improvement before decaying
  double stop_lr = 1e-7;      // stop once the learning rate falls below this
  std::size_t search_budget = 5;
  std::size_t probe_epochs = 2;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  // Receives one line per epoch.
  std::function<void(const std::string&)> log;

  void validate() const;
};

// Index 0 describes the model before any update.
struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> val_accuracy;
  std::vector<double> lr;
  double chosen_lr = 0.0;
  std::size_t best_epoch = 0;
  std::size_t stopping_epoch = 0;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, TrainHistory history) : Error(what), history_(std::move(history)) {}
  const TrainHistory& history() const noexcept { return history_; }

 private:
  TrainHistory history_;
};

class Adam {
 public:
  explicit Adam(const nn::ParamMap& params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(nn::ParamMap& params, const grad::Gradients& grads, double lr);
  std::size_t steps() const noexcept { return t_; }

 private:
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

struct TrainResult {
  nn::Model model;  // snapshot with the lowest validation loss
  TrainHistory history;
};

// Minibatch Adam on cross-entropy. Only the train and validation splits are
// visible here. Deterministic for a given seed, whatever cfg.jobs is.
TrainResult train(const nn::Model& initial, const data::TrainingData& data, const TrainConfig& cfg);

struct LrProbe {
  double lr = 0.0;
  double val_loss = 0.0;  // best validation loss of the probe, +inf if it diverged
};

struct LrSearchResult {
  double lr = 0.0;
  std::vector<LrProbe> probes;
};

// Bisection on log(lr) over [cfg.lr_min, cfg.lr_max] with short probe runs
// of cfg.probe_epochs. The first three probes are the two ends and the
// log-midpoint; each later probe halves the bracket toward the end with the
// lower loss. Returns the probe with the lowest validation loss. A budget
// below 3 returns the log-midpoint without training.
LrSearchResult lr_search(const std::function<nn::Model()>& build, const data::TrainingData& data,
                         const TrainConfig& cfg);

struct EvalStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

EvalStats evaluate(const nn::Model& model, const data::LabeledSet& set, std::size_t jobs = 1);
double evaluate_accuracy(const nn::Model& model, const data::LabeledSet& set, std::size_t jobs = 1);
double evaluate_accuracy(const nn::Model& model, const data::Dataset& dataset, data::Split split,
                         std::size_t jobs = 1);

std::string format_epoch_line(const TrainHistory& h, std::size_t epoch);

}  // namespace wavattack::train

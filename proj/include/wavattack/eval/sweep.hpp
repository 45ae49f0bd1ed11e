#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wavattack/attack/fgsm.hpp"
#include "wavattack/data/dataset.hpp"
#include "wavattack/nn/model.hpp"

namespace wavattack::eval {

// 0 plus the operating points 0.02, 0.032 and 0.08, filled in between.
std::vector<double> default_epsilons();

struct NamedModel {
  std::string id;
  const nn::Model* model = nullptr;
};

struct ModelErrors {
  std::string id;
  bool white_box = false;  // the target is the surrogate itself
  double clean_error = 0.0;
  std::vector<double> error;  // per epsilon
};

struct EpsilonStats {
  double epsilon = 0.0;
  double mean_linf = 0.0;
  double max_linf = 0.0;
  double mean_l2 = 0.0;
  double mean_snr_db = 0.0;
};

struct EvalReport {
  std::string task;
  std::vector<std::string> labels;
  std::vector<double> epsilons;
  std::size_t steps = 1;
  std::uint64_t seed = 0;
  std::string surrogate;
  double random_guess_error = 0.0;  // 1 - 1/k
  std::vector<ModelErrors> models;
  std::vector<EpsilonStats> perturbation;
  std::vector<std::size_t> true_labels;
  // clean_predictions[model][example]
  std::vector<std::vector<std::size_t>> clean_predictions;
  // predictions[model][epsilon][example]
  std::vector<std::vector<std::vector<std::size_t>>> predictions;
};

struct SweepConfig {
  std::vector<double> epsilons = default_epsilons();
  std::size_t steps = 2;
  std::size_t jobs = 1;
  std::string task;
  std::uint64_t seed = 0;
};

// Crafts adversarial examples against the surrogate at every epsilon and
// scores every target (the surrogate included, when listed) on the same
// adversarial set.
EvalReport epsilon_sweep(const NamedModel& surrogate, const std::vector<NamedModel>& targets,
                         const data::LabeledSet& test, const SweepConfig& cfg);

// Error rates rebuilt from the stored per-example predictions.
std::vector<double> recompute_errors(const EvalReport& report, std::size_t model_index);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
void save_report(const EvalReport& report, const std::filesystem::path& path);

}  // namespace wavattack::eval

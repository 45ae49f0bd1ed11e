#include "wavattack/eval/sweep.hpp"

#include <algorithm>
#include <json.hpp>

#include "wavattack/error.hpp"
#include "wavattack/eval/metrics.hpp"
#include "wavattack/util/io.hpp"
#include "wavattack/util/numeric.hpp"

namespace wavattack::eval {

namespace {

std::size_t argmax(const std::vector<double>& p) {
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

double error_rate(const std::vector<std::size_t>& predicted, const std::vector<std::size_t>& truth) {
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) wrong += predicted[i] != truth[i];
  return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

}  // namespace

std::vector<double> default_epsilons() { return {0.0, 0.002, 0.005, 0.01, 0.02, 0.032, 0.05, 0.08}; }

EvalReport epsilon_sweep(const NamedModel& surrogate, const std::vector<NamedModel>& targets,
                         const data::LabeledSet& test, const SweepConfig& cfg) {
  if (surrogate.model == nullptr) throw ConfigError("sweep needs a surrogate model");
  if (test.empty()) throw ConfigError("sweep needs a non-empty test set");
  if (cfg.epsilons.empty()) throw ConfigError("sweep needs at least one epsilon");
  const nn::Model& sur = *surrogate.model;
  for (const auto& t : targets) {
    if (t.model == nullptr) throw ConfigError("target '" + t.id + "' has no model");
    if (t.model->labels() != sur.labels()) {
      throw ConfigError("target '" + t.id + "' has a different label space from surrogate '" + surrogate.id + "'");
    }
  }
  for (std::size_t y : test.labels) {
    if (y >= sur.labels().size()) throw ConfigError("test label index outside the models' label space");
  }

  const std::size_t n = test.size();
  const std::size_t n_eps = cfg.epsilons.size();
  const std::size_t n_models = targets.size();

  EvalReport r;
  r.task = cfg.task;
  r.labels = sur.labels();
  r.epsilons = cfg.epsilons;
  r.steps = cfg.steps;
  r.seed = cfg.seed;
  r.surrogate = surrogate.id;
  r.random_guess_error = 1.0 - 1.0 / static_cast<double>(r.labels.size());
  r.true_labels = test.labels;
  r.clean_predictions.assign(n_models, std::vector<std::size_t>(n));
  r.predictions.assign(n_models, std::vector<std::vector<std::size_t>>(n_eps, std::vector<std::size_t>(n)));

  util::parallel_for(n_models * n, cfg.jobs, [&](std::size_t job) {
    const std::size_t m = job / n, i = job % n;
    r.clean_predictions[m][i] = targets[m].model->predict_label(test.waveforms[i].view());
  });

  std::vector<PerturbationMetrics> metrics(n_eps * n);
  util::parallel_for(n_eps * n, cfg.jobs, [&](std::size_t job) {
    const std::size_t e = job / n, i = job % n;
    attack::AttackConfig ac;
    ac.epsilon = cfg.epsilons[e];
    ac.steps = cfg.steps;
    const auto adv = attack::iterative_fgsm(sur, test.waveforms[i], test.labels[i], ac);
    metrics[job] = perturbation_metrics(test.waveforms[i], adv.adversarial);
    for (std::size_t m = 0; m < n_models; ++m) {
      r.predictions[m][e][i] = targets[m].model == &sur ? argmax(adv.pred_after)
                                                        : targets[m].model->predict_label(adv.adversarial.view());
    }
  });

  for (std::size_t m = 0; m < n_models; ++m) {
    ModelErrors me;
    me.id = targets[m].id;
    me.white_box = targets[m].model == &sur;
    me.clean_error = error_rate(r.clean_predictions[m], r.true_labels);
    for (std::size_t e = 0; e < n_eps; ++e) me.error.push_back(error_rate(r.predictions[m][e], r.true_labels));
    r.models.push_back(std::move(me));
  }
  for (std::size_t e = 0; e < n_eps; ++e) {
    EpsilonStats s;
    s.epsilon = cfg.epsilons[e];
    std::vector<double> linf(n), l2(n), snr(n);
    for (std::size_t i = 0; i < n; ++i) {
      linf[i] = metrics[e * n + i].linf;
      l2[i] = metrics[e * n + i].l2;
      snr[i] = metrics[e * n + i].snr_db;
    }
    s.mean_linf = util::exact_sum(linf) / static_cast<double>(n);
    s.max_linf = *std::max_element(linf.begin(), linf.end());
    s.mean_l2 = util::exact_sum(l2) / static_cast<double>(n);
    s.mean_snr_db = util::exact_sum(snr) / static_cast<double>(n);
    r.perturbation.push_back(s);
  }
  return r;
}

std::vector<double> recompute_errors(const EvalReport& report, std::size_t model_index) {
  std::vector<double> out;
  for (const auto& preds : report.predictions.at(model_index)) out.push_back(error_rate(preds, report.true_labels));
  return out;
}

std::string report_to_json(const EvalReport& r) {
  using nlohmann::json;
  json j;
  j["schema"] = "wavattack-eval-report/1";
  j["task"] = r.task;
  j["labels"] = r.labels;
  j["epsilons"] = r.epsilons;
  j["steps"] = r.steps;
  j["seed"] = r.seed;
  j["surrogate"] = r.surrogate;
  j["random_guess_error"] = r.random_guess_error;
  j["true_labels"] = r.true_labels;
  json models = json::array();
  for (std::size_t m = 0; m < r.models.size(); ++m) {
    const auto& me = r.models[m];
    models.push_back({{"id", me.id},
                      {"white_box", me.white_box},
                      {"clean_error", me.clean_error},
                      {"error", me.error},
                      {"clean_predictions", r.clean_predictions[m]},
                      {"predictions", r.predictions[m]}});
  }
  j["models"] = models;
  json pert = json::array();
  for (const auto& s : r.perturbation) {
    pert.push_back({{"epsilon", s.epsilon},
                    {"mean_linf", s.mean_linf},
                    {"max_linf", s.max_linf},
                    {"mean_l2", s.mean_l2},
                    {"mean_snr_db", s.mean_snr_db}});
  }
  j["perturbation"] = pert;
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  using nlohmann::json;
  try {
    const json j = json::parse(text);
    if (j.at("schema") != "wavattack-eval-report/1") throw FormatError("unknown report schema");
    EvalReport r;
    r.task = j.at("task").get<std::string>();
    r.labels = j.at("labels").get<std::vector<std::string>>();
    r.epsilons = j.at("epsilons").get<std::vector<double>>();
    r.steps = j.at("steps").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.surrogate = j.at("surrogate").get<std::string>();
    r.random_guess_error = j.at("random_guess_error").get<double>();
    r.true_labels = j.at("true_labels").get<std::vector<std::size_t>>();
    for (const auto& m : j.at("models")) {
      r.models.push_back({m.at("id").get<std::string>(), m.at("white_box").get<bool>(),
                          m.at("clean_error").get<double>(), m.at("error").get<std::vector<double>>()});
      r.clean_predictions.push_back(m.at("clean_predictions").get<std::vector<std::size_t>>());
      r.predictions.push_back(m.at("predictions").get<std::vector<std::vector<std::size_t>>>());
    }
    for (const auto& s : j.at("perturbation")) {
      r.perturbation.push_back({s.at("epsilon").get<double>(), s.at("mean_linf").get<double>(),
                                s.at("max_linf").get<double>(), s.at("mean_l2").get<double>(), s.at("mean_snr_db").get<double>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed evaluation report: ") + e.what());
  }
}

void save_report(const EvalReport& report, const std::filesystem::path& path) {
  util::write_file_atomic(path, report_to_json(report));
}

}  // namespace wavattack::eval

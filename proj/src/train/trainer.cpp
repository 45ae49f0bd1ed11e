#include "wavattack/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "wavattack/util/io.hpp"
#include "wavattack/util/numeric.hpp"

namespace wavattack::train {

namespace {

void check_labels(const nn::Model& model, const std::vector<std::string>& labels) {
  if (labels != model.labels()) throw ConfigError("dataset labels do not match the model's class labels");
}

// One example's forward/backward on a reusable graph.
struct Worker {
  const nn::Model& model;
  nn::ModelGraph mg;

  explicit Worker(const nn::Model& m) : model(m), mg(m.build_graph()) {}

  double run(const data::Waveform& x, std::size_t label, grad::Gradients& out) {
    const grad::Tensor input = model.input_tensor(x.view());
    const grad::Tensor target = model.one_hot(label);
    const double loss = mg.graph.forward(model.bindings(input, target))[0];
    out = mg.graph.backward();
    return loss;
  }
};

void accumulate(grad::Gradients& acc, const grad::Gradients& g, const nn::ParamMap& params) {
  for (const auto& [name, t] : params) {
    auto dst = acc.at(name).values();
    const auto src = g.at(name).values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (!(lr_min > 0.0) || !(lr_min < lr_max) || !std::isfinite(lr_max)) {
    throw ConfigError("lr range must satisfy 0 < lr_min < lr_max");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (!(lr_decay > 0.0 && lr_decay < 1.0)) throw ConfigError("lr_decay must lie in (0, 1)");
  if (patience == 0) throw ConfigError("patience must be at least 1");
  if (search_budget == 0) throw ConfigError("search_budget must be at least 1");
  if (probe_epochs == 0) throw ConfigError("probe_epochs must be at least 1");
  if (jobs == 0) throw ConfigError("jobs must be at least 1");
}

Adam::Adam(const nn::ParamMap& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& [name, t] : params) {
    m_[name].assign(t.size(), 0.0);
    v_[name].assign(t.size(), 0.0);
  }
}

void Adam::step(nn::ParamMap& params, const grad::Gradients& grads, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& [name, t] : params) {
    const auto g = grads.at(name).values();
    auto& m = m_.at(name);
    auto& v = v_.at(name);
    auto p = t.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

EvalStats evaluate(const nn::Model& model, const data::LabeledSet& set, std::size_t jobs) {
  if (set.empty()) throw ConfigError("cannot evaluate on an empty split");
  std::vector<double> losses(set.size());
  std::vector<char> correct(set.size());
  util::parallel_for(set.size(), jobs, [&](std::size_t i) {
    const nn::Score s = model.score(set.waveforms[i].view(), set.labels[i]);
    losses[i] = s.loss;
    const auto best = std::max_element(s.probs.begin(), s.probs.end()) - s.probs.begin();
    correct[i] = static_cast<std::size_t>(best) == set.labels[i];
  });
  EvalStats out;
  out.loss = util::exact_sum(losses) / static_cast<double>(set.size());
  out.accuracy = static_cast<double>(std::count(correct.begin(), correct.end(), 1)) / static_cast<double>(set.size());
  return out;
}

double evaluate_accuracy(const nn::Model& model, const data::LabeledSet& set, std::size_t jobs) {
  return evaluate(model, set, jobs).accuracy;
}

double evaluate_accuracy(const nn::Model& model, const data::Dataset& dataset, data::Split split, std::size_t jobs) {
  switch (split) {
    case data::Split::Train: return evaluate_accuracy(model, dataset.training_data().train, jobs);
    case data::Split::Val: return evaluate_accuracy(model, dataset.training_data().val, jobs);
    case data::Split::Test: return evaluate_accuracy(model, dataset.test_set(), jobs);
    default: throw ConfigError("no examples are assigned to the unassigned split");
  }
}

std::string format_epoch_line(const TrainHistory& h, std::size_t epoch) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "epoch=%zu train_loss=%.6f val_loss=%.6f val_acc=%.4f lr=%.3g", epoch,
                h.train_loss[epoch], h.val_loss[epoch], h.val_accuracy[epoch], h.lr[epoch]);
  return buf;
}

namespace {

TrainResult train_impl(const nn::Model& initial, const data::TrainingData& data, const TrainConfig& cfg,
                       TrainHistory& h);

}  // namespace

TrainResult train(const nn::Model& initial, const data::TrainingData& data, const TrainConfig& cfg) {
  TrainHistory h;
  try {
    return train_impl(initial, data, cfg, h);
  } catch (const OverflowError& e) {
    throw DivergenceError(std::string("training diverged: ") + e.what(), h);
  }
}

namespace {

TrainResult train_impl(const nn::Model& initial, const data::TrainingData& data, const TrainConfig& cfg,
                       TrainHistory& h) {
  cfg.validate();
  check_labels(initial, data.labels);
  if (data.train.empty()) throw ConfigError("training split is empty");
  if (data.val.empty()) throw ConfigError("validation split is empty");

  nn::Model model = initial;
  nn::Model best = initial;
  h.chosen_lr = cfg.lr;
  double lr = cfg.lr;

  auto record = [&](std::size_t epoch, double train_loss) {
    const EvalStats val = evaluate(model, data.val, cfg.jobs);
    h.train_loss.push_back(train_loss);
    h.val_loss.push_back(val.loss);
    h.val_accuracy.push_back(val.accuracy);
    h.lr.push_back(lr);
    if (cfg.log) cfg.log(format_epoch_line(h, epoch));
    if (!std::isfinite(val.loss)) throw DivergenceError("validation loss became non-finite at epoch " + std::to_string(epoch), h);
  };
  record(0, evaluate(model, data.train, cfg.jobs).loss);

  const std::size_t shards = std::min(cfg.jobs, cfg.batch_size);
  std::vector<Worker> workers;
  for (std::size_t s = 0; s < shards; ++s) workers.emplace_back(model);
  Adam adam(model.params());

  grad::Gradients batch_grad;
  for (const auto& [name, t] : model.params()) batch_grad.emplace(name, grad::Tensor(t.shape()));

  std::vector<std::size_t> order(data.train.size());
  std::size_t since_best = 0;
  std::size_t epoch = 0;
  while (epoch < cfg.max_epochs && lr >= cfg.stop_lr) {
    ++epoch;
    std::iota(order.begin(), order.end(), 0);
    auto rng = util::Rng::keyed({static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                                 static_cast<std::uint32_t>(epoch)});
    rng.shuffle(order);

    std::vector<double> losses(order.size());
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      for (auto& [name, t] : batch_grad) std::fill(t.values().begin(), t.values().end(), 0.0);
      if (shards == 1) {
        grad::Gradients g;
        for (std::size_t k = 0; k < n; ++k) {
          const std::size_t i = order[start + k];
          losses[start + k] = workers[0].run(data.train.waveforms[i], data.train.labels[i], g);
          accumulate(batch_grad, g, model.params());
        }
      } else {
        // Per-example slots reduced in batch order keep results independent of the job count.
        std::vector<grad::Gradients> slots(n);
        util::parallel_for(shards, shards, [&](std::size_t s) {
          for (std::size_t k = s; k < n; k += shards) {
            const std::size_t i = order[start + k];
            losses[start + k] = workers[s].run(data.train.waveforms[i], data.train.labels[i], slots[k]);
          }
        });
        for (const auto& g : slots) accumulate(batch_grad, g, model.params());
      }
      for (std::size_t k = 0; k < n; ++k) {
        if (!std::isfinite(losses[start + k])) {
          throw DivergenceError("training loss became non-finite in epoch " + std::to_string(epoch), h);
        }
      }
      const double scale = 1.0 / static_cast<double>(n);
      for (auto& [name, t] : batch_grad) {
        for (double& v : t.values()) v *= scale;
      }
      adam.step(model.mutable_params(), batch_grad, lr);
    }

    record(epoch, util::exact_sum(losses) / static_cast<double>(losses.size()));
    if (h.val_loss[epoch] < h.val_loss[h.best_epoch]) {
      h.best_epoch = epoch;
      best = model;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      lr *= cfg.lr_decay;
      since_best = 0;
    }
  }
  h.stopping_epoch = epoch;
  return {std::move(best), h};
}

}  // namespace

LrSearchResult lr_search(const std::function<nn::Model()>& build, const data::TrainingData& data,
                         const TrainConfig& cfg) {
  cfg.validate();
  double lo = cfg.lr_min;
  double hi = cfg.lr_max;
  LrSearchResult out;
  if (cfg.search_budget < 3) {
    out.lr = std::sqrt(lo * hi);
    return out;
  }

  auto probe = [&](double lr) {
    TrainConfig p = cfg;
    p.lr = lr;
    p.max_epochs = cfg.probe_epochs;
    p.log = nullptr;
    double loss = std::numeric_limits<double>::infinity();
    try {
      const TrainResult r = train(build(), data, p);
      loss = *std::min_element(r.history.val_loss.begin() + 1, r.history.val_loss.end());
      if (!std::isfinite(loss)) loss = std::numeric_limits<double>::infinity();
    } catch (const DivergenceError&) {
    } catch (const OverflowError&) {
    }
    out.probes.push_back({lr, loss});
    if (cfg.log) {
      char buf[120];
      std::snprintf(buf, sizeof buf, "lr_probe lr=%.4g val_loss=%.6f", lr, loss);
      cfg.log(buf);
    }
    return loss;
  };

  double lo_loss = probe(lo);
  double hi_loss = probe(hi);
  double mid = std::sqrt(lo * hi);
  double mid_loss = probe(mid);
  for (std::size_t used = 3; used < cfg.search_budget; ++used) {
    if (lo_loss <= hi_loss) {
      hi = mid;
      hi_loss = mid_loss;
    } else {
      lo = mid;
      lo_loss = mid_loss;
    }
    mid = std::sqrt(lo * hi);
    mid_loss = probe(mid);
  }

  const auto best = std::min_element(out.probes.begin(), out.probes.end(),
                                     [](const LrProbe& a, const LrProbe& b) { return a.val_loss < b.val_loss; });
  if (!std::isfinite(best->val_loss)) {
    std::string msg = "every learning-rate probe diverged:";
    for (const auto& p : out.probes) {
      char buf[64];
      std::snprintf(buf, sizeof buf, " lr=%.3g loss=%g", p.lr, p.val_loss);
      msg += buf;
    }
    throw DivergenceError(msg, {});
  }
  out.lr = best->lr;
  return out;
}

}  // namespace wavattack::train

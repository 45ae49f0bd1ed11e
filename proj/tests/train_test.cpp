#include <gtest/gtest.h>

#include <cmath>

#include "wavattack/data/synth.hpp"
#include "wavattack/train/trainer.hpp"

using namespace wavattack;
using namespace wavattack::train;

namespace {

// 0.2 s clips at 8 kHz: five 40 ms frames, small enough for quick training.
nn::ModelConfig small_config(std::size_t classes) {
  nn::ModelConfig c;
  c.sample_rate = 8000;
  c.clip_seconds = 0.2;
  c.frontend_blocks = 3;
  c.backend_blocks = 2;
  c.conv_features = 4;
  c.kernel_len = 9;
  c.rnn_units = 8;
  c.fc_units = 8;
  c.num_classes = classes;
  return c;
}

data::Dataset small_dataset(const std::string& task, std::size_t n_per_class, std::uint64_t seed) {
  data::SynthConfig sc;
  sc.clip_seconds = 0.2;
  auto g = data::synth_dataset(task, n_per_class, seed, sc);
  return data::Dataset(data::split(g.manifest, {}, seed), std::move(g.waveforms));
}

TrainConfig quick(std::size_t epochs) {
  TrainConfig c;
  c.max_epochs = epochs;
  c.batch_size = 8;
  c.seed = 3;
  return c;
}

}  // namespace

TEST(Adam, ZeroGradientOnFreshStateLeavesParameters) {
  nn::ParamMap params;
  params.emplace("w", grad::Tensor({3}, {0.5, -1.0, 2.0}));
  const nn::ParamMap before = params;
  Adam adam(params);
  grad::Gradients g;
  g.emplace("w", grad::Tensor({3}));
  adam.step(params, g, 0.1);
  EXPECT_EQ(params, before);
}

TEST(Adam, FirstStepMovesByLearningRateAgainstTheGradient) {
  nn::ParamMap params;
  params.emplace("w", grad::Tensor({3}, {0.5, -1.0, 2.0}));
  Adam adam(params);
  grad::Gradients g;
  g.emplace("w", grad::Tensor({3}, {4.0, -0.25, 1e-3}));
  adam.step(params, g, 0.01);
  const auto w = params.at("w").values();
  // Bias-corrected moments equal g and g^2 after one step.
  EXPECT_DOUBLE_EQ(w[0], 0.5 - 0.01 * 4.0 / (4.0 + 1e-8));
  EXPECT_DOUBLE_EQ(w[1], -1.0 + 0.01 * 0.25 / (0.25 + 1e-8));
  EXPECT_DOUBLE_EQ(w[2], 2.0 - 0.01 * 1e-3 / (1e-3 + 1e-8));
}

TEST(Train, ZeroEpochsKeepsParameters) {
  const auto ds = small_dataset("gender_proxy", 8, 1);
  const nn::Model m = nn::build_wavecnn(small_config(2), 1, ds.labels());
  const auto r = train::train(m, ds.training_data(), quick(0));
  EXPECT_EQ(r.model.params(), m.params());
  EXPECT_EQ(r.history.val_loss.size(), 1u);
  EXPECT_EQ(r.history.stopping_epoch, 0u);
}

TEST(Train, SameSeedSameResultAndJobCountDoesNotMatter) {
  const auto ds = small_dataset("gender_proxy", 8, 2);
  const nn::Model m = nn::build_wavernn(small_config(2), 2, ds.labels());
  const auto a = train::train(m, ds.training_data(), quick(3));
  const auto b = train::train(m, ds.training_data(), quick(3));
  TrainConfig threaded = quick(3);
  threaded.jobs = 3;
  const auto c = train::train(m, ds.training_data(), threaded);
  EXPECT_EQ(a.model.params(), b.model.params());
  EXPECT_EQ(a.model.params(), c.model.params());
  EXPECT_EQ(a.history.val_loss, c.history.val_loss);
}

TEST(Train, HistoryIsConsistentAndSnapshotIsBest) {
  const auto ds = small_dataset("speaker_proxy", 6, 3);
  const nn::Model m = nn::build_wavecnn(small_config(4), 3, ds.labels());
  std::vector<std::string> lines;
  TrainConfig cfg = quick(6);
  cfg.log = [&](const std::string& s) { lines.push_back(s); };
  const auto r = train::train(m, ds.training_data(), cfg);
  const auto& h = r.history;
  const std::size_t epochs = h.stopping_epoch + 1;
  EXPECT_EQ(h.train_loss.size(), epochs);
  EXPECT_EQ(h.val_loss.size(), epochs);
  EXPECT_EQ(h.val_accuracy.size(), epochs);
  EXPECT_EQ(h.lr.size(), epochs);
  EXPECT_EQ(lines.size(), epochs);
  EXPECT_NE(lines.back().find("epoch=" + std::to_string(h.stopping_epoch)), std::string::npos);
  EXPECT_EQ(h.chosen_lr, cfg.lr);
  for (double v : h.val_loss) EXPECT_GE(v, h.val_loss[h.best_epoch]);
  EXPECT_LE(h.val_loss[h.best_epoch], h.val_loss[0]);
  EXPECT_DOUBLE_EQ(evaluate(r.model, ds.training_data().val).loss, h.val_loss[h.best_epoch]);
}

TEST(Train, DecaysLearningRateOnPlateauAndStops) {
  const auto ds = small_dataset("gender_proxy", 8, 4);
  const nn::Model m = nn::build_wavecnn(small_config(2), 4, ds.labels());
  // A large step size makes the validation loss bounce, so plateaus come quickly.
  TrainConfig cfg = quick(200);
  cfg.lr = 0.3;
  cfg.patience = 1;
  cfg.stop_lr = 1e-5;
  const auto r = train::train(m, ds.training_data(), cfg);
  EXPECT_LT(r.history.stopping_epoch, 200u);
  EXPECT_LT(r.history.lr.back(), cfg.lr);
  for (std::size_t e = 1; e < r.history.lr.size(); ++e) EXPECT_LE(r.history.lr[e], r.history.lr[e - 1]);
}

TEST(Train, LearnsTheGenderProxy) {
  const auto ds = small_dataset("gender_proxy", 24, 5);
  const nn::Model m = nn::build_wavecnn(small_config(2), 5, ds.labels());
  TrainConfig cfg = quick(12);
  cfg.lr = 3e-3;
  const auto r = train::train(m, ds.training_data(), cfg);
  EXPECT_GE(evaluate_accuracy(r.model, ds, data::Split::Test), 0.9);
}

TEST(Train, RejectsMismatchedOrEmptyData) {
  const auto ds = small_dataset("gender_proxy", 8, 6);
  const nn::Model wrong = nn::build_wavecnn(small_config(2), 6);
  EXPECT_THROW(train::train(wrong, ds.training_data(), quick(1)), ConfigError);
  const nn::Model m = nn::build_wavecnn(small_config(2), 6, ds.labels());
  data::TrainingData td = ds.training_data();
  td.val = {};
  EXPECT_THROW(train::train(m, td, quick(1)), ConfigError);
  TrainConfig bad = quick(1);
  bad.batch_size = 0;
  EXPECT_THROW(train::train(m, ds.training_data(), bad), ConfigError);
}

TEST(Train, OverflowBecomesDivergenceWithHistory) {
  const auto ds = small_dataset("gender_proxy", 8, 7);
  nn::Model m = nn::build_wavecnn(small_config(2), 7, ds.labels());
  for (double& v : m.mutable_params().at("out.bias").values()) v = 1e308;
  m.mutable_params().at("out.bias")[0] = -1e308;
  try {
    train::train(m, ds.training_data(), quick(1));
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_TRUE(e.history().val_loss.empty());
  }
}

TEST(Evaluate, ConstantPredictorOnBalancedSplitIsHalfRight) {
  const auto ds = small_dataset("gender_proxy", 10, 8);
  nn::Model m = nn::build_wavecnn(small_config(2), 8, ds.labels());
  for (double& v : m.mutable_params().at("out.weight").values()) v = 0.0;
  m.mutable_params().at("out.bias")[0] = 1.0;
  const auto test = ds.test_set();
  EXPECT_EQ(test.size(), 4u);
  EXPECT_DOUBLE_EQ(evaluate_accuracy(m, test), 0.5);
  EXPECT_THROW(evaluate_accuracy(m, data::LabeledSet{}), ConfigError);
}

TEST(Evaluate, OracleLabelsScorePerfectly) {
  const auto ds = small_dataset("gender_proxy", 10, 9);
  nn::Model m = nn::build_wavecnn(small_config(2), 9, ds.labels());
  data::LabeledSet set = ds.test_set();
  for (std::size_t i = 0; i < set.size(); ++i) set.labels[i] = m.predict_label(set.waveforms[i].view());
  EXPECT_DOUBLE_EQ(evaluate_accuracy(m, set), 1.0);
}

TEST(Evaluate, TrainingDataExcludesTestExamples) {
  const auto ds = small_dataset("speaker_proxy", 10, 10);
  const auto td = ds.training_data();
  EXPECT_EQ(td.train.size(), ds.manifest().ids(data::Split::Train).size());
  EXPECT_EQ(td.val.size(), ds.manifest().ids(data::Split::Val).size());
  EXPECT_EQ(td.train.size() + td.val.size() + ds.test_set().size(), 40u);
}

TEST(LrSearch, SmallBudgetReturnsLogMidpoint) {
  const auto ds = small_dataset("gender_proxy", 8, 11);
  TrainConfig cfg = quick(1);
  cfg.search_budget = 1;
  const auto r = lr_search([&] { return nn::build_wavecnn(small_config(2), 11, ds.labels()); },
                           ds.training_data(), cfg);
  EXPECT_NEAR(r.lr, 3.1623e-4, 1e-8);
  EXPECT_TRUE(r.probes.empty());
}

TEST(LrSearch, PicksBestProbeInsideTheRange) {
  const auto ds = small_dataset("gender_proxy", 8, 12);
  TrainConfig cfg = quick(1);
  cfg.search_budget = 5;
  cfg.probe_epochs = 2;
  const auto r = lr_search([&] { return nn::build_wavecnn(small_config(2), 12, ds.labels()); },
                           ds.training_data(), cfg);
  ASSERT_EQ(r.probes.size(), 5u);
  EXPECT_GE(r.lr, cfg.lr_min);
  EXPECT_LE(r.lr, cfg.lr_max);
  EXPECT_EQ(r.probes[0].lr, cfg.lr_min);
  EXPECT_EQ(r.probes[1].lr, cfg.lr_max);
  double chosen = 0.0;
  for (const auto& p : r.probes) {
    if (p.lr == r.lr) chosen = p.val_loss;
  }
  EXPECT_LE(chosen, r.probes[0].val_loss);
  EXPECT_LE(chosen, r.probes[1].val_loss);
  // Each later probe sits strictly inside the current bracket.
  for (std::size_t i = 2; i < r.probes.size(); ++i) {
    EXPECT_GT(r.probes[i].lr, cfg.lr_min);
    EXPECT_LT(r.probes[i].lr, cfg.lr_max);
  }
}

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "wavattack/cli/cli.hpp"
#include "wavattack/data/wav.hpp"
#include "wavattack/eval/sweep.hpp"
#include "wavattack/util/io.hpp"

using namespace wavattack;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("wavattack_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

const std::vector<std::string> kTinyModel = {
    "--set", "frontend_blocks=3", "--set", "backend_blocks=2", "--set", "conv_features=4", "--set", "kernel_len=9",
    "--set", "rnn_units=8",       "--set", "fc_units=8",       "--set", "batch_size=8"};

// Short-clip dataset plus one tiny trained checkpoint shared by several tests.
struct Fixture {
  fs::path dir = fresh_dir("fixture");
  fs::path manifest = dir / "data" / "manifest.tsv";
  fs::path model = dir / "model" / "model.ckpt";

  Fixture() {
    auto r = call({"synth-data", "--task", "gender_proxy", "--n", "24", "--seed", "3", "--set", "clip_seconds=0.2",
                   "--out", (dir / "data").string()});
    if (r.code != 0) throw std::runtime_error(r.err);
    std::vector<std::string> args{"train", "--data", manifest.string(), "--epochs", "1", "--out",
                                  (dir / "model").string()};
    args.insert(args.end(), kTinyModel.begin(), kTinyModel.end());
    r = call(args);
    if (r.code != 0) throw std::runtime_error(r.err);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST(Settings, PrecedenceAndUnknownKeys) {
  cli::Settings s({{"a", "1"}, {"b", "x"}});
  s.load_text("# comment\n\na = 2\n", "file");
  EXPECT_EQ(s.get("a"), "2");
  EXPECT_EQ(s.real("a"), 2.0);
  EXPECT_THROW(s.set("c", "1"), cli::UsageError);
  EXPECT_THROW(s.load_text("b\n", "file"), cli::UsageError);
  EXPECT_THROW(s.count("b"), cli::UsageError);
  s.set("b", "0.1, 0.2,0.3");
  EXPECT_EQ(s.reals("b"), (std::vector<double>{0.1, 0.2, 0.3}));
  EXPECT_EQ(s.text(), "a=2\nb=0.1, 0.2,0.3\n");
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(call({}).code, 2);
  EXPECT_EQ(call({"frobnicate"}).code, 2);
  EXPECT_EQ(call({"synth-data", "--task", "gender_proxy", "--bogus"}).code, 2);
  EXPECT_EQ(call({"synth-data", "--task", "gender_proxy", "--set", "nope=1"}).code, 2);
  EXPECT_EQ(call({"synth-data", "--task", "opera_proxy"}).code, 2);
  EXPECT_EQ(call({"synth-data", "--task", "speaker_proxy", "--n", "10"}).code, 2);
  const auto r = call({"attack", "--in", "x.wav", "--label", "low", "--eps", "0.1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("model"), std::string::npos);
  EXPECT_EQ(call({"synth-data", "--config", "/nonexistent/cfg.txt"}).code, 2);
  EXPECT_EQ(call({"--help"}).code, 0);
}

TEST(Cli, RuntimeFailuresExitOne) {
  const fs::path dir = fresh_dir("runtime");
  const auto r = call({"attack", "--model", (dir / "missing.ckpt").string(), "--in", (dir / "missing.wav").string(),
                       "--label", "low", "--eps", "0.01", "--out", (dir / "adv.wav").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(r.err.empty());
}

TEST(Cli, SynthDataIsReproducibleAndEchoesConfig) {
  const fs::path dir = fresh_dir("synth");
  util::write_file_atomic(dir / "cfg.txt", "task=speaker_proxy\nn=12\nclip_seconds=0.2\n");
  for (const char* sub : {"a", "b"}) {
    const auto r = call({"synth-data", "--config", (dir / "cfg.txt").string(), "--seed", "5", "--out",
                         (dir / sub).string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  const std::string manifest = util::read_file(dir / "a" / "manifest.tsv");
  EXPECT_EQ(manifest, util::read_file(dir / "b" / "manifest.tsv"));
  EXPECT_EQ(line_count(manifest), 3u + 12u);
  for (const auto& entry : fs::directory_iterator(dir / "a" / "wav")) {
    EXPECT_EQ(util::read_file(entry.path()), util::read_file(dir / "b" / "wav" / entry.path().filename()));
  }
  const std::string echoed = util::read_file(dir / "a" / "config.txt");
  EXPECT_NE(echoed.find("task=speaker_proxy\n"), std::string::npos);
  EXPECT_NE(echoed.find("seed=5\n"), std::string::npos);
  EXPECT_NE(echoed.find("snr_db=20\n"), std::string::npos);
}

TEST(Cli, TrainWritesCheckpointHistoryAndAppendsToTheLog) {
  const auto& f = fixture();
  const fs::path log = f.model.parent_path() / "train.log";
  const std::string first = util::read_file(log);
  EXPECT_NE(first.find("epoch=1 "), std::string::npos);
  EXPECT_TRUE(fs::exists(f.model.parent_path() / "history.tsv"));
  EXPECT_NE(util::read_file(f.model.parent_path() / "config.txt").find("conv_features=4\n"), std::string::npos);

  const fs::path dir = fresh_dir("train_again");
  fs::copy(f.model.parent_path(), dir, fs::copy_options::recursive);
  std::vector<std::string> args{"train", "--data", f.manifest.string(), "--epochs", "1", "--out", dir.string()};
  args.insert(args.end(), kTinyModel.begin(), kTinyModel.end());
  ASSERT_EQ(call(args).code, 0);
  const std::string second = util::read_file(dir / "train.log");
  EXPECT_TRUE(second.starts_with(first));
  EXPECT_EQ(line_count(second), 2 * line_count(first));
  EXPECT_EQ(util::read_file(dir / "model.ckpt"), util::read_file(f.model));
}

TEST(Cli, TrainRejectsGeometryThatDoesNotFitTheClips) {
  const auto& f = fixture();
  std::vector<std::string> args{"train", "--data", f.manifest.string(), "--set", "clip_seconds=0.4",
                                "--out", fresh_dir("badgeom").string()};
  EXPECT_EQ(call(args).code, 2);
}

TEST(Cli, AttackStaysInTheBallAndLeavesItsInputAlone) {
  const auto& f = fixture();
  const fs::path dir = fresh_dir("attack");
  const fs::path in = f.manifest.parent_path() / "wav" / "low_0000.wav";
  const std::string before = util::read_file(in);
  const auto r = call({"attack", "--model", f.model.string(), "--in", in.string(), "--label", "low", "--eps", "0.02",
                       "--steps", "2", "--out", (dir / "adv.wav").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(util::read_file(in), before);
  const auto x = data::load_wav(in);
  const auto adv = data::load_wav(dir / "adv.wav");
  ASSERT_EQ(x.size(), adv.size());
  double linf = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) linf = std::max(linf, std::fabs(adv.samples[i] - x.samples[i]));
  EXPECT_LE(linf, 0.04);
  EXPECT_GT(linf, 0.0);
  const std::string metrics = util::read_file(dir / "adv.wav.metrics.txt");
  EXPECT_NE(metrics.find("ball=0.04\n"), std::string::npos);
  EXPECT_NE(metrics.find("snr_db="), std::string::npos);
  EXPECT_NE(util::read_file(dir / "adv.wav.config.txt").find("epsilon=0.02\n"), std::string::npos);

  const auto again = call({"attack", "--model", f.model.string(), "--in", in.string(), "--label", "low", "--eps",
                           "0.02", "--steps", "2", "--out", (dir / "adv2.wav").string()});
  ASSERT_EQ(again.code, 0);
  EXPECT_EQ(util::read_file(dir / "adv2.wav"), util::read_file(dir / "adv.wav"));
  EXPECT_EQ(call({"attack", "--model", f.model.string(), "--in", in.string(), "--label", "low", "--eps", "0.02",
                  "--out", in.string()})
                .code,
            2);
}

TEST(Cli, MetricsAndSpectrogramDiff) {
  const auto& f = fixture();
  const fs::path dir = fresh_dir("spec");
  const fs::path in = f.manifest.parent_path() / "wav" / "high_0012.wav";
  ASSERT_EQ(call({"attack", "--model", f.model.string(), "--in", in.string(), "--label", "high", "--eps", "0.01",
                  "--out", (dir / "adv.wav").string()})
                .code,
            0);
  const auto m = call({"metrics", "--original", in.string(), "--adversarial", (dir / "adv.wav").string(), "--out",
                       (dir / "m.txt").string()});
  ASSERT_EQ(m.code, 0) << m.err;
  EXPECT_EQ(util::read_file(dir / "m.txt"), m.out);
  const auto s = call({"spectrogram", "--in", (dir / "adv.wav").string(), "--minus", in.string(), "--window", "256",
                       "--hop", "64", "--out", (dir / "diff.txt").string()});
  ASSERT_EQ(s.code, 0) << s.err;
  const std::string text = util::read_file(dir / "diff.txt");
  EXPECT_TRUE(text.starts_with("# bins=129 "));
  EXPECT_EQ(line_count(text), 2u + 129u);
}

TEST(Cli, DiagnoseExportsProfilesForModelsAndTheDemo) {
  const auto& f = fixture();
  const fs::path dir = fresh_dir("diagnose");
  const fs::path in = f.manifest.parent_path() / "wav" / "low_0001.wav";
  const auto r = call({"diagnose", "--model", f.model.string(), "--in", in.string(), "--label", "low", "--out",
                       (dir / "p.txt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("vanishing_ratio="), std::string::npos);
  std::istringstream lines(util::read_file(dir / "p.txt"));
  std::size_t rows = 0;
  for (std::string line; std::getline(lines, line);) rows += !line.starts_with("#");
  EXPECT_EQ(rows, 1600u);
  const auto demo = call({"diagnose", "--demo-steps", "50", "--out", (dir / "demo.txt").string()});
  ASSERT_EQ(demo.code, 0) << demo.err;
  EXPECT_NE(demo.out.find("bound_constant="), std::string::npos);
  EXPECT_EQ(call({"diagnose", "--out", (dir / "none.txt").string()}).code, 2);
}

TEST(Cli, SweepWritesALoadableReport) {
  const auto& f = fixture();
  const fs::path dir = fresh_dir("sweep");
  const auto r = call({"sweep", "--data", f.manifest.string(), "--model", "cnn=" + f.model.string(), "--eps",
                       "0,0.05", "--jobs", "2", "--out", (dir / "r.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = eval::report_from_json(util::read_file(dir / "r.json"));
  EXPECT_EQ(report.task, "gender_proxy");
  EXPECT_EQ(report.epsilons, (std::vector<double>{0.0, 0.05}));
  ASSERT_EQ(report.models.size(), 1u);
  EXPECT_TRUE(report.models[0].white_box);
  EXPECT_EQ(report.true_labels.size(), 5u);  // 20% of 24, rounded
  EXPECT_EQ(call({"sweep", "--data", f.manifest.string(), "--model", "cnn=" + f.model.string(), "--surrogate", "rnn",
                  "--out", (dir / "x.json").string()})
                .code,
            2);
}

TEST(Cli, OutputRootComesFromTheEnvironment) {
  const fs::path dir = fresh_dir("envroot");
  ::setenv("WAVATTACK_OUT", dir.c_str(), 1);
  const auto r = call({"diagnose", "--demo-steps", "10"});
  ::unsetenv("WAVATTACK_OUT");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "profile.txt"));
  EXPECT_TRUE(fs::exists(dir / "profile.txt.config.txt"));
}

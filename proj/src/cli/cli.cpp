#include "wavattack/cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <list>
#include <ostream>
#include <sstream>

#include "wavattack/attack/fgsm.hpp"
#include "wavattack/data/dataset.hpp"
#include "wavattack/data/synth.hpp"
#include "wavattack/data/wav.hpp"
#include "wavattack/diag/profile.hpp"
#include "wavattack/eval/metrics.hpp"
#include "wavattack/eval/sweep.hpp"
#include "wavattack/nn/checkpoint.hpp"
#include "wavattack/train/trainer.hpp"
#include "wavattack/util/io.hpp"

namespace wavattack::cli {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

Settings::Settings(std::vector<std::pair<std::string, std::string>> defaults) {
  for (auto& [k, v] : defaults) values_.emplace(std::move(k), std::move(v));
}

bool Settings::known(std::string_view key) const { return values_.find(key) != values_.end(); }

void Settings::set(std::string_view key, std::string_view value) {
  key = trim(key);
  const auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown config key '" + std::string(key) + "'");
  it->second = std::string(trim(value));
}

void Settings::load_text(std::string_view text, std::string_view origin) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError(std::string(origin) + ":" + std::to_string(line_no) + ": expected key=value");
    }
    set(line.substr(0, eq), line.substr(eq + 1));
  }
}

const std::string& Settings::get(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown config key '" + std::string(key) + "'");
  return it->second;
}

double Settings::real(std::string_view key) const {
  const std::string& v = get(key);
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) {
    throw UsageError(std::string(key) + " expects a number, got '" + v + "'");
  }
  return d;
}

std::uint64_t Settings::u64(std::string_view key) const {
  const std::string& v = get(key);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
    throw UsageError(std::string(key) + " expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::size_t Settings::count(std::string_view key) const { return static_cast<std::size_t>(u64(key)); }

bool Settings::flag(std::string_view key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw UsageError(std::string(key) + " expects true or false, got '" + v + "'");
}

std::vector<std::string> Settings::list(std::string_view key) const {
  std::vector<std::string> out;
  std::string_view rest = get(key);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto item = trim(rest.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
  }
  return out;
}

std::vector<double> Settings::reals(std::string_view key) const {
  std::vector<double> out;
  for (const auto& item : list(key)) {
    char* end = nullptr;
    const double d = std::strtod(item.c_str(), &end);
    if (end != item.c_str() + item.size()) throw UsageError(std::string(key) + ": bad number '" + item + "'");
    out.push_back(d);
  }
  return out;
}

std::string Settings::text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

fs::path default_output_root() {
  const char* env = std::getenv("WAVATTACK_OUT");
  return env != nullptr && *env != '\0' ? fs::path(env) : fs::path("wavattack-out");
}

namespace {

const std::vector<std::string> kModelKeys = {"sample_rate", "clip_seconds", "frame_ms",  "frontend_blocks",
                                             "backend_blocks", "conv_features", "kernel_len", "pool",
                                             "rnn_units", "fc_units", "num_classes", "activation"};

struct Command {
  std::string name;
  CLI::App* app = nullptr;
  Settings settings;
  std::string default_out;
  bool out_is_dir = false;
  std::vector<std::pair<std::string, std::string>> flag_keys;  // option name, key
  std::map<std::string, std::string> flag_values;
  std::vector<std::string> model_args;  // repeated --model for sweep
  std::string config_path;
  std::vector<std::string> overrides;
  std::function<void(Command&, std::ostream&)> action;

  void flag(const std::string& option, const std::string& key, const std::string& help) {
    app->add_option(option, flag_values[key], help);
    flag_keys.emplace_back(option, key);
  }
  fs::path out() const { return settings.get("out"); }
};

std::string required(const Settings& s, std::string_view key) {
  const std::string& v = s.get(key);
  if (v.empty()) throw UsageError("missing required setting '" + std::string(key) + "'");
  return v;
}

void refuse_overwrite(const fs::path& out, const std::vector<fs::path>& inputs) {
  for (const auto& in : inputs) {
    std::error_code ec;
    if (fs::exists(out) && fs::equivalent(out, in, ec)) {
      throw UsageError("output " + out.string() + " would overwrite input " + in.string());
    }
  }
}

void echo_config(const Command& c, const fs::path& path) {
  util::write_file_atomic(path, "# wavattack " + c.name + "\n" + c.settings.text());
}

fs::path sidecar(const fs::path& file, std::string_view suffix) {
  fs::path p = file;
  p += suffix;
  return p;
}

std::size_t label_of(const nn::Model& m, const std::string& label) {
  const auto& labels = m.labels();
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) {
    std::string known;
    for (const auto& l : labels) known += (known.empty() ? "" : ", ") + l;
    throw UsageError("label '" + label + "' is not one of the model's labels: " + known);
  }
  return static_cast<std::size_t>(it - labels.begin());
}

// The model's input: the file cut or padded to the clip length, on the PCM grid.
data::Waveform model_input(const nn::Model& m, const fs::path& path) {
  auto w = data::preprocess(data::load_wav(path), m.config().clip_seconds, m.config().sample_rate);
  data::quantize_pcm16(w);
  return w;
}

// Rounds every adversarial sample to a PCM16 code, stepping one code back
// toward the original when plain rounding would enlarge the perturbation.
// The original sits on the grid, so the written file keeps |eta| per sample.
data::Waveform quantize_toward(const data::Waveform& original, data::Waveform adv) {
  for (std::size_t i = 0; i < adv.size(); ++i) {
    const double x = original.samples[i];
    const double a = adv.samples[i];
    int code = data::unit_to_pcm16(a);
    if (std::fabs(data::pcm16_to_unit(static_cast<std::int16_t>(code)) - x) > std::fabs(a - x)) {
      code += x < a ? -1 : 1;
    }
    adv.samples[i] = data::pcm16_to_unit(static_cast<std::int16_t>(code));
  }
  return adv;
}

std::string key_values(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

void synth_data(Command& c, std::ostream& out) {
  const Settings& s = c.settings;
  const std::string task = required(s, "task");
  const auto& tasks = data::task_names();
  if (std::find(tasks.begin(), tasks.end(), task) == tasks.end()) throw UsageError("unknown task '" + task + "'");
  const auto labels = data::task_labels(task);
  const std::size_t n = s.count("n");
  if (n == 0 || n % labels.size() != 0) {
    throw UsageError("n must be a positive multiple of the class count " + std::to_string(labels.size()));
  }
  data::SynthConfig sc;
  sc.sample_rate = static_cast<std::uint32_t>(s.count("sample_rate"));
  sc.clip_seconds = s.real("clip_seconds");
  sc.snr_db = s.real("snr_db");
  const std::uint64_t seed = s.u64("seed");
  auto g = data::synth_dataset(task, n / labels.size(), seed, sc);
  auto m = data::split(std::move(g.manifest), {}, seed);
  const fs::path dir = c.out();
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "wav/%s_%04zu.wav", m.entries[i].label.c_str(), i);
    data::save_wav(g.waveforms[i], dir / name);
    m.entries[i].source = name;
  }
  data::save_manifest(m, dir / "manifest.tsv");
  echo_config(c, dir / "config.txt");
  out << "wrote " << m.entries.size() << " examples (" << m.ids(data::Split::Train).size() << " train, "
      << m.ids(data::Split::Val).size() << " val, " << m.ids(data::Split::Test).size() << " test) to "
      << (dir / "manifest.tsv").string() << "\n";
}

std::string format_history(const train::TrainHistory& h) {
  std::string t = "# epoch train_loss val_loss val_accuracy lr\n";
  for (std::size_t e = 0; e < h.val_loss.size(); ++e) {
    t += std::to_string(e) + " " + num(h.train_loss[e]) + " " + num(h.val_loss[e]) + " " + num(h.val_accuracy[e]) +
         " " + num(h.lr[e]) + "\n";
  }
  return t;
}

void train_model(Command& c, std::ostream& out) {
  Settings& s = c.settings;
  const fs::path manifest = required(s, "data");
  const nn::ModelKind kind = nn::parse_kind(s.get("kind"));
  const auto ds = data::Dataset::load(manifest);
  const std::size_t k = ds.labels().size();

  nn::ModelConfig mc;
  if (s.get("preset") == "desk") {
    mc = nn::ModelConfig::desk(k);
  } else if (s.get("preset") == "full") {
    mc = nn::ModelConfig::full(k);
  } else {
    throw UsageError("preset must be desk or full");
  }
  mc.sample_rate = ds.manifest().sample_rate;
  mc.clip_seconds = ds.manifest().clip_seconds;
  for (const auto& key : kModelKeys) {
    if (!s.empty(key)) mc.set(key, s.get(key));
  }
  mc.validate();
  if (mc.num_classes != k) throw UsageError("num_classes must equal the dataset's " + std::to_string(k) + " labels");
  if (mc.sample_rate != ds.manifest().sample_rate || mc.input_samples() != ds.waveforms().front().size()) {
    throw UsageError("model input geometry does not match the dataset clips");
  }
  // Echo the resolved model geometry, not just the keys that were overridden.
  std::istringstream resolved(mc.to_text());
  for (std::string line; std::getline(resolved, line);) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) s.set(line.substr(0, eq), line.substr(eq + 1));
  }

  train::TrainConfig tc;
  tc.lr = s.real("lr");
  tc.lr_min = s.real("lr_min");
  tc.lr_max = s.real("lr_max");
  tc.max_epochs = s.count("max_epochs");
  tc.batch_size = s.count("batch_size");
  tc.lr_decay = s.real("lr_decay");
  tc.patience = s.count("patience");
  tc.stop_lr = s.real("stop_lr");
  tc.search_budget = s.count("search_budget");
  tc.probe_epochs = s.count("probe_epochs");
  tc.seed = s.u64("seed");
  tc.jobs = std::max<std::size_t>(1, s.count("jobs"));
  tc.validate();

  const fs::path dir = c.out();
  fs::create_directories(dir);
  std::ofstream log(dir / "train.log", std::ios::app);
  if (!log) throw IoError("cannot open " + (dir / "train.log").string());
  const auto emit = [&](const std::string& line) {
    log << line << "\n";
    log.flush();
    out << line << "\n";
  };
  emit("# run kind=" + std::string(nn::kind_name(kind)) + " seed=" + std::to_string(tc.seed) + " data=" +
       manifest.string());

  const auto td = ds.training_data();
  const auto build = [&] { return nn::build_model(kind, mc, tc.seed, ds.labels()); };
  if (s.flag("lr_search")) {
    const auto search = train::lr_search(build, td, tc);
    for (const auto& p : search.probes) emit("lr_probe lr=" + num(p.lr) + " val_loss=" + num(p.val_loss));
    tc.lr = search.lr;
    s.set("lr", num(search.lr));
  }
  echo_config(c, dir / "config.txt");
  tc.log = emit;
  try {
    const auto r = train::train(build(), td, tc);
    nn::save_checkpoint(r.model, dir / "model.ckpt");
    util::write_file_atomic(dir / "history.tsv", format_history(r.history));
    emit("best_epoch=" + std::to_string(r.history.best_epoch) +
         " val_loss=" + num(r.history.val_loss[r.history.best_epoch]) +
         " val_acc=" + num(r.history.val_accuracy[r.history.best_epoch]) + " checkpoint=" +
         (dir / "model.ckpt").string());
  } catch (const train::DivergenceError& e) {
    util::write_file_atomic(dir / "history.tsv", format_history(e.history()));
    emit(std::string("diverged: ") + e.what());
    throw;
  }
}

attack::AttackConfig attack_config(const Settings& s) {
  attack::AttackConfig ac;
  ac.epsilon = s.real("epsilon");
  ac.steps = s.count("steps");
  ac.clip_min = s.real("clip_min");
  ac.clip_max = s.real("clip_max");
  ac.ball = s.empty("ball") ? -1.0 : s.real("ball");
  ac.validate();
  return ac;
}

void run_attack(Command& c, std::ostream& out) {
  const Settings& s = c.settings;
  const fs::path model_path = required(s, "model");
  const fs::path in = required(s, "in");
  required(s, "epsilon");
  const auto ac = attack_config(s);
  const fs::path dst = c.out();
  refuse_overwrite(dst, {model_path, in});
  const auto model = nn::load_checkpoint(model_path);
  const std::size_t y = label_of(model, required(s, "label"));
  const auto x = model_input(model, in);
  const auto r = attack::iterative_fgsm(model, x, y, ac);
  auto written = quantize_toward(x, r.adversarial);
  written.source_id = dst.string();
  const auto probs = model.predict(written.view());
  const auto pred = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
  const auto pm = eval::perturbation_metrics(x, written);
  const auto argmax = [](const std::vector<double>& p) {
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  };
  const std::string metrics = key_values({
      {"label", model.labels()[y]},
      {"epsilon", num(ac.epsilon)},
      {"steps", std::to_string(ac.steps)},
      {"ball", num(ac.effective_ball())},
      {"pred_before", model.labels()[argmax(r.pred_before)]},
      {"pred_after", model.labels()[pred]},
      {"loss_before", num(r.loss_before)},
      {"loss_after", num(r.loss_after)},
      {"null_gradient", r.null_gradient ? "true" : "false"},
      {"linf", num(pm.linf)},
      {"l2", num(pm.l2)},
      {"snr_db", num(pm.snr_db)},
  });
  data::save_wav(written, dst);
  util::write_file_atomic(sidecar(dst, ".metrics.txt"), metrics);
  echo_config(c, sidecar(dst, ".config.txt"));
  out << metrics;
}

void run_sweep(Command& c, std::ostream& out) {
  Settings& s = c.settings;
  const fs::path manifest = required(s, "data");
  std::vector<std::pair<std::string, nn::Model>> loaded;
  std::vector<fs::path> inputs{manifest};
  for (const auto& item : s.list("models")) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("models entries look like id=path, got '" + item + "'");
    inputs.emplace_back(item.substr(eq + 1));
    loaded.emplace_back(item.substr(0, eq), nn::load_checkpoint(inputs.back()));
  }
  if (loaded.empty()) throw UsageError("sweep needs at least one --model id=path");
  if (s.empty("surrogate")) s.set("surrogate", loaded.front().first);
  const std::string sur_id = s.get("surrogate");
  const auto sur = std::find_if(loaded.begin(), loaded.end(), [&](const auto& p) { return p.first == sur_id; });
  if (sur == loaded.end()) throw UsageError("surrogate '" + sur_id + "' is not among the models");

  eval::SweepConfig sc;
  sc.epsilons = s.reals("epsilons");
  sc.steps = s.count("steps");
  sc.jobs = std::max<std::size_t>(1, s.count("jobs"));
  sc.seed = s.u64("seed");
  const auto ds = data::Dataset::load(manifest);
  sc.task = ds.manifest().task;
  data::LabeledSet set;
  if (s.get("split") == "test") {
    set = ds.test_set();
  } else if (s.get("split") == "val") {
    set = ds.training_data().val;
  } else {
    throw UsageError("split must be test or val");
  }
  for (double e : sc.epsilons) {
    attack::AttackConfig ac;
    ac.epsilon = e;
    ac.steps = sc.steps;
    ac.validate();
  }
  std::vector<eval::NamedModel> targets;
  for (const auto& [id, m] : loaded) targets.push_back({id, &m});
  const fs::path dst = c.out();
  refuse_overwrite(dst, inputs);
  const auto report = eval::epsilon_sweep({sur->first, &sur->second}, targets, set, sc);
  eval::save_report(report, dst);
  echo_config(c, sidecar(dst, ".config.txt"));
  out << "epsilon";
  for (const auto& m : report.models) out << " " << m.id << (m.white_box ? "(white-box)" : "(transfer)");
  out << " mean_snr_db\n";
  for (std::size_t e = 0; e < report.epsilons.size(); ++e) {
    out << num(report.epsilons[e]);
    for (const auto& m : report.models) out << " " << num(m.error[e]);
    out << " " << num(report.perturbation[e].mean_snr_db) << "\n";
  }
  out << "random_guess_error=" << num(report.random_guess_error) << " report=" << dst.string() << "\n";
}

void run_diagnose(Command& c, std::ostream& out) {
  const Settings& s = c.settings;
  diag::GradientProfile profile;
  const fs::path dst = c.out();
  if (!s.empty("model")) {
    const fs::path model_path = s.get("model");
    const fs::path in = required(s, "in");
    refuse_overwrite(dst, {model_path, in});
    const auto model = nn::load_checkpoint(model_path);
    profile = diag::input_gradient_profile(model, model_input(model, in), label_of(model, required(s, "label")));
  } else if (!s.empty("demo_steps")) {
    const auto demo = diag::contraction_rnn_demo(s.count("demo_steps"), s.real("spectral_norm"), s.u64("seed"),
                                                 s.count("hidden"));
    profile = demo.profile;
    out << "bound_constant=" << num(demo.bound_constant) << "\n";
  } else {
    throw UsageError("diagnose needs --model with --in and --label, or --demo-steps");
  }
  diag::save_profile(profile, dst);
  echo_config(c, sidecar(dst, ".config.txt"));
  try {
    out << "vanishing_ratio=" << num(diag::vanishing_ratio(profile, s.real("head_frac"), s.real("tail_frac")))
        << "\n";
  } catch (const diag::UndefinedRatio&) {
    out << "vanishing_ratio=undefined (no gradient in the tail window)\n";
  }
  out << "profile=" << dst.string() << " samples=" << profile.magnitudes.size() << "\n";
}

void run_spectrogram(Command& c, std::ostream& out) {
  const Settings& s = c.settings;
  const fs::path in = required(s, "in");
  const std::size_t window = s.count("window");
  const std::size_t hop = s.count("hop");
  const fs::path dst = c.out();
  std::vector<fs::path> inputs{in};
  if (!s.empty("minus")) inputs.emplace_back(s.get("minus"));
  refuse_overwrite(dst, inputs);
  auto spec = eval::spectrogram(data::load_wav(in), window, hop);
  if (inputs.size() == 2) spec = eval::spectrogram_diff(spec, eval::spectrogram(data::load_wav(inputs[1]), window, hop));
  eval::save_spectrogram(spec, dst);
  echo_config(c, sidecar(dst, ".config.txt"));
  double peak = 0.0;
  for (double v : spec.magnitude) peak = std::max(peak, std::fabs(v));
  out << "bins=" << spec.bins << " frames=" << spec.frames << " max_abs=" << num(peak) << " out=" << dst.string()
      << "\n";
}

void run_metrics(Command& c, std::ostream& out) {
  const Settings& s = c.settings;
  const auto x = data::load_wav(required(s, "original"));
  const auto adv = data::load_wav(required(s, "adversarial"));
  if (x.sample_rate != adv.sample_rate) throw UsageError("the two files have different sample rates");
  const auto pm = eval::perturbation_metrics(x, adv);
  const std::string text = key_values({{"linf", num(pm.linf)}, {"l2", num(pm.l2)}, {"snr_db", num(pm.snr_db)}});
  if (!s.empty("out")) {
    const fs::path dst = c.out();
    refuse_overwrite(dst, {s.get("original"), s.get("adversarial")});
    util::write_file_atomic(dst, text);
    echo_config(c, sidecar(dst, ".config.txt"));
  }
  out << text;
}

std::vector<std::pair<std::string, std::string>> with_common(std::vector<std::pair<std::string, std::string>> kv) {
  kv.emplace_back("out", "");
  return kv;
}

void define_commands(CLI::App& app, std::list<Command>& cmds) {
  const auto add = [&](std::string name, std::string help, Settings settings, std::string default_out,
                       bool out_is_dir, std::function<void(Command&, std::ostream&)> action) -> Command& {
    Command& c = cmds.emplace_back();
    c.name = name;
    c.app = app.add_subcommand(name, help);
    c.settings = std::move(settings);
    c.default_out = std::move(default_out);
    c.out_is_dir = out_is_dir;
    c.action = std::move(action);
    c.app->add_option("--config", c.config_path, "key=value file applied before --set and flags");
    c.app->add_option("--set", c.overrides, "key=value override, repeatable");
    c.flag("--out", "out", out_is_dir ? "output directory" : "output file");
    return c;
  };

  {
    auto& c = add("synth-data", "Generate a synthetic proxy dataset with a stratified split",
                  with_common({{"task", ""}, {"n", "200"}, {"seed", "0"}, {"sample_rate", "8000"},
                               {"clip_seconds", "1.2"}, {"snr_db", "20"}}),
                  "data", true, synth_data);
    c.flag("--task", "task", "gender_proxy, emotion_proxy or speaker_proxy");
    c.flag("--n", "n", "total number of examples");
    c.flag("--seed", "seed", "generation and split seed");
  }
  {
    std::vector<std::pair<std::string, std::string>> kv{
        {"data", ""},          {"kind", "wavecnn"},   {"preset", "desk"},     {"lr", "0.001"},
        {"lr_search", "false"}, {"lr_min", "1e-5"},   {"lr_max", "1e-2"},     {"max_epochs", "200"},
        {"batch_size", "100"}, {"lr_decay", "0.1"},   {"patience", "10"},     {"stop_lr", "1e-7"},
        {"search_budget", "5"}, {"probe_epochs", "2"}, {"jobs", "1"},          {"seed", "0"}};
    for (const auto& key : kModelKeys) kv.emplace_back(key, "");
    auto& c = add("train", "Train a WaveCNN or WaveRNN on a dataset manifest", with_common(std::move(kv)), "model",
                  true, train_model);
    c.flag("--data", "data", "dataset manifest");
    c.flag("--kind", "kind", "wavecnn or wavernn");
    c.flag("--seed", "seed", "initialization and shuffling seed");
    c.flag("--epochs", "max_epochs", "maximum number of epochs");
    c.flag("--lr", "lr", "initial learning rate");
    c.flag("--jobs", "jobs", "worker threads");
  }
  {
    auto& c = add("attack", "Craft an adversarial WAV with (iterative) FGSM",
                  with_common({{"model", ""}, {"in", ""}, {"label", ""}, {"epsilon", ""}, {"steps", "1"},
                               {"ball", ""}, {"clip_min", "0"}, {"clip_max", "1"}}),
                  "adv.wav", false, run_attack);
    c.flag("--model", "model", "checkpoint");
    c.flag("--in", "in", "input WAV");
    c.flag("--label", "label", "true label of the input");
    c.flag("--eps", "epsilon", "per-step perturbation");
    c.flag("--steps", "steps", "1 for FGSM, more for the iterative variant");
  }
  {
    std::string eps;
    for (double e : eval::default_epsilons()) eps += (eps.empty() ? "" : ",") + num(e);
    auto& c = add("sweep", "Error rate against perturbation size, white-box and transfer",
                  with_common({{"data", ""}, {"models", ""}, {"surrogate", ""}, {"epsilons", eps}, {"steps", "2"},
                               {"jobs", "1"}, {"seed", "0"}, {"split", "test"}}),
                  "report.json", false, run_sweep);
    c.flag("--data", "data", "dataset manifest");
    c.app->add_option("--model", c.model_args, "id=checkpoint, repeatable");
    c.flag("--surrogate", "surrogate", "id of the model that provides gradients (default: first)");
    c.flag("--eps", "epsilons", "comma-separated per-step epsilons");
    c.flag("--steps", "steps", "attack steps");
    c.flag("--jobs", "jobs", "worker threads");
  }
  {
    auto& c = add("diagnose", "Export the per-sample input-gradient profile",
                  with_common({{"model", ""}, {"in", ""}, {"label", ""}, {"demo_steps", ""}, {"spectral_norm", "0.5"},
                               {"hidden", "16"}, {"seed", "0"}, {"head_frac", "0.1"}, {"tail_frac", "0.1"}}),
                  "profile.txt", false, run_diagnose);
    c.flag("--model", "model", "checkpoint");
    c.flag("--in", "in", "input WAV");
    c.flag("--label", "label", "label whose loss is differentiated");
    c.flag("--demo-steps", "demo_steps", "profile a contraction RNN of this length instead of a model");
    c.flag("--spectral-norm", "spectral_norm", "recurrent spectral norm of the contraction RNN");
  }
  {
    auto& c = add("spectrogram", "Export an STFT magnitude matrix, or the difference of two",
                  with_common({{"in", ""}, {"minus", ""}, {"window", "512"}, {"hop", "128"}}), "spectrogram.txt",
                  false, run_spectrogram);
    c.flag("--in", "in", "WAV file");
    c.flag("--minus", "minus", "WAV file whose spectrogram is subtracted");
    c.flag("--window", "window", "window length in samples");
    c.flag("--hop", "hop", "hop in samples");
  }
  {
    auto& c = add("metrics", "Perturbation norms and SNR between two WAV files",
                  with_common({{"original", ""}, {"adversarial", ""}}), "", false, run_metrics);
    c.flag("--original", "original", "clean WAV");
    c.flag("--adversarial", "adversarial", "perturbed WAV");
  }
}

void resolve(Command& c) {
  if (!c.config_path.empty()) {
    std::string text;
    try {
      text = util::read_file(c.config_path);
    } catch (const IoError&) {
      throw UsageError("cannot read config file " + c.config_path);
    }
    c.settings.load_text(text, c.config_path);
  }
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    c.settings.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  for (const auto& [option, key] : c.flag_keys) {
    if (c.app->count(option) > 0) c.settings.set(key, c.flag_values[key]);
  }
  if (!c.model_args.empty()) {
    std::string joined;
    for (const auto& m : c.model_args) joined += (joined.empty() ? "" : ",") + m;
    c.settings.set("models", joined);
  }
  if (c.settings.empty("out") && !c.default_out.empty()) {
    c.settings.set("out", (default_output_root() / c.default_out).string());
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adversarial attacks on raw-waveform paralinguistic classifiers", "wavattack"};
  app.require_subcommand(1);
  std::list<Command> cmds;
  define_commands(app, cmds);
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  Command* selected = nullptr;
  for (auto& c : cmds) {
    if (c.app->parsed()) selected = &c;
  }
  try {
    resolve(*selected);
    selected->action(*selected, out);
  } catch (const UsageError& e) {
    err << "wavattack " << selected->name << ": " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    err << "wavattack " << selected->name << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "wavattack " << selected->name << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace wavattack::cli

#include "wavattack/data/dataset.hpp"

#include "wavattack/data/synth.hpp"
#include "wavattack/data/wav.hpp"
#include "wavattack/error.hpp"

namespace wavattack::data {

Dataset::Dataset(DatasetManifest manifest, std::vector<Waveform> waveforms)
    : manifest_(std::move(manifest)), waveforms_(std::move(waveforms)) {
  if (manifest_.entries.size() != waveforms_.size()) {
    throw ConfigError("manifest has " + std::to_string(manifest_.entries.size()) + " entries but " +
                      std::to_string(waveforms_.size()) + " waveforms were given");
  }
  for (const auto& e : manifest_.entries) manifest_.label_index(e.label);
  for (const auto& w : waveforms_) check_waveform(w);
}

Dataset Dataset::load(const std::filesystem::path& manifest_path) {
  DatasetManifest m = load_manifest(manifest_path);
  if (m.sample_rate == 0 || !(m.clip_seconds > 0.0)) {
    throw FormatError("manifest '" + manifest_path.string() + "' must declare sample_rate and clip_seconds");
  }
  const SynthConfig synth{m.sample_rate, m.clip_seconds};
  const auto base = manifest_path.parent_path();
  std::vector<Waveform> waves;
  waves.reserve(m.entries.size());
  for (const auto& e : m.entries) {
    if (is_generator_spec(e.source)) {
      waves.push_back(regenerate(e.source, synth));
    } else {
      const std::filesystem::path src(e.source);
      const std::filesystem::path p = src.is_absolute() ? src : base / src;
      waves.push_back(preprocess(load_wav(p), m.clip_seconds, m.sample_rate));
    }
  }
  return Dataset(std::move(m), std::move(waves));
}

LabeledSet Dataset::subset(Split split) const {
  LabeledSet out;
  for (std::size_t i : manifest_.ids(split)) {
    out.waveforms.push_back(waveforms_[i]);
    out.labels.push_back(manifest_.label_index(manifest_.entries[i].label));
  }
  return out;
}

TrainingData Dataset::training_data() const { return {subset(Split::Train), subset(Split::Val), labels()}; }

LabeledSet Dataset::test_set() const { return subset(Split::Test); }

}  // namespace wavattack::data

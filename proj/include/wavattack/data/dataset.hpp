#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "wavattack/data/manifest.hpp"
#include "wavattack/data/waveform.hpp"

namespace wavattack::data {

struct LabeledSet {
  std::vector<Waveform> waveforms;
  std::vector<std::size_t> labels;

  std::size_t size() const noexcept { return waveforms.size(); }
  bool empty() const noexcept { return waveforms.empty(); }
};

// What training is allowed to see. Test examples are not part of it.
struct TrainingData {
  LabeledSet train;
  LabeledSet val;
  std::vector<std::string> labels;
};

// A manifest together with the resolved, preprocessed waveforms.
class Dataset {
 public:
  Dataset(DatasetManifest manifest, std::vector<Waveform> waveforms);

  // Resolves every entry: generator specs are regenerated, WAV paths are read
  // relative to the manifest's directory and cut/padded to the clip length.
  static Dataset load(const std::filesystem::path& manifest_path);

  const DatasetManifest& manifest() const noexcept { return manifest_; }
  const std::vector<Waveform>& waveforms() const noexcept { return waveforms_; }
  const std::vector<std::string>& labels() const noexcept { return manifest_.labels; }

  TrainingData training_data() const;
  // Held-out test examples; kept out of training_data() on purpose.
  LabeledSet test_set() const;

 private:
  LabeledSet subset(Split split) const;

  DatasetManifest manifest_;
  std::vector<Waveform> waveforms_;
};

}  // namespace wavattack::data

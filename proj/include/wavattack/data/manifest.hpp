#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace wavattack::data {

enum class Split { Unassigned, Train, Val, Test };

std::string_view split_name(Split s);
Split parse_split(std::string_view s);

struct ManifestEntry {
  // WAV path (relative to the manifest directory) or a generator spec
  // "gen:<task>:<seed>:<class>:<index>".
  std::string source;
  std::string label;
  Split split = Split::Unassigned;
};

// Text format (UTF-8, one entry per line, tab separated):
//
//   # wavattack-manifest v1
//   # task=<task> seed=<n> sample_rate=<hz> clip_seconds=<s>
//   # labels=<l0>,<l1>,...
//   <source>\t<label>\t<train|val|test|unassigned>
struct DatasetManifest {
  std::string task;
  std::uint64_t seed = 0;
  std::uint32_t sample_rate = 0;
  double clip_seconds = 0.0;
  std::vector<std::string> labels;
  std::vector<ManifestEntry> entries;

  std::vector<std::size_t> ids(Split split) const;
  std::size_t label_index(std::string_view label) const;
};

std::string format_manifest(const DatasetManifest& m);
DatasetManifest parse_manifest(std::string_view text);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

struct SplitFractions {
  double train = 0.75;
  double val = 0.05;
  double test = 0.20;
};

// Stratified, seed-deterministic hold-out split. Global split sizes are the
// rounded fractions of the entry count; each class is within one example of
// its own fractional share. Throws if any class has fewer than 3 entries.
DatasetManifest split(DatasetManifest m, SplitFractions fractions, std::uint64_t seed);

}  // namespace wavattack::data

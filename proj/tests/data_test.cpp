#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "wavattack/data/dataset.hpp"
#include "wavattack/data/manifest.hpp"
#include "wavattack/data/synth.hpp"
#include "wavattack/data/wav.hpp"
#include "wavattack/error.hpp"
#include "wavattack/util/io.hpp"
#include "wavattack/util/numeric.hpp"

using namespace wavattack;
using namespace wavattack::data;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("wavattack_data_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Hand-assembled PCM WAV header with arbitrary format fields.
std::string raw_wav(std::uint16_t format, std::uint16_t channels, std::uint16_t bits,
                    const std::vector<std::int16_t>& samples) {
  std::string out;
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  auto u16 = [&](std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
  };
  const auto data = static_cast<std::uint32_t>(samples.size() * 2);
  out += "RIFF";
  u32(36 + data);
  out += "WAVEfmt ";
  u32(16);
  u16(format);
  u16(channels);
  u32(16000);
  u32(16000 * channels * bits / 8);
  u16(static_cast<std::uint16_t>(channels * bits / 8));
  u16(bits);
  out += "data";
  u32(data);
  for (auto s : samples) u16(static_cast<std::uint16_t>(s));
  return out;
}

// Energy of the DFT of (x - mean) over bins whose frequency lies in [lo, hi].
double band_energy(const std::vector<double>& x, double fs, double lo, double hi) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  const double n = static_cast<double>(x.size());
  double energy = 0.0;
  for (std::size_t k = static_cast<std::size_t>(std::ceil(lo * n / fs)); k * fs / n <= hi; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double ang = 2.0 * M_PI * static_cast<double>(k * i % x.size()) / n;
      re += (x[i] - mean) * std::cos(ang);
      im -= (x[i] - mean) * std::sin(ang);
    }
    energy += re * re + im * im;
  }
  return energy;
}

double mean_band_energy(const GeneratedDataset& d, std::size_t cls, double lo, double hi, bool envelope) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < d.waveforms.size(); ++i) {
    if (d.manifest.entries[i].label != d.manifest.labels[cls]) continue;
    std::vector<double> x = d.waveforms[i].samples;
    if (envelope) {
      for (double& v : x) v = (v - kSilence) * (v - kSilence);
    }
    total += band_energy(x, d.waveforms[i].sample_rate, lo, hi);
    ++count;
  }
  return total / static_cast<double>(count);
}

}  // namespace

TEST(Wav, MappingEndpoints) {
  EXPECT_EQ(pcm16_to_unit(-32768), 0.0);
  EXPECT_EQ(pcm16_to_unit(32767), 1.0);
  EXPECT_DOUBLE_EQ(pcm16_to_unit(0), 32768.0 / 65535.0);
  EXPECT_EQ(unit_to_pcm16(0.0), -32768);
  EXPECT_EQ(unit_to_pcm16(1.0), 32767);
}

TEST(Wav, AllZeroFileDecodesToMidpoint) {
  const Waveform w = decode_wav(raw_wav(1, 1, 16, std::vector<std::int16_t>(64, 0)));
  ASSERT_EQ(w.size(), 64u);
  EXPECT_EQ(w.sample_rate, 16000u);
  for (double s : w.samples) EXPECT_DOUBLE_EQ(s, 32768.0 / 65535.0);
}

TEST(Wav, RejectsUnsupportedFormatsNamingTheField) {
  auto expect_field = [](const std::string& bytes, const std::string& field) {
    try {
      decode_wav(bytes, "x.wav");
      FAIL() << "expected FormatError for " << field;
    } catch (const FormatError& e) {
      EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
    }
  };
  expect_field(raw_wav(1, 2, 16, {0, 0}), "num_channels");
  expect_field(raw_wav(1, 1, 8, {0}), "bits_per_sample");
  expect_field(raw_wav(3, 1, 16, {0}), "audio_format");
  EXPECT_THROW(decode_wav("not a wav file at all"), FormatError);
}

TEST(Wav, RoundTripWithinOneQuantizationStep) {
  util::Rng rng(1);
  const auto dir = temp_dir("roundtrip");
  for (int trial = 0; trial < 20; ++trial) {
    Waveform w{{}, 8000, "r"};
    for (int i = 0; i < 500; ++i) w.samples.push_back(rng.uniform());
    w.samples.push_back(0.0);
    w.samples.push_back(1.0);
    save_wav(w, dir / "r.wav");
    const Waveform back = load_wav(dir / "r.wav");
    ASSERT_EQ(back.size(), w.size());
    EXPECT_EQ(back.sample_rate, 8000u);
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_LE(std::fabs(back.samples[i] - w.samples[i]), 1.0 / 65535.0);
    // Grid values survive exactly.
    save_wav(back, dir / "r2.wav");
    EXPECT_EQ(load_wav(dir / "r2.wav").samples, back.samples);
  }
}

TEST(Wav, SaveRejectsOutOfRangeSamples) {
  Waveform w{{0.5, 1.2}, 8000, "bad"};
  EXPECT_THROW(encode_wav(w), ConfigError);
}

TEST(Preprocess, PadsShortUtteranceWithSilence) {
  Waveform w{std::vector<double>(static_cast<std::size_t>(4.46 * 16000), 0.25), 16000, "short"};
  ASSERT_EQ(w.size(), 71360u);
  const Waveform out = preprocess(w, 6.0, 16000);
  ASSERT_EQ(out.size(), 96000u);
  EXPECT_EQ(out.samples[71359], 0.25);
  for (std::size_t i = 71360; i < 96000; ++i) ASSERT_EQ(out.samples[i], kSilence);
}

TEST(Preprocess, TruncatesKeepingTheStart) {
  Waveform w{std::vector<double>(8 * 16000), 16000, "long"};
  for (std::size_t i = 0; i < w.size(); ++i) w.samples[i] = static_cast<double>(i) / static_cast<double>(w.size());
  const Waveform out = preprocess(w, 6.0, 16000);
  ASSERT_EQ(out.size(), 96000u);
  for (std::size_t i = 0; i < out.size(); ++i) ASSERT_EQ(out.samples[i], w.samples[i]);
}

TEST(Preprocess, ExactLengthIsUnchangedAndRateMustMatch) {
  Waveform w{std::vector<double>(96000, 0.7), 16000, "exact"};
  EXPECT_EQ(preprocess(w, 6.0, 16000).samples, w.samples);
  EXPECT_THROW(preprocess(w, 6.0, 8000), ConfigError);
}

TEST(Synth, SameSeedSameData) {
  const auto a = synth_dataset("emotion_proxy", 3, 7);
  const auto b = synth_dataset("emotion_proxy", 3, 7);
  EXPECT_EQ(format_manifest(a.manifest), format_manifest(b.manifest));
  for (std::size_t i = 0; i < a.waveforms.size(); ++i) EXPECT_EQ(a.waveforms[i].samples, b.waveforms[i].samples);
  const auto c = synth_dataset("emotion_proxy", 3, 8);
  EXPECT_NE(a.waveforms[0].samples, c.waveforms[0].samples);
}

TEST(Synth, GenderProxyIsClassBalanced) {
  const auto d = synth_dataset("gender_proxy", 100, 7);
  std::map<std::string, int> counts;
  for (const auto& e : d.manifest.entries) ++counts[e.label];
  EXPECT_EQ(counts["low"], 100);
  EXPECT_EQ(counts["high"], 100);
  EXPECT_EQ(d.waveforms.size(), 200u);
  EXPECT_EQ(d.waveforms[0].size(), 9600u);
}

TEST(Synth, EveryTaskStaysInRangeAndOnThePcmGrid) {
  for (const auto& task : task_names()) {
    const auto d = synth_dataset(task, 2, 3);
    for (const auto& w : d.waveforms) {
      check_waveform(w);
      Waveform q = w;
      quantize_pcm16(q);
      EXPECT_EQ(q.samples, w.samples);
    }
  }
  EXPECT_THROW(synth_dataset("music_proxy", 2, 3), ConfigError);
  EXPECT_THROW(synth_dataset("gender_proxy", 0, 3), ConfigError);
}

TEST(Synth, GeneratorSpecRegeneratesTheSameExample) {
  const Waveform w = synth_example("speaker_proxy", 2, 5, 99);
  EXPECT_EQ(regenerate(w.source_id, {}).samples, w.samples);
  EXPECT_THROW(regenerate("gen:speaker_proxy:x", {}), FormatError);
}

TEST(Synth, GenderClassesSeparateInTheF0Band) {
  const auto d = synth_dataset("gender_proxy", 8, 21);
  const double low_band_low = mean_band_energy(d, 0, 90, 150, false);
  const double low_band_high = mean_band_energy(d, 1, 90, 150, false);
  const double high_band_high = mean_band_energy(d, 1, 190, 260, false);
  const double high_band_low = mean_band_energy(d, 0, 190, 260, false);
  EXPECT_GE(low_band_low, 2.0 * low_band_high);
  EXPECT_GE(high_band_high, 2.0 * high_band_low);
}

TEST(Synth, EmotionClassesSeparateInTheEnvelopeBand) {
  const auto d = synth_dataset("emotion_proxy", 8, 21);
  EXPECT_GE(mean_band_energy(d, 0, 2, 4, true), 2.0 * mean_band_energy(d, 1, 2, 4, true));
  EXPECT_GE(mean_band_energy(d, 1, 8, 12, true), 2.0 * mean_band_energy(d, 0, 8, 12, true));
}

TEST(Synth, SpeakerClassesSeparateInTheirFormantBand) {
  const auto d = synth_dataset("speaker_proxy", 6, 21);
  const double f1[] = {300, 550, 800, 1100};
  for (std::size_t c = 0; c < 4; ++c) {
    const double own = mean_band_energy(d, c, f1[c] - 60, f1[c] + 60, false);
    for (std::size_t o = 0; o < 4; ++o) {
      if (o == c) continue;
      EXPECT_GE(own, 2.0 * mean_band_energy(d, o, f1[c] - 60, f1[c] + 60, false)) << c << " vs " << o;
    }
  }
}

TEST(Split, TwoHundredEntries) {
  auto d = synth_dataset("gender_proxy", 100, 7);
  const auto m = split(d.manifest, {}, 7);
  EXPECT_EQ(m.ids(Split::Train).size(), 150u);
  EXPECT_EQ(m.ids(Split::Val).size(), 10u);
  EXPECT_EQ(m.ids(Split::Test).size(), 40u);
  EXPECT_TRUE(m.ids(Split::Unassigned).empty());
}

TEST(Split, DeterministicStratifiedDisjointExhaustive) {
  util::Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    DatasetManifest m;
    m.labels = {"a", "b", "c", "d"};
    std::map<std::string, std::size_t> class_size;
    for (const auto& l : m.labels) {
      const std::size_t n = 3 + rng.below(60);
      class_size[l] = n;
      for (std::size_t i = 0; i < n; ++i) m.entries.push_back({l + std::to_string(i), l, Split::Unassigned});
    }
    const std::uint64_t seed = rng.below(1000);
    const auto s1 = split(m, {}, seed);
    const auto s2 = split(m, {}, seed);
    EXPECT_EQ(format_manifest(s1), format_manifest(s2));

    const double n = static_cast<double>(m.entries.size());
    EXPECT_LE(std::fabs(static_cast<double>(s1.ids(Split::Train).size()) - 0.75 * n), 1.0 + 1e-9);
    EXPECT_LE(std::fabs(static_cast<double>(s1.ids(Split::Val).size()) - 0.05 * n), 1.0 + 1e-9);
    EXPECT_LE(std::fabs(static_cast<double>(s1.ids(Split::Test).size()) - 0.20 * n), 1.0 + 1e-9);
    EXPECT_EQ(s1.ids(Split::Train).size() + s1.ids(Split::Val).size() + s1.ids(Split::Test).size(),
              m.entries.size());
    for (const auto& [label, size] : class_size) {
      std::size_t train = 0;
      for (std::size_t i : s1.ids(Split::Train)) train += s1.entries[i].label == label;
      EXPECT_LE(std::fabs(static_cast<double>(train) - 0.75 * static_cast<double>(size)), 1.0 + 1e-9) << label;
    }
  }
}

TEST(Split, RejectsTinyClassesAndBadFractions) {
  DatasetManifest m;
  m.labels = {"a", "b"};
  for (int i = 0; i < 5; ++i) m.entries.push_back({"a" + std::to_string(i), "a", Split::Unassigned});
  for (int i = 0; i < 2; ++i) m.entries.push_back({"b" + std::to_string(i), "b", Split::Unassigned});
  EXPECT_THROW(split(m, {}, 1), ConfigError);
  m.entries.push_back({"b2", "b", Split::Unassigned});
  EXPECT_NO_THROW(split(m, {}, 1));
  EXPECT_THROW(split(m, {0.5, 0.1, 0.1}, 1), ConfigError);
}

TEST(Manifest, FormatParseRoundTrip) {
  auto d = synth_dataset("speaker_proxy", 3, 4);
  const auto m = split(d.manifest, {}, 4);
  const auto back = parse_manifest(format_manifest(m));
  EXPECT_EQ(format_manifest(back), format_manifest(m));
  EXPECT_EQ(back.task, "speaker_proxy");
  EXPECT_EQ(back.seed, 4u);
  EXPECT_EQ(back.sample_rate, 8000u);
  EXPECT_DOUBLE_EQ(back.clip_seconds, 1.2);
  EXPECT_THROW(parse_manifest("a\tb\n"), FormatError);
  EXPECT_THROW(parse_manifest("# wavattack-manifest v1\n# labels=x\nf.wav\ty\ttrain\n"), ConfigError);
}

TEST(Dataset, LoadsWavEntriesAndGeneratorSpecs) {
  const auto dir = temp_dir("dataset");
  auto d = synth_dataset("gender_proxy", 4, 2);
  DatasetManifest m = d.manifest;
  // First half as WAV files, second half as generator specs.
  for (std::size_t i = 0; i < m.entries.size(); i += 2) {
    const std::string name = "clip" + std::to_string(i) + ".wav";
    save_wav(d.waveforms[i], dir / name);
    m.entries[i].source = name;
  }
  m = split(m, {}, 2);
  save_manifest(m, dir / "manifest.txt");
  const Dataset loaded = Dataset::load(dir / "manifest.txt");
  ASSERT_EQ(loaded.waveforms().size(), d.waveforms.size());
  for (std::size_t i = 0; i < d.waveforms.size(); ++i) EXPECT_EQ(loaded.waveforms()[i].samples, d.waveforms[i].samples);

  const TrainingData td = loaded.training_data();
  const LabeledSet test = loaded.test_set();
  EXPECT_EQ(td.train.size() + td.val.size() + test.size(), 8u);
  EXPECT_EQ(td.labels, (std::vector<std::string>{"low", "high"}));
}

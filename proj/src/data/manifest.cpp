#include "wavattack/data/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "wavattack/error.hpp"
#include "wavattack/util/io.hpp"
#include "wavattack/util/numeric.hpp"

namespace wavattack::data {

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    case Split::Unassigned: return "unassigned";
  }
  return "unassigned";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  if (s == "unassigned" || s.empty()) return Split::Unassigned;
  throw FormatError("unknown split '" + std::string(s) + "'");
}

std::vector<std::size_t> DatasetManifest::ids(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].split == s) out.push_back(i);
  }
  return out;
}

std::size_t DatasetManifest::label_index(std::string_view label) const {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw ConfigError("unknown label '" + std::string(label) + "'");
  return static_cast<std::size_t>(it - labels.begin());
}

std::string format_manifest(const DatasetManifest& m) {
  std::ostringstream out;
  out.precision(17);
  out << "# wavattack-manifest v1\n";
  out << "# task=" << m.task << " seed=" << m.seed << " sample_rate=" << m.sample_rate
      << " clip_seconds=" << m.clip_seconds << "\n";
  out << "# labels=";
  for (std::size_t i = 0; i < m.labels.size(); ++i) out << (i ? "," : "") << m.labels[i];
  out << "\n";
  for (const ManifestEntry& e : m.entries) {
    out << e.source << '\t' << e.label << '\t' << split_name(e.split) << '\n';
  }
  return out.str();
}

namespace {

std::vector<std::string> split_on(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

DatasetManifest parse_manifest(std::string_view text) {
  DatasetManifest m;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  bool saw_magic = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string_view body = std::string_view(line).substr(1);
      while (!body.empty() && body.front() == ' ') body.remove_prefix(1);
      if (body.starts_with("wavattack-manifest")) {
        saw_magic = true;
        continue;
      }
      std::istringstream fields{std::string(body)};
      std::string kv;
      while (fields >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = kv.substr(0, eq);
        const std::string value = kv.substr(eq + 1);
        try {
          if (key == "task") m.task = value;
          else if (key == "seed") m.seed = std::stoull(value);
          else if (key == "sample_rate") m.sample_rate = static_cast<std::uint32_t>(std::stoul(value));
          else if (key == "clip_seconds") m.clip_seconds = std::stod(value);
          else if (key == "labels") m.labels = split_on(value, ',');
        } catch (const std::logic_error&) {
          throw FormatError("manifest line " + std::to_string(lineno) + ": bad value for '" + key + "'");
        }
      }
      continue;
    }
    const auto cols = split_on(line, '\t');
    if (cols.size() < 2 || cols.size() > 3) {
      throw FormatError("manifest line " + std::to_string(lineno) + ": expected <source>\\t<label>[\\t<split>]");
    }
    m.entries.push_back({cols[0], cols[1], cols.size() == 3 ? parse_split(cols[2]) : Split::Unassigned});
  }
  if (!saw_magic) throw FormatError("missing '# wavattack-manifest v1' header");
  if (m.labels.empty()) {
    for (const auto& e : m.entries) {
      if (std::find(m.labels.begin(), m.labels.end(), e.label) == m.labels.end()) m.labels.push_back(e.label);
    }
  }
  for (const auto& e : m.entries) m.label_index(e.label);
  return m;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  util::write_file_atomic(path, format_manifest(m));
}

DatasetManifest load_manifest(const std::filesystem::path& path) { return parse_manifest(util::read_file(path)); }

namespace {

// Largest-remainder apportionment: per-class floors plus one extra for the
// classes with the biggest fractional parts until the global total is met.
std::vector<std::size_t> apportion(const std::vector<std::size_t>& class_sizes, double fraction,
                                   std::size_t total) {
  std::vector<std::size_t> out(class_sizes.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < class_sizes.size(); ++c) {
    const double exact = fraction * static_cast<double>(class_sizes[c]);
    out[c] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    assigned += out[c];
    remainders.emplace_back(exact - static_cast<double>(out[c]), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total && k < remainders.size(); ++k, ++assigned) {
    ++out[remainders[k].second];
  }
  return out;
}

// Grows an apportionment one unit at a time toward a larger fraction, always
// feeding the class furthest below its quota. Counts never shrink, so the
// difference to `base` is a valid per-class allotment for the next split.
std::vector<std::size_t> top_up(const std::vector<std::size_t>& class_sizes, std::vector<std::size_t> base,
                                double fraction, std::size_t total) {
  std::size_t assigned = 0;
  for (std::size_t v : base) assigned += v;
  for (; assigned < total; ++assigned) {
    std::size_t pick = class_sizes.size();
    double best = -1e300;
    for (std::size_t c = 0; c < class_sizes.size(); ++c) {
      if (base[c] >= class_sizes[c]) continue;
      const double deficit = fraction * static_cast<double>(class_sizes[c]) - static_cast<double>(base[c]);
      if (deficit > best + 1e-12) {
        best = deficit;
        pick = c;
      }
    }
    if (pick == class_sizes.size()) break;
    ++base[pick];
  }
  return base;
}

}  // namespace

DatasetManifest split(DatasetManifest m, SplitFractions f, std::uint64_t seed) {
  if (f.train < 0 || f.val < 0 || f.test < 0 || std::fabs(f.train + f.val + f.test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be non-negative and sum to 1");
  }
  std::vector<std::vector<std::size_t>> by_class(m.labels.size());
  for (std::size_t i = 0; i < m.entries.size(); ++i) by_class[m.label_index(m.entries[i].label)].push_back(i);
  std::vector<std::size_t> sizes;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (by_class[c].size() < 3) {
      throw ConfigError("class '" + m.labels[c] + "' has " + std::to_string(by_class[c].size()) +
                        " examples; need at least 3 to split");
    }
    sizes.push_back(by_class[c].size());
  }
  const auto n = static_cast<double>(m.entries.size());
  // Test first, then test+val cumulatively, so every split stays within one
  // example of its per-class quota and train takes the remainder.
  const auto n_test = apportion(sizes, f.test, static_cast<std::size_t>(std::llround(f.test * n)));
  const auto n_held = top_up(sizes, n_test, f.test + f.val,
                             static_cast<std::size_t>(std::llround((f.test + f.val) * n)));

  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto ids = by_class[c];
    auto rng = util::Rng::keyed({static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                                 static_cast<std::uint32_t>(c), 0x5b1du});
    rng.shuffle(ids);
    const std::size_t train = ids.size() - n_held[c];
    const std::size_t val = n_held[c] - n_test[c];
    for (std::size_t k = 0; k < ids.size(); ++k) {
      m.entries[ids[k]].split = k < train ? Split::Train : (k < train + val ? Split::Val : Split::Test);
    }
  }
  return m;
}

}  // namespace wavattack::data

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wavattack/error.hpp"

namespace wavattack::cli {

// Bad flags, unknown config keys or invalid values. Maps to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Effective key=value configuration of one subcommand. Only keys declared up
// front are accepted; later assignments override earlier ones, so the order
// is defaults, then the --config file, then --set, then dedicated flags.
class Settings {
 public:
  Settings() = default;
  Settings(std::vector<std::pair<std::string, std::string>> defaults);

  bool known(std::string_view key) const;
  void set(std::string_view key, std::string_view value);
  // One "key=value" per line; blank lines and '#' comments are skipped.
  void load_text(std::string_view text, std::string_view origin);

  const std::string& get(std::string_view key) const;
  bool empty(std::string_view key) const { return get(key).empty(); }
  double real(std::string_view key) const;
  std::size_t count(std::string_view key) const;
  std::uint64_t u64(std::string_view key) const;
  bool flag(std::string_view key) const;
  std::vector<std::string> list(std::string_view key) const;  // comma separated
  std::vector<double> reals(std::string_view key) const;

  std::string text() const;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

// Output root used when --out is not given: $WAVATTACK_OUT, or ./wavattack-out.
std::filesystem::path default_output_root();

// Runs one subcommand (args exclude the program name). Returns 0 on success,
// 2 on usage errors and 1 on runtime failures, with messages on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace wavattack::cli

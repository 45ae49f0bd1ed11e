#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace wavattack::util {

// Writes `bytes` to a sibling temp file, then renames it over `path`, so
// readers never observe a partially written artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Each index is handled
// exactly once; callers write results into per-index slots so the outcome
// does not depend on scheduling.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace wavattack::util

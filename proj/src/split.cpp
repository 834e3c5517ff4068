#include "rf/split.hpp"

#include <algorithm>
#include <random>

#include "rf/error.hpp"

namespace rf {

DatasetSplit split_dataset(std::vector<std::filesystem::path> paths, std::uint64_t seed) {
  if (paths.size() < 3) throw Error(Errc::TooFewFiles, "need at least 3 files to split");
  std::sort(paths.begin(), paths.end());
  std::mt19937_64 rng(seed);
  std::shuffle(paths.begin(), paths.end(), rng);

  const std::size_t n = paths.size();
  const std::size_t held = std::max<std::size_t>(1, (n * 15) / 100);
  const std::size_t train = n - 2 * held;

  DatasetSplit s;
  s.train.assign(paths.begin(), paths.begin() + static_cast<std::ptrdiff_t>(train));
  s.val.assign(paths.begin() + static_cast<std::ptrdiff_t>(train),
               paths.begin() + static_cast<std::ptrdiff_t>(train + held));
  s.test.assign(paths.begin() + static_cast<std::ptrdiff_t>(train + held), paths.end());
  return s;
}

std::vector<std::filesystem::path> list_fields(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec))
    throw Error(Errc::IoFailure, "not a directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".srf") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace rf

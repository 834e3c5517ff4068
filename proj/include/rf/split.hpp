#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace rf {

struct DatasetSplit {
  std::vector<std::filesystem::path> train;
  std::vector<std::filesystem::path> val;
  std::vector<std::filesystem::path> test;
};

/// 70/15/15 partition. Validation and test each get max(1, floor(0.15 n))
/// files, the remainder goes to training. Paths are sorted before the seeded
/// shuffle so the result depends only on the set of paths and the seed.
DatasetSplit split_dataset(std::vector<std::filesystem::path> paths, std::uint64_t seed);

/// Sorted *.srf files of a directory.
std::vector<std::filesystem::path> list_fields(const std::filesystem::path& dir);

}  // namespace rf

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fedcpu/learning.hpp"

namespace fedcpu {

/// Raw contents of an unsigned-byte IDX file.
struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;

  std::size_t count() const { return dims.empty() ? 0 : dims.front(); }
  std::size_t item_size() const;
};

IdxArray read_idx(const std::filesystem::path& path);
void write_idx(const std::filesystem::path& path, const IdxArray& array);

/// Pairs an image file with a label file; pixels are scaled to [0, 1].
/// max_samples = 0 keeps everything.
Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels,
                         std::size_t max_samples = 0);

}  // namespace fedcpu

#include "fedcpu/idx.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <string>

#include "fedcpu/errors.hpp"

namespace fedcpu {
namespace {

constexpr std::uint8_t kUnsignedByte = 0x08;

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error(path.string() + ": truncated IDX header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

}  // namespace

std::size_t IdxArray::item_size() const {
  std::size_t n = 1;
  for (std::size_t i = 1; i < dims.size(); ++i) n *= dims[i];
  return n;
}

IdxArray read_idx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open IDX file");
  unsigned char magic[4];
  if (!in.read(reinterpret_cast<char*>(magic), 4))
    throw std::runtime_error(path.string() + ": truncated IDX header");
  if (magic[0] != 0 || magic[1] != 0)
    throw std::runtime_error(path.string() + ": bad IDX magic");
  if (magic[2] != kUnsignedByte)
    throw std::runtime_error(path.string() + ": only unsigned-byte IDX data is supported");
  if (magic[3] == 0) throw std::runtime_error(path.string() + ": IDX file has no dimensions");
  IdxArray out;
  std::size_t total = 1;
  for (int i = 0; i < magic[3]; ++i) {
    out.dims.push_back(read_be32(in, path));
    total *= out.dims.back();
  }
  out.data.resize(total);
  if (!in.read(reinterpret_cast<char*>(out.data.data()), static_cast<std::streamsize>(total)))
    throw std::runtime_error(path.string() + ": IDX payload shorter than its header declares");
  return out;
}

void write_idx(const std::filesystem::path& path, const IdxArray& array) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  const char magic[4] = {0, 0, static_cast<char>(kUnsignedByte), static_cast<char>(array.dims.size())};
  out.write(magic, 4);
  for (std::uint32_t d : array.dims) write_be32(out, d);
  out.write(reinterpret_cast<const char*>(array.data.data()),
            static_cast<std::streamsize>(array.data.size()));
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels,
                         std::size_t max_samples) {
  const IdxArray img = read_idx(images);
  const IdxArray lab = read_idx(labels);
  if (img.dims.size() < 2) throw ConfigError(images.string() + ": expected at least 2 dimensions");
  if (lab.dims.size() != 1) throw ConfigError(labels.string() + ": expected a 1-d label file");
  if (img.count() != lab.count())
    throw ConfigError("IDX image count " + std::to_string(img.count()) + " != label count " +
                      std::to_string(lab.count()));
  std::size_t n = img.count();
  if (max_samples > 0) n = std::min(n, max_samples);
  const std::size_t d = img.item_size();

  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  out.labels.resize(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j)
      out.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          img.data[i * d + j] / 255.0;
    out.labels[i] = lab.data[i];
    max_label = std::max(max_label, out.labels[i]);
  }
  out.num_classes = std::max(2, max_label + 1);
  return out;
}

}  // namespace fedcpu

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "fedcpu/errors.hpp"
#include "fedcpu/idx.hpp"

using namespace fedcpu;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path p = fs::temp_directory_path() / ("fedcpu_idx_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                                  ::testing::UnitTest::GetInstance()->current_test_info()->name());
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Idx, RoundTrip) {
  const fs::path dir = temp_dir();
  IdxArray images{{3, 2, 2}, {0, 255, 51, 102, 1, 2, 3, 4, 10, 20, 30, 40}};
  IdxArray labels{{3}, {2, 0, 4}};
  write_idx(dir / "img", images);
  write_idx(dir / "lbl", labels);
  const IdxArray back = read_idx(dir / "img");
  EXPECT_EQ(back.dims, images.dims);
  EXPECT_EQ(back.data, images.data);
  EXPECT_EQ(back.count(), 3u);
  EXPECT_EQ(back.item_size(), 4u);

  const Dataset d = load_idx_dataset(dir / "img", dir / "lbl");
  EXPECT_EQ(d.size(), 3);
  EXPECT_EQ(d.feature_dim(), 4);
  EXPECT_EQ(d.num_classes, 5);
  EXPECT_EQ(d.labels, (std::vector<int>{2, 0, 4}));
  EXPECT_DOUBLE_EQ(d.features(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(d.features(0, 2), 0.2);

  const Dataset two = load_idx_dataset(dir / "img", dir / "lbl", 2);
  EXPECT_EQ(two.size(), 2);
  fs::remove_all(dir);
}

TEST(Idx, BadMagic) {
  const fs::path dir = temp_dir();
  {
    std::ofstream out(dir / "bad", std::ios::binary);
    out << "PK\x03\x04 not an idx file";
  }
  EXPECT_THROW(read_idx(dir / "bad"), std::runtime_error);
  EXPECT_THROW(read_idx(dir / "missing"), std::runtime_error);
  fs::remove_all(dir);
}

TEST(Idx, Truncated) {
  const fs::path dir = temp_dir();
  write_idx(dir / "img", IdxArray{{2, 3}, {1, 2, 3, 4, 5, 6}});
  fs::resize_file(dir / "img", fs::file_size(dir / "img") - 2);
  EXPECT_THROW(read_idx(dir / "img"), std::runtime_error);
  fs::remove_all(dir);
}

TEST(Idx, CountMismatchBetweenFiles) {
  const fs::path dir = temp_dir();
  write_idx(dir / "img", IdxArray{{2, 1}, {1, 2}});
  write_idx(dir / "lbl", IdxArray{{3}, {0, 1, 1}});
  EXPECT_THROW(load_idx_dataset(dir / "img", dir / "lbl"), ConfigError);
  fs::remove_all(dir);
}

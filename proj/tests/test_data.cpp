#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "impatient/data.hpp"
#include "impatient/error.hpp"
#include "impatient/synthetic.hpp"

using namespace impatient;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("impatient_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_bytes(const fs::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// Four 2x3 images and their labels, written byte by byte.
const std::vector<unsigned char> kImages = {
    0x00, 0x00, 0x08, 0x03,  // magic: u8, 3 dims
    0x00, 0x00, 0x00, 0x04,  // 4 images
    0x00, 0x00, 0x00, 0x02,  // 2 rows
    0x00, 0x00, 0x00, 0x03,  // 3 cols
    0,   255, 0,   0,   0,   0,    // image 0
    255, 255, 255, 255, 255, 255,  // image 1
    0,   51,  102, 153, 204, 255,  // image 2
    1,   2,   3,   4,   5,   6,    // image 3
};
const std::vector<unsigned char> kLabels = {
    0x00, 0x00, 0x08, 0x01,  // magic: u8, 1 dim
    0x00, 0x00, 0x00, 0x04,  // 4 labels
    7, 0, 2, 9,
};

}  // namespace

TEST(Idx, HandcraftedFixture) {
  const auto dir = temp_dir("idx_fixture");
  write_bytes(dir / "img", kImages);
  write_bytes(dir / "lab", kLabels);
  const Dataset d = load_idx((dir / "img").string(), (dir / "lab").string());
  EXPECT_EQ(d.size(), 4u);
  EXPECT_EQ(d.images.shape(), (Shape{4, 1, 2, 3}));
  EXPECT_EQ(d.labels, (std::vector<int>{7, 0, 2, 9}));
  EXPECT_EQ(d.num_classes, 10u);
  EXPECT_FLOAT_EQ(d.images[1], 1.0f);
  EXPECT_FLOAT_EQ(d.images[0], 0.0f);
  EXPECT_FLOAT_EQ(d.images[12 + 1], 0.2f);
  EXPECT_FLOAT_EQ(d.images[18 + 5], 6.0f / 255.0f);
  for (Split s : d.splits) EXPECT_EQ(s, Split::train);
  EXPECT_EQ(load_idx((dir / "img").string(), (dir / "lab").string(), 12).num_classes, 12u);
}

TEST(Idx, TruncatedFilesAreErrors) {
  const auto dir = temp_dir("idx_truncated");
  auto short_images = kImages;
  short_images.pop_back();
  write_bytes(dir / "img", short_images);
  write_bytes(dir / "lab", kLabels);
  EXPECT_THROW(load_idx((dir / "img").string(), (dir / "lab").string()), IoError);
  write_bytes(dir / "img", kImages);
  auto short_labels = kLabels;
  short_labels.pop_back();
  write_bytes(dir / "lab", short_labels);
  EXPECT_THROW(load_idx((dir / "img").string(), (dir / "lab").string()), IoError);
  write_bytes(dir / "lab", std::vector<unsigned char>(kLabels.begin(), kLabels.begin() + 6));
  EXPECT_THROW(load_idx((dir / "img").string(), (dir / "lab").string()), IoError);
}

TEST(Idx, OtherErrors) {
  const auto dir = temp_dir("idx_errors");
  write_bytes(dir / "img", kImages);
  write_bytes(dir / "lab", kLabels);
  EXPECT_THROW(load_idx((dir / "img").string(), (dir / "lab").string(), 9), IoError);
  EXPECT_THROW(load_idx((dir / "lab").string(), (dir / "lab").string()), IoError);
  EXPECT_THROW(load_idx((dir / "missing").string(), (dir / "lab").string()), IoError);
  auto more = kLabels;
  more[7] = 5;
  more.push_back(1);
  write_bytes(dir / "lab5", more);
  EXPECT_THROW(load_idx((dir / "img").string(), (dir / "lab5").string()), IoError);
}

TEST(Idx, WriteRoundTrip) {
  const auto dir = temp_dir("idx_roundtrip");
  write_bytes(dir / "img", kImages);
  write_bytes(dir / "lab", kLabels);
  const Dataset d = load_idx((dir / "img").string(), (dir / "lab").string());
  write_idx((dir / "img2").string(), (dir / "lab2").string(), d);
  std::ifstream a(dir / "img2", std::ios::binary), b(dir / "lab2", std::ios::binary);
  const std::vector<unsigned char> img((std::istreambuf_iterator<char>(a)), {});
  const std::vector<unsigned char> lab((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(img, kImages);
  EXPECT_EQ(lab, kLabels);
}

TEST(Csv, LoadsRows) {
  const auto dir = temp_dir("csv");
  std::ofstream(dir / "d.csv") << "1,0.5,0.25,0,1\n0,1,1,1,1\n";
  const Dataset d = load_csv((dir / "d.csv").string(), {1, 2, 2});
  EXPECT_EQ(d.images.shape(), (Shape{2, 1, 2, 2}));
  EXPECT_EQ(d.labels, (std::vector<int>{1, 0}));
  EXPECT_FLOAT_EQ(d.images[1], 0.25f);
  std::ofstream(dir / "bad.csv") << "1,0.5,0.25\n";
  EXPECT_THROW(load_csv((dir / "bad.csv").string(), {1, 2, 2}), IoError);
  std::ofstream(dir / "nan.csv") << "1,0.5,x,0,1\n";
  EXPECT_THROW(load_csv((dir / "nan.csv").string(), {1, 2, 2}), IoError);
}

TEST(StratifiedSplit, NinetyTenPerClass) {
  SyntheticConfig cfg;
  cfg.per_class = 100;
  cfg.image_size = 8;
  const Dataset d = generate_scale_cues(cfg);
  const Dataset s = stratified_split(d, {0.9, 0.1}, 4);
  std::map<int, std::pair<int, int>> counts;
  for (std::size_t i = 0; i < s.size(); ++i) {
    (s.splits[i] == Split::train ? counts[s.labels[i]].first : counts[s.labels[i]].second)++;
  }
  ASSERT_EQ(counts.size(), 10u);
  for (const auto& [label, c] : counts) {
    EXPECT_EQ(c.first, 90);
    EXPECT_EQ(c.second, 10);
  }
  EXPECT_EQ(stratified_split(d, {0.9, 0.1}, 4).splits, s.splits);
  EXPECT_NE(stratified_split(d, {0.9, 0.1}, 5).splits, s.splits);
  const Dataset all = stratified_split(d, {1.0}, 4);
  EXPECT_EQ(all.indices(Split::train).size(), d.size());
  EXPECT_EQ(s.select(Split::val).size(), 100u);
}

TEST(StratifiedSplit, LargestRemainderAndErrors) {
  SyntheticConfig cfg;
  cfg.per_class = 7;
  cfg.image_size = 8;
  const Dataset d = generate_scale_cues(cfg);
  const Dataset s = stratified_split(d, {0.5, 0.25, 0.25}, 1);
  // 7 * (.5, .25, .25) = (3.5, 1.75, 1.75) -> (3, 2, 2)
  EXPECT_EQ(s.indices(Split::train).size(), 30u);
  EXPECT_EQ(s.indices(Split::val).size(), 20u);
  EXPECT_EQ(s.indices(Split::test).size(), 20u);
  EXPECT_THROW(stratified_split(d, {0.5, 0.4}, 1), ConfigError);
  EXPECT_THROW(stratified_split(d, {0.25, 0.25, 0.25, 0.25}, 1), ConfigError);
  cfg.per_class = 1;
  EXPECT_THROW(stratified_split(generate_scale_cues(cfg), {0.9, 0.1}, 1), ConfigError);
}

TEST(Normalization, UsesTrainSplitOnly) {
  Dataset d;
  d.num_classes = 2;
  d.images = Tensor({3, 1, 1, 2}, std::vector<float>{0, 2, 2, 4, 100, 100});
  d.labels = {0, 1, 0};
  d.splits = {Split::train, Split::train, Split::test};
  const Normalization n = fit_normalization(d);
  EXPECT_FLOAT_EQ(n.mean[0], 2.0f);
  EXPECT_FLOAT_EQ(n.stddev[0], std::sqrt(2.0f));
  apply_normalization(d, n);
  EXPECT_FLOAT_EQ(d.images[0], -std::sqrt(2.0f));
  Tensor wrong({1, 2, 1, 1});
  EXPECT_THROW(apply_normalization(wrong, n), ShapeError);
}

TEST(Synthetic, ShapeBalanceRangeAndDeterminism) {
  SyntheticConfig cfg;
  cfg.per_class = 12;
  const Dataset a = generate_scale_cues(cfg), b = generate_scale_cues(cfg);
  EXPECT_EQ(a.images, b.images);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.images.shape(), (Shape{120, 1, 16, 16}));
  EXPECT_EQ(a.num_classes, kSyntheticClasses);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.labels[i], static_cast<int>(i % 10));
  for (float v : a.images.values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  cfg.seed = 2;
  EXPECT_FALSE(generate_scale_cues(cfg).images == a.images);
  EXPECT_NO_THROW(a.validate());
}

TEST(Synthetic, CoarseClassesDifferInHalves) {
  SyntheticConfig cfg;
  cfg.per_class = 40;
  cfg.noise = 0.0;
  cfg.distractors = 0;
  const Dataset d = generate_scale_cues(cfg);
  // Class 0 is bright on the left, class 1 on the right.
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.labels[i] > 1) continue;
    double left = 0.0, right = 0.0;
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x) (x < 8 ? left : right) += d.images[i * 256 + y * 16 + x];
    if (d.labels[i] == 0) EXPECT_GT(left, right);
    else EXPECT_GT(right, left);
  }
}

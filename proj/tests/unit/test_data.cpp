#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>
#include <opencv2/imgcodecs.hpp>

#include "liss/data.hpp"
#include "liss/errors.hpp"

using namespace liss;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name) {
  auto p = fs::temp_directory_path() / ("liss_data_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_png(const fs::path &file, int size, int value) {
  fs::create_directories(file.parent_path());
  cv::Mat m(size, size, CV_8UC3, cv::Scalar(value, value / 2, 255 - value));
  cv::imwrite(file.string(), m);
}

void write_depth(const fs::path &file, int size) {
  fs::create_directories(file.parent_path());
  cv::Mat m(size, size, CV_16UC1);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) m.at<std::uint16_t>(r, c) = static_cast<std::uint16_t>(r * 100);
  cv::imwrite(file.string(), m);
}

SynthConfig small_synth() {
  SynthConfig cfg;
  cfg.count_per_domain = 20;
  cfg.image_size = 24;
  return cfg;
}

} // namespace

TEST(ByteCodes, RoundTrip) {
  auto bytes = torch::arange(256, torch::kLong).to(torch::kUInt8);
  auto unit = to_unit_range(bytes);
  EXPECT_NEAR(unit.min().item<double>(), -1.0, 1e-7);
  EXPECT_NEAR(unit.max().item<double>(), 1.0, 1e-7);
  EXPECT_TRUE(torch::equal(to_bytes(unit), bytes));
}

TEST(Loading, DecodesRgbOrderAndRange) {
  auto dir = scratch("decode");
  cv::Mat m(4, 4, CV_8UC3, cv::Scalar(0, 0, 255)); // BGR: pure red
  cv::imwrite((dir / "r.png").string(), m);
  auto t = load_image(dir / "r.png", 4);
  EXPECT_EQ(t.sizes(), (std::vector<int64_t>{3, 4, 4}));
  EXPECT_NEAR(t[0].mean().item<double>(), 1.0, 1e-6);
  EXPECT_NEAR(t[2].mean().item<double>(), -1.0, 1e-6);
  EXPECT_EQ(load_image(dir / "r.png", 8).size(1), 8);
  {
    std::ofstream(dir / "junk.png") << "not an image";
  }
  EXPECT_THROW(load_image(dir / "junk.png", 4), DatasetError);
  fs::remove_all(dir);
}

TEST(Loading, DepthIsNormalised) {
  auto dir = scratch("depth");
  write_depth(dir / "d.png", 8);
  auto d = load_depth(dir / "d.png", 8);
  EXPECT_EQ(d.sizes(), (std::vector<int64_t>{1, 8, 8}));
  EXPECT_NEAR(d.min().item<double>(), 0.0, 1e-6);
  EXPECT_NEAR(d.max().item<double>(), 1.0, 1e-6);
  fs::remove_all(dir);
}

TEST(Loading, FlatDirectorySplitIsSeededAndDisjoint) {
  auto root = scratch("flat");
  for (int i = 0; i < 20; ++i) {
    write_png(root / "A" / ("a" + std::to_string(i) + ".png"), 8, i * 10);
    write_png(root / "B" / ("b" + std::to_string(i) + ".png"), 8, 255 - i * 10);
  }
  LoadOptions opt;
  opt.image_size = 8;
  opt.seed = 3;
  auto ds = load_unpaired_dataset(root / "A", root / "B", std::nullopt, opt);
  EXPECT_EQ(ds.val[0].size(), 2);
  EXPECT_EQ(ds.train[0].size(), 18);
  std::set<std::string> all(ds.train[0].stems.begin(), ds.train[0].stems.end());
  for (const auto &s : ds.val[0].stems) EXPECT_TRUE(all.insert(s).second);
  EXPECT_EQ(all.size(), 20u);
  auto again = load_unpaired_dataset(root / "A", root / "B", std::nullopt, opt);
  EXPECT_EQ(again.val[0].stems, ds.val[0].stems);
  EXPECT_FALSE(ds.train[0].depth.defined());
  fs::remove_all(root);
}

TEST(Loading, TrainValSubdirectoriesRespected) {
  auto root = scratch("sub");
  for (auto d : {"A", "B"}) {
    for (int i = 0; i < 3; ++i) write_png(root / d / "train" / (std::to_string(i) + ".png"), 8, 40);
    write_png(root / d / "val" / "v.png", 8, 90);
  }
  LoadOptions opt;
  opt.image_size = 8;
  auto ds = load_unpaired_dataset(root / "A", root / "B", std::nullopt, opt);
  EXPECT_EQ(ds.train[1].size(), 3);
  EXPECT_EQ(ds.val[1].stems, std::vector<std::string>{"v"});
  fs::remove_all(root);
}

TEST(Loading, MissingDepthLabelMarked) {
  auto root = scratch("missing");
  for (int i = 0; i < 4; ++i) {
    write_png(root / "A" / (std::to_string(i) + ".png"), 8, 10);
    write_png(root / "B" / (std::to_string(i) + ".png"), 8, 10);
    write_depth(root / "depth" / "depth_A" / (std::to_string(i) + ".png"), 8);
    if (i != 2) write_depth(root / "depth" / "depth_B" / (std::to_string(i) + ".png"), 8);
  }
  LoadOptions opt;
  opt.image_size = 8;
  opt.split_fraction = 0.25;
  auto ds = load_unpaired_dataset(root / "A", root / "B", root / "depth", opt);
  EXPECT_TRUE(ds.train[0].depth.defined());
  try {
    ds.require_depth();
    FAIL() << "expected DatasetError";
  } catch (const DatasetError &e) {
    EXPECT_NE(std::string(e.what()).find("B/2"), std::string::npos) << e.what();
  }
  fs::remove_all(root);
}

TEST(Loading, MissingDirectory) {
  LoadOptions opt;
  EXPECT_THROW(load_unpaired_dataset("/nonexistent/a", "/nonexistent/b", std::nullopt, opt),
               DatasetError);
}

TEST(Synthetic, DeterministicPerSeed) {
  auto a = synth_generate(small_synth());
  auto b = synth_generate(small_synth());
  EXPECT_TRUE(torch::equal(a.data.train[0].images, b.data.train[0].images));
  EXPECT_TRUE(torch::equal(a.data.val[1].depth, b.data.val[1].depth));
  auto cfg = small_synth();
  cfg.seed = 1;
  EXPECT_FALSE(torch::equal(a.data.train[0].images, synth_generate(cfg).data.train[0].images));
}

TEST(Synthetic, SplitSizesAndRanges) {
  auto s = synth_generate(small_synth());
  for (auto d : kDomains) {
    EXPECT_EQ(s.data.train_split(d).size(), 18);
    EXPECT_EQ(s.data.val_split(d).size(), 2);
    EXPECT_LE(s.data.train_split(d).images.abs().max().item<double>(), 1.0);
    EXPECT_GE(s.data.train_split(d).depth.min().item<double>(), 0.0);
    EXPECT_LE(s.data.train_split(d).depth.max().item<double>(), 1.0);
    EXPECT_EQ(s.train_scenes[static_cast<int>(d)].size(), 18u);
  }
  EXPECT_NO_THROW(s.data.require_depth());
}

TEST(Synthetic, NearerShapeOccludesAndIsShallower) {
  SynthScene scene;
  scene.domain = Domain::B;
  SynthShape far{0.5, 0.5, 0.3, {-1, 0, 1}, 6.0};
  SynthShape near{0.5, 0.5, 0.1, {-0.5, 0.5, 0.5}, 2.0};
  scene.shapes = {near, far};
  auto [img, depth] = render_scene(scene, 20);
  // centre pixel belongs to the nearer shape in both image and depth
  EXPECT_NEAR(img[1][10][10].item<double>(), 0.5, 1e-6);
  EXPECT_NEAR(depth[0][10][10].item<double>(), 1.0, 1e-6);
  // far shape ring sits between background (0) and the near shape
  const double ring = depth[0][10][4].item<double>();
  EXPECT_GT(ring, 0.0);
  EXPECT_LT(ring, 1.0);
  EXPECT_NEAR(depth[0][0][0].item<double>(), 0.0, 1e-6);
}

TEST(Synthetic, EmptySceneHasZeroDepth) {
  SynthScene scene;
  scene.vertical = 0.8;
  auto [img, depth] = render_scene(scene, 8);
  EXPECT_EQ(depth.abs().max().item<double>(), 0.0);
  // brighter at the top
  EXPECT_GT(img[1][0].mean().item<double>(), img[1][7].mean().item<double>());
}

TEST(Synthetic, DomainsDiffer) {
  auto s = synth_generate(small_synth());
  for (const auto &sc : s.train_scenes[0])
    for (const auto &sh : sc.shapes) EXPECT_GT(sh.color[0], sh.color[2]);
  for (const auto &sc : s.train_scenes[1])
    for (const auto &sh : sc.shapes) EXPECT_LT(sh.color[0], sh.color[2]);
}

TEST(Batching, EpochCoversEveryImageOnce) {
  auto s = synth_generate(small_synth());
  BatchIterator it(s.data, 4, 9);
  EXPECT_EQ(it.batches_per_epoch(), 4);
  std::multiset<int64_t> seen;
  for (int k = 0; k < 4; ++k) {
    auto b = it.next();
    EXPECT_EQ(b.epoch, 0);
    EXPECT_EQ(b.a.size(0), 4);
    EXPECT_EQ(b.depth_b.size(1), 1);
    seen.insert(b.index_a.begin(), b.index_a.end());
  }
  EXPECT_EQ(seen.size(), 16u);
  EXPECT_EQ(std::set<int64_t>(seen.begin(), seen.end()).size(), 16u);
  EXPECT_EQ(it.next().epoch, 1);
}

TEST(Batching, BatchMatchesIndices) {
  auto s = synth_generate(small_synth());
  BatchIterator it(s.data, 3, 1);
  auto b = it.next();
  for (int k = 0; k < 3; ++k)
    EXPECT_TRUE(torch::equal(b.b[k], s.data.train[1].images[b.index_b[static_cast<std::size_t>(k)]]));
}

TEST(Batching, DeterministicPerSeed) {
  auto s = synth_generate(small_synth());
  BatchIterator x(s.data, 5, 4), y(s.data, 5, 4);
  for (int k = 0; k < 6; ++k) EXPECT_EQ(x.next().index_a, y.next().index_a);
}

TEST(Batching, OversizedBatchRejected) {
  auto s = synth_generate(small_synth());
  EXPECT_THROW(BatchIterator(s.data, 19, 0), ConfigError);
  EXPECT_THROW(BatchIterator(s.data, 0, 0), ConfigError);
}

TEST(Batching, RandomCropSharedWithDepth) {
  auto s = synth_generate(small_synth());
  auto ds = s.data;
  ds.image_size = 16;
  BatchIterator it(ds, 2, 0);
  auto b = it.next();
  EXPECT_EQ(b.a.size(2), 16);
  EXPECT_EQ(b.depth_a.size(3), 16);
  // locate the crop window by brute force and check depth uses the same one
  auto full = ds.train[0].images[b.index_a[0]];
  auto full_d = ds.train[0].depth[b.index_a[0]];
  bool found = false;
  for (int r = 0; r <= 8 && !found; ++r)
    for (int c = 0; c <= 8 && !found; ++c)
      if (torch::equal(full.narrow(1, r, 16).narrow(2, c, 16), b.a[0])) {
        found = true;
        EXPECT_TRUE(torch::equal(full_d.narrow(1, r, 16).narrow(2, c, 16), b.depth_a[0]));
      }
  EXPECT_TRUE(found);
}

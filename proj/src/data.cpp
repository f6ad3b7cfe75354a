#include "liss/data.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <set>

#include <ATen/CPUGeneratorImpl.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "liss/errors.hpp"
#include "liss/tasks.hpp"

namespace fs = std::filesystem;

namespace liss {

namespace {

const std::set<std::string> kImageExtensions = {".png", ".jpg", ".jpeg", ".bmp", ".ppm"};
const std::vector<std::string> kDepthExtensions = {".png", ".pgm", ".pfm", ".tif", ".tiff"};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

torch::Tensor mat_to_tensor(const cv::Mat &m) {
  // m is CV_32FC(c), HxW; returns a c x H x W tensor.
  cv::Mat cont = m.isContinuous() ? m : m.clone();
  auto t = torch::from_blob(cont.data, {cont.rows, cont.cols, cont.channels()}, torch::kFloat32);
  return t.permute({2, 0, 1}).contiguous().clone();
}

struct SplitFiles {
  std::vector<fs::path> train, val;
};

SplitFiles split_domain(const fs::path &root, const LoadOptions &opt, std::uint64_t salt) {
  if (!fs::is_directory(root)) throw DatasetError("dataset directory " + root.string() + " not found");
  SplitFiles out;
  if (fs::is_directory(root / "train")) {
    out.train = list_images(root / "train");
    if (fs::is_directory(root / "val")) out.val = list_images(root / "val");
  } else {
    out.train = list_images(root);
  }
  if (out.train.empty()) throw DatasetError("no images in " + root.string());
  if (!out.val.empty()) return out;

  const auto n = static_cast<std::int64_t>(out.train.size());
  auto n_val = static_cast<std::int64_t>(std::llround(static_cast<double>(n) * opt.split_fraction));
  if (opt.split_fraction > 0.0 && n >= 2) n_val = std::clamp<std::int64_t>(n_val, 1, n - 1);
  if (n_val == 0) throw DatasetError("validation split of " + root.string() + " is empty");

  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(opt.seed, salt));
  shuffle(order, rng);
  std::vector<std::int64_t> val_idx(order.begin(), order.begin() + n_val);
  std::vector<std::int64_t> train_idx(order.begin() + n_val, order.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::vector<fs::path> all = std::move(out.train);
  out.train.clear();
  for (auto i : train_idx) out.train.push_back(all[static_cast<std::size_t>(i)]);
  for (auto i : val_idx) out.val.push_back(all[static_cast<std::size_t>(i)]);
  return out;
}

std::optional<fs::path> find_depth(const std::optional<fs::path> &depth_dir, Domain d,
                                   const std::string &stem) {
  if (!depth_dir) return std::nullopt;
  const auto dir = *depth_dir / ("depth_" + std::string(domain_name(d)));
  for (const auto &ext : kDepthExtensions) {
    auto p = dir / (stem + ext);
    if (fs::exists(p)) return p;
  }
  return std::nullopt;
}

DomainSplit load_split(const std::vector<fs::path> &files, Domain d, int size,
                       const std::optional<fs::path> &depth_dir) {
  DomainSplit split;
  std::vector<torch::Tensor> images, depths;
  bool any_depth = false;
  for (const auto &f : files) {
    images.push_back(load_image(f, size));
    const auto stem = f.stem().string();
    split.stems.push_back(stem);
    auto depth_file = find_depth(depth_dir, d, stem);
    if (depth_file) {
      depths.push_back(load_depth(*depth_file, size));
      any_depth = true;
    } else {
      if (depth_dir)
        std::cerr << "warning: no depth label for " << domain_name(d) << "/" << stem << "\n";
      depths.push_back(torch::zeros({1, size, size}));
    }
    split.has_depth.push_back(depth_file.has_value());
  }
  split.images = torch::stack(images);
  if (any_depth) split.depth = torch::stack(depths);
  return split;
}

} // namespace

std::optional<std::string> DomainSplit::first_missing_depth() const {
  for (std::size_t i = 0; i < has_depth.size(); ++i)
    if (!has_depth[i]) return stems[i];
  return std::nullopt;
}

void UnpairedDataset::require_depth() const {
  for (auto d : kDomains) {
    for (const auto *split : {&train_split(d), &val_split(d)}) {
      if (auto stem = split->first_missing_depth())
        throw DatasetError("depth task enabled but image " + std::string(domain_name(d)) + "/" +
                           *stem + " has no depth label");
    }
  }
}

std::vector<fs::path> list_images(const fs::path &dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto &e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && kImageExtensions.count(lower(e.path().extension().string())))
      out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

torch::Tensor load_image(const fs::path &file, int size) {
  cv::Mat bgr = cv::imread(file.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw DatasetError("cannot decode image " + file.string());
  cv::Mat rgb, resized, as_float;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  if (rgb.rows != size || rgb.cols != size)
    cv::resize(rgb, resized, cv::Size(size, size), 0, 0, cv::INTER_LINEAR);
  else
    resized = rgb;
  resized.convertTo(as_float, CV_32F);
  return to_unit_range(mat_to_tensor(as_float));
}

torch::Tensor load_depth(const fs::path &file, int size) {
  cv::Mat raw = cv::imread(file.string(), cv::IMREAD_ANYDEPTH | cv::IMREAD_GRAYSCALE);
  if (raw.empty()) throw DatasetError("cannot decode depth map " + file.string());
  cv::Mat as_float, resized;
  raw.convertTo(as_float, CV_32F);
  if (as_float.rows != size || as_float.cols != size)
    cv::resize(as_float, resized, cv::Size(size, size), 0, 0, cv::INTER_LINEAR);
  else
    resized = as_float;
  return normalize_depth(mat_to_tensor(resized));
}

torch::Tensor to_unit_range(const torch::Tensor &bytes) {
  return bytes.to(torch::kFloat32) / 127.5 - 1.0;
}

torch::Tensor to_bytes(const torch::Tensor &image) {
  return ((image.clamp(-1.0, 1.0) + 1.0) * 127.5).round().to(torch::kUInt8);
}

UnpairedDataset load_unpaired_dataset(const fs::path &path_a, const fs::path &path_b,
                                      const std::optional<fs::path> &depth_dir,
                                      const LoadOptions &opt) {
  if (opt.image_size < 1) throw ConfigError("image size must be positive");
  if (!(opt.split_fraction >= 0.0 && opt.split_fraction < 1.0))
    throw ConfigError("split fraction must lie in [0,1)");
  const int stored = opt.random_crop ? std::max(opt.load_size, opt.image_size) : opt.image_size;

  UnpairedDataset ds;
  ds.image_size = opt.image_size;
  ds.stored_size = stored;
  const fs::path roots[2] = {path_a, path_b};
  for (auto d : kDomains) {
    const int i = static_cast<int>(d);
    const auto files = split_domain(roots[i], opt, static_cast<std::uint64_t>(i));
    ds.train[i] = load_split(files.train, d, stored, depth_dir);
    ds.val[i] = load_split(files.val, d, opt.image_size, depth_dir);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// synthetic data

SynthScene sample_scene(Domain domain, const SynthConfig &cfg, Rng &rng) {
  SynthScene s;
  s.domain = domain;
  for (double &c : s.base) c = uniform(rng, -0.4, 0.4);
  s.vertical = uniform(rng, cfg.vertical_min, cfg.vertical_max);
  s.horizontal = uniform(rng, cfg.horizontal_min, cfg.horizontal_max);
  if (uniform01(rng) < cfg.empty_probability) return s;
  const auto n = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cfg.max_shapes)));
  for (int k = 0; k < n; ++k) {
    SynthShape sh;
    sh.extent = uniform(rng, cfg.min_extent, cfg.max_extent);
    sh.cx = uniform(rng, sh.extent, 1.0 - sh.extent);
    sh.cy = uniform(rng, sh.extent, 1.0 - sh.extent);
    sh.distance = uniform(rng, kNearestShapeDistance, kFarthestShapeDistance);
    if (domain == Domain::A) {
      sh.color[0] = uniform(rng, 0.5, 1.0);
      sh.color[1] = uniform(rng, -0.2, 0.5);
      sh.color[2] = uniform(rng, -1.0, -0.4);
    } else {
      sh.color[0] = uniform(rng, -1.0, -0.4);
      sh.color[1] = uniform(rng, -0.2, 0.5);
      sh.color[2] = uniform(rng, 0.5, 1.0);
    }
    s.shapes.push_back(sh);
  }
  return s;
}

std::pair<torch::Tensor, torch::Tensor> render_scene(const SynthScene &scene, int size) {
  auto opts = torch::TensorOptions().dtype(torch::kFloat64);
  auto coords = (torch::arange(size, opts) + 0.5) / static_cast<double>(size);
  auto v = coords.view({size, 1}).expand({size, size}); // row position, 0 at the top
  auto u = coords.view({1, size}).expand({size, size}); // column position, 0 at the left

  // Brighter at the top, redder on the right and bluer on the left: a fixed
  // orientation so that rotations and tile positions are identifiable.
  const double tilt[3] = {1.0, 0.0, -1.0};
  std::vector<torch::Tensor> channels;
  for (int c = 0; c < 3; ++c)
    channels.push_back(scene.base[c] + scene.vertical * (0.5 - v) + scene.horizontal * tilt[c] * (u - 0.5));
  auto image = torch::stack(channels);
  auto inv_depth = torch::full({size, size}, 1.0 / kBackgroundDistance, opts);

  std::vector<const SynthShape *> order;
  for (const auto &sh : scene.shapes) order.push_back(&sh);
  std::stable_sort(order.begin(), order.end(),
                   [](const SynthShape *a, const SynthShape *b) { return a->distance > b->distance; });
  for (const auto *sh : order) {
    torch::Tensor mask;
    if (scene.domain == Domain::A)
      mask = (u - sh->cx).pow(2) + (v - sh->cy).pow(2) <= sh->extent * sh->extent;
    else
      mask = ((u - sh->cx).abs() <= sh->extent).logical_and((v - sh->cy).abs() <= sh->extent);
    for (int c = 0; c < 3; ++c) image[c].masked_fill_(mask, sh->color[c]);
    inv_depth.masked_fill_(mask, 1.0 / sh->distance);
  }
  image = image.clamp(-1.0, 1.0).to(torch::kFloat32);
  auto depth = normalize_depth(inv_depth.unsqueeze(0)).to(torch::kFloat32);
  return {image, depth};
}

SyntheticDataset synth_generate(const SynthConfig &cfg) {
  if (cfg.count_per_domain < 2) throw ConfigError("synthetic dataset needs at least 2 images per domain");
  if (cfg.image_size < 4) throw ConfigError("synthetic image size too small");
  if (cfg.max_shapes < 1) throw ConfigError("synthetic max_shapes must be at least 1");
  if (cfg.noise < 0) throw ConfigError("synthetic noise must be non-negative");
  if (cfg.vertical_min > cfg.vertical_max || cfg.horizontal_min > cfg.horizontal_max)
    throw ConfigError("synthetic gradient range is inverted");

  SyntheticDataset out;
  out.data.image_size = cfg.image_size;
  out.data.stored_size = cfg.image_size;
  auto n_val = static_cast<int>(std::llround(cfg.count_per_domain * cfg.val_fraction));
  n_val = std::clamp(n_val, 1, cfg.count_per_domain - 1);

  for (auto d : kDomains) {
    const int i = static_cast<int>(d);
    Rng rng(derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(i)));
    auto noise_gen = at::detail::createCPUGenerator(derive_seed(cfg.seed, 110 + static_cast<std::uint64_t>(i)));
    std::vector<torch::Tensor> images[2], depths[2];
    for (int k = 0; k < cfg.count_per_domain; ++k) {
      const bool is_val = k >= cfg.count_per_domain - n_val;
      auto scene = sample_scene(d, cfg, rng);
      auto [img, depth] = render_scene(scene, cfg.image_size);
      if (cfg.noise > 0)
        img = (img + cfg.noise * torch::randn(img.sizes(), noise_gen, img.options())).clamp(-1.0, 1.0);
      images[is_val].push_back(img);
      depths[is_val].push_back(depth);
      auto &scenes = is_val ? out.val_scenes[i] : out.train_scenes[i];
      auto &split = is_val ? out.data.val[i] : out.data.train[i];
      split.stems.push_back(std::string(domain_name(d)) + "_" + std::to_string(k));
      split.has_depth.push_back(true);
      scenes.push_back(std::move(scene));
    }
    for (int s = 0; s < 2; ++s) {
      auto &split = s ? out.data.val[i] : out.data.train[i];
      split.images = torch::stack(images[s]);
      split.depth = torch::stack(depths[s]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// batching

BatchIterator::BatchIterator(const UnpairedDataset &ds, int batch_size, std::uint64_t seed,
                             EpochLength policy)
    : ds_(&ds), batch_size_(batch_size), policy_(policy),
      rng_{Rng(derive_seed(seed, 200)), Rng(derive_seed(seed, 201))},
      crop_rng_(derive_seed(seed, 202)) {
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  std::int64_t counts[2];
  for (int i = 0; i < 2; ++i) {
    const auto n = ds.train[i].size();
    if (batch_size > n)
      throw ConfigError("batch size " + std::to_string(batch_size) + " exceeds the " +
                        std::to_string(n) + " training images of domain " +
                        std::string(domain_name(static_cast<Domain>(i))));
    counts[i] = n / batch_size;
    order_[i].resize(static_cast<std::size_t>(n));
    reshuffle(i);
  }
  per_epoch_ = policy == EpochLength::shortest ? std::min(counts[0], counts[1])
                                               : std::max(counts[0], counts[1]);
}

void BatchIterator::reshuffle(int domain) {
  auto &order = order_[domain];
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng_[domain]);
  cursor_[domain] = 0;
}

std::pair<torch::Tensor, torch::Tensor> BatchIterator::gather(const DomainSplit &split,
                                                              const std::vector<std::int64_t> &idx) {
  auto index = torch::tensor(idx, torch::kLong);
  auto images = split.images.index_select(0, index);
  torch::Tensor depth = split.depth.defined() ? split.depth.index_select(0, index) : torch::Tensor();
  const int out = ds_->image_size;
  const int stored = ds_->stored_size;
  if (stored == out) return {images, depth};

  std::vector<torch::Tensor> ci, cd;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto span = static_cast<std::uint64_t>(stored - out + 1);
    const auto r = static_cast<std::int64_t>(uniform_index(crop_rng_, span));
    const auto c = static_cast<std::int64_t>(uniform_index(crop_rng_, span));
    const auto i = static_cast<std::int64_t>(k);
    ci.push_back(images[i].narrow(1, r, out).narrow(2, c, out));
    if (depth.defined()) cd.push_back(depth[i].narrow(1, r, out).narrow(2, c, out));
  }
  return {torch::stack(ci), depth.defined() ? torch::stack(cd) : torch::Tensor()};
}

Batch BatchIterator::next() {
  if (batch_in_epoch_ == per_epoch_) {
    batch_in_epoch_ = 0;
    ++epoch_;
    if (policy_ == EpochLength::shortest) {
      reshuffle(0);
      reshuffle(1);
    }
  }
  Batch b;
  b.epoch = epoch_;
  for (int i = 0; i < 2; ++i) {
    if (cursor_[i] + batch_size_ > static_cast<std::int64_t>(order_[i].size())) reshuffle(i);
    auto &idx = i == 0 ? b.index_a : b.index_b;
    idx.assign(order_[i].begin() + cursor_[i], order_[i].begin() + cursor_[i] + batch_size_);
    cursor_[i] += batch_size_;
    auto [images, depth] = gather(ds_->train[i], idx);
    (i == 0 ? b.a : b.b) = images;
    (i == 0 ? b.depth_a : b.depth_b) = depth;
  }
  ++batch_in_epoch_;
  return b;
}

} // namespace liss

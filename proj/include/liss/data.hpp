#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "liss/random.hpp"
#include "liss/task_id.hpp"

namespace liss {

/// Images of one domain and one split. Images are Nx3xSxS in [-1,1]; depth
/// pseudo-labels, when present, are Nx1xSxS in [0,1].
struct DomainSplit {
  torch::Tensor images;
  torch::Tensor depth;
  std::vector<std::string> stems;
  std::vector<bool> has_depth;

  std::int64_t size() const { return images.defined() ? images.size(0) : 0; }
  /// Stem of the first image lacking a depth label, if any.
  std::optional<std::string> first_missing_depth() const;
};

/// Two independently sampled image domains. `stored_size` exceeds
/// `image_size` only for training images kept for random cropping.
struct UnpairedDataset {
  int image_size = 64;
  int stored_size = 64;
  DomainSplit train[2];
  DomainSplit val[2];

  const DomainSplit &train_split(Domain d) const { return train[static_cast<int>(d)]; }
  const DomainSplit &val_split(Domain d) const { return val[static_cast<int>(d)]; }

  /// Throws DatasetError naming the first image of either domain without a
  /// depth label.
  void require_depth() const;
};

// ---------------------------------------------------------------------------
// loading

struct LoadOptions {
  int image_size = 64;
  double split_fraction = 0.1;
  std::uint64_t seed = 0;
  /// Keep training images at load_size and crop image_size windows at
  /// batching time.
  bool random_crop = false;
  int load_size = 0;
};

/// Images found in a directory (sorted by file name), restricted to the
/// supported raster formats.
std::vector<std::filesystem::path> list_images(const std::filesystem::path &dir);

/// Decodes an image file to 3xSxS in [-1,1] (bilinear resize). Throws
/// DatasetError when the file cannot be decoded.
torch::Tensor load_image(const std::filesystem::path &file, int size);
/// Decodes a single-channel depth file (8/16-bit raster or PFM float map),
/// resizes bilinearly and min-max normalises to [0,1].
torch::Tensor load_depth(const std::filesystem::path &file, int size);

/// [-1,1] float value -> 8-bit code and back.
torch::Tensor to_unit_range(const torch::Tensor &bytes);
torch::Tensor to_bytes(const torch::Tensor &image);

/// Loads both domains. Each path is either flat (split internally by
/// split_fraction with the seed) or holds train/ and val/ subdirectories.
/// Depth labels are looked up as <depth_dir>/depth_<A|B>/<stem>.<ext>;
/// images without one get a missing-label marker and a warning.
UnpairedDataset load_unpaired_dataset(const std::filesystem::path &path_a,
                                      const std::filesystem::path &path_b,
                                      const std::optional<std::filesystem::path> &depth_dir,
                                      const LoadOptions &opt);

// ---------------------------------------------------------------------------
// synthetic data

/// One filled shape of a synthetic scene. Distance is in arbitrary units
/// from the camera; nearer shapes are drawn over farther ones.
struct SynthShape {
  double cx = 0, cy = 0; ///< center, fraction of the side
  double extent = 0;     ///< radius (circle) or half side (square), fraction of the side
  double color[3] = {0, 0, 0};
  double distance = 0;
};

/// Everything needed to re-render a synthetic image and its depth map.
struct SynthScene {
  Domain domain = Domain::A;
  double base[3] = {0, 0, 0};
  double vertical = 0;   ///< brightness drop from top to bottom
  double horizontal = 0; ///< red-to-blue tilt from right to left
  std::vector<SynthShape> shapes;
};

struct SynthConfig {
  std::uint64_t seed = 0;
  int count_per_domain = 240;
  int image_size = 64;
  double val_fraction = 0.1;
  int max_shapes = 3;
  double min_extent = 0.08;
  double max_extent = 0.2;
  /// Ranges of the background brightness drop and colour tilt.
  double vertical_min = 0.6, vertical_max = 1.0;
  double horizontal_min = 0.4, horizontal_max = 0.8;
  /// Standard deviation of per-pixel Gaussian noise added to every image.
  double noise = 0.0;
  /// Probability that a scene has no shape at all.
  double empty_probability = 0.1;
};

inline constexpr double kBackgroundDistance = 10.0;
inline constexpr double kNearestShapeDistance = 2.0;
inline constexpr double kFarthestShapeDistance = 6.0;

SynthScene sample_scene(Domain domain, const SynthConfig &cfg, Rng &rng);
/// Renders a scene at `size` px: 3xSxS image in [-1,1] and 1xSxS normalised
/// inverse-distance depth in [0,1] (background 0 whenever a shape is present,
/// all zeros for an empty scene).
std::pair<torch::Tensor, torch::Tensor> render_scene(const SynthScene &scene, int size);

struct SyntheticDataset {
  UnpairedDataset data;
  /// Scenes of the train and val splits, in the same order as the images.
  std::vector<SynthScene> train_scenes[2];
  std::vector<SynthScene> val_scenes[2];
};

/// Domain A: circles on gradient backgrounds with a warm palette. Domain B:
/// squares with a cool palette. Deterministic per seed.
SyntheticDataset synth_generate(const SynthConfig &cfg);

// ---------------------------------------------------------------------------
// batching

struct Batch {
  torch::Tensor a, b;
  torch::Tensor depth_a, depth_b;
  std::vector<std::int64_t> index_a, index_b;
  std::int64_t epoch = 0;

  const torch::Tensor &images(Domain d) const { return d == Domain::A ? a : b; }
  const torch::Tensor &depth(Domain d) const { return d == Domain::A ? depth_a : depth_b; }
};

/// How long a joint epoch is when the domains differ in size.
enum class EpochLength {
  shortest, ///< min over domains of floor(n / batch); every pair is fresh
  longest,  ///< max over domains; the smaller domain wraps around reshuffled
};

/// Endless stream of joint batches over the training splits. Each domain is
/// reshuffled independently at every epoch and incomplete batches are
/// dropped.
class BatchIterator {
public:
  /// Throws ConfigError when batch_size exceeds either domain's train size.
  BatchIterator(const UnpairedDataset &ds, int batch_size, std::uint64_t seed,
                EpochLength policy = EpochLength::shortest);

  Batch next();
  std::int64_t batches_per_epoch() const { return per_epoch_; }
  int batch_size() const { return batch_size_; }

private:
  void reshuffle(int domain);
  /// Images (and depth, when the split has it) of the given indices, cropped
  /// to image_size with one random window per sample when stored larger.
  std::pair<torch::Tensor, torch::Tensor> gather(const DomainSplit &split,
                                                 const std::vector<std::int64_t> &idx);

  const UnpairedDataset *ds_;
  int batch_size_;
  std::int64_t per_epoch_;
  EpochLength policy_;
  std::int64_t batch_in_epoch_ = 0;
  std::int64_t epoch_ = 0;
  std::int64_t cursor_[2] = {0, 0};
  Rng rng_[2];
  Rng crop_rng_;
  std::vector<std::int64_t> order_[2];
};

} // namespace liss

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "liss/nets.hpp"
#include "liss/task_id.hpp"

namespace liss {

enum class TaskKind { classification, regression, generative };

/// Per-task curriculum settings. Classification tasks pass when validation
/// accuracy >= threshold; the others pass when validation L1 <= threshold.
struct TaskSpec {
  TaskId id = TaskId::rotation;
  TaskKind kind = TaskKind::classification;
  double weight = 1.0;
  double threshold = 0.85;
  bool needs_discriminator = false;

  /// Throws ConfigError if weight <= 0 or the threshold is out of range.
  void validate() const;
  bool passes(double metric) const;
};

inline constexpr double kAccuracyThreshold = 0.85;
inline constexpr double kL1Threshold = 0.15;

TaskSpec default_task_spec(TaskId id);
TaskKind task_kind(TaskId id);

// ---------------------------------------------------------------------------
// rotation

/// Rotates a CxHxW (or NxCxHxW) square image by 90 degrees * class_id
/// counter-clockwise. Throws InputError for a class outside 0..3 or a
/// non-square image.
torch::Tensor rotate_image(const torch::Tensor &image, int class_id);
std::pair<torch::Tensor, int> make_rotation_sample(const torch::Tensor &image, int class_id);
/// Rotates sample i of an NxCxHxW batch by labels[i].
torch::Tensor rotate_batch(const torch::Tensor &batch, const std::vector<int> &labels);

// ---------------------------------------------------------------------------
// jigsaw

using Permutation = std::array<std::uint8_t, 9>;

/// The fixed set of tile orderings the jigsaw head classifies. Index 0 is
/// always the identity; the rest are picked greedily to maximise the average
/// Hamming distance to the permutations already selected.
class PermutationTable {
public:
  static constexpr std::size_t kDefaultCount = 64;
  static constexpr std::size_t kCandidatesPerSlot = 256;

  /// Deterministic for a fixed seed. Throws InputError if count > 9!.
  static PermutationTable build(std::uint64_t seed, std::size_t count = kDefaultCount);

  /// One permutation per line, 9 space-separated digits; line number = label.
  void save(const std::filesystem::path &file) const;
  static PermutationTable load(const std::filesystem::path &file);

  const Permutation &operator[](std::size_t i) const { return perms_.at(i); }
  std::size_t size() const { return perms_.size(); }
  std::uint64_t seed() const { return seed_; }
  int min_hamming() const { return min_hamming_; }
  const std::vector<Permutation> &permutations() const { return perms_; }

  explicit PermutationTable(std::vector<Permutation> perms, std::uint64_t seed = 0);

private:
  std::vector<Permutation> perms_;
  std::uint64_t seed_ = 0;
  int min_hamming_ = 0;
};

int hamming_distance(const Permutation &a, const Permutation &b);
Permutation invert(const Permutation &p);

/// Splits a CxHxW image whose side is divisible by 3 into a 3x3 tile grid and
/// places input tile perm[p] at grid position p. Throws InputError otherwise.
torch::Tensor permute_tiles(const torch::Tensor &image, const Permutation &perm);

/// Jigsaw sample for any square image: the image is center-cropped to the
/// largest multiple of 3, tiled, permuted by table[perm_id], then resized back
/// to its original side when a crop was needed.
std::pair<torch::Tensor, int> make_jigsaw_sample(const torch::Tensor &image, int perm_id,
                                                 const PermutationTable &table);
torch::Tensor jigsaw_batch(const torch::Tensor &batch, const std::vector<int> &perm_ids,
                           const PermutationTable &table);

// ---------------------------------------------------------------------------
// losses

/// Mean cross-entropy of NxK logits against N integer labels.
torch::Tensor classification_loss(const torch::Tensor &logits, const torch::Tensor &labels);
/// Mean absolute error between matching shapes.
torch::Tensor depth_loss(const torch::Tensor &pred, const torch::Tensor &pseudo_label);

/// BT.601 luma computed in [0,1] space and replicated over the 3 channels.
/// Accepts CxHxW or NxCxHxW with C == 3.
torch::Tensor grayify(const torch::Tensor &image);

/// Min-max normalises each map of a 1xHxW or Nx1xHxW batch to [0,1]. A
/// constant map becomes all zeros.
torch::Tensor normalize_depth(const torch::Tensor &depth);

enum class GanMode { log, least_squares };

struct GanLosses {
  torch::Tensor disc;
  torch::Tensor gen;
};

/// Per-sample patch-averaged logit of a patch grid.
torch::Tensor patch_average(const torch::Tensor &patch_logits);
/// Generator-side term on fake patch logits: -log sigmoid(avg) (non-saturating)
/// or (avg - 1)^2 for least squares.
torch::Tensor gan_generator_term(const torch::Tensor &fake_patch_logits, GanMode mode);
/// Discriminator term: -(log sigmoid(avg_real) + log(1 - sigmoid(avg_fake))) or
/// 0.5 * ((avg_real - 1)^2 + avg_fake^2) for least squares.
torch::Tensor gan_discriminator_term(const torch::Tensor &real_patch_logits,
                                     const torch::Tensor &fake_patch_logits, GanMode mode);

/// Both GAN losses for one discriminator. The fake batch is detached for the
/// discriminator loss, so only gen_loss reaches the generator.
GanLosses gan_losses(Discriminator &disc, const torch::Tensor &real, const torch::Tensor &fake,
                     GanMode mode = GanMode::log);

inline constexpr double kColorizationL1Weight = 0.1;
inline constexpr double kColorizationGanWeight = 0.9;

/// 0.1 * L1(pred, target) + 0.9 * generator GAN term of disc on pred.
torch::Tensor colorization_loss(const torch::Tensor &pred, const torch::Tensor &target,
                                Discriminator &disc, GanMode mode = GanMode::log);

torch::Tensor identity_loss(const torch::Tensor &translated_own_domain, const torch::Tensor &input);
torch::Tensor cycle_loss(const torch::Tensor &x, const torch::Tensor &round_trip);

inline constexpr double kDefaultLambdaIdt = 5.0;
inline constexpr double kDefaultLambdaCyc = 10.0;

/// gan + lambda_idt * idt + lambda_cyc * cyc. Throws ConfigError for a
/// negative weight.
torch::Tensor translation_objective(const torch::Tensor &gan_gen_term, const torch::Tensor &idt,
                                    const torch::Tensor &cyc, double lambda_idt = kDefaultLambdaIdt,
                                    double lambda_cyc = kDefaultLambdaCyc);

} // namespace liss

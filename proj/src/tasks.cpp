#include "liss/tasks.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "liss/errors.hpp"
#include "liss/random.hpp"

namespace F = torch::nn::functional;

namespace liss {

namespace {

std::string shape_string(const torch::Tensor &t) {
  std::ostringstream os;
  os << t.sizes();
  return os.str();
}

void require_same_shape(const torch::Tensor &a, const torch::Tensor &b, const char *what) {
  if (a.sizes() != b.sizes())
    throw InputError(std::string(what) + ": shape " + shape_string(a) + " does not match " +
                     shape_string(b));
}

constexpr std::uint64_t kFactorial9 = 362880;

Permutation identity_permutation() {
  Permutation p{};
  std::iota(p.begin(), p.end(), std::uint8_t{0});
  return p;
}

Permutation random_permutation(Rng &rng) {
  auto p = identity_permutation();
  for (std::size_t i = p.size(); i > 1; --i) std::swap(p[i - 1], p[uniform_index(rng, i)]);
  return p;
}

bool is_bijection(const Permutation &p) {
  auto s = p;
  std::sort(s.begin(), s.end());
  return s == identity_permutation();
}

} // namespace

// ---------------------------------------------------------------------------
// task specs

TaskKind task_kind(TaskId id) {
  switch (id) {
  case TaskId::rotation:
  case TaskId::jigsaw:
    return TaskKind::classification;
  case TaskId::depth:
    return TaskKind::regression;
  case TaskId::colorization:
  case TaskId::translation:
    return TaskKind::generative;
  }
  return TaskKind::generative;
}

TaskSpec default_task_spec(TaskId id) {
  TaskSpec s;
  s.id = id;
  s.kind = task_kind(id);
  s.weight = 1.0;
  s.threshold = s.kind == TaskKind::classification ? kAccuracyThreshold : kL1Threshold;
  s.needs_discriminator = needs_discriminator(id);
  return s;
}

void TaskSpec::validate() const {
  if (!(weight > 0.0))
    throw ConfigError("lambda for task '" + std::string(task_name(id)) + "' must be > 0");
  if (kind == TaskKind::classification && !(threshold >= 0.0 && threshold <= 1.0))
    throw ConfigError("accuracy threshold for '" + std::string(task_name(id)) +
                      "' must lie in [0,1]");
  if (kind != TaskKind::classification && !(threshold >= 0.0))
    throw ConfigError("L1 threshold for '" + std::string(task_name(id)) + "' must be >= 0");
}

bool TaskSpec::passes(double metric) const {
  return kind == TaskKind::classification ? metric >= threshold : metric <= threshold;
}

// ---------------------------------------------------------------------------
// rotation

torch::Tensor rotate_image(const torch::Tensor &image, int class_id) {
  if (class_id < 0 || class_id > 3)
    throw InputError("rotation class " + std::to_string(class_id) + " outside 0..3");
  if (image.dim() < 2 || image.size(-1) != image.size(-2))
    throw InputError("rotation needs a square image, got " + shape_string(image));
  // rot90 from the row axis toward the column axis turns the picture
  // counter-clockwise as displayed (row 0 at the top).
  return torch::rot90(image, class_id, {-2, -1}).contiguous();
}

std::pair<torch::Tensor, int> make_rotation_sample(const torch::Tensor &image, int class_id) {
  return {rotate_image(image, class_id), class_id};
}

torch::Tensor rotate_batch(const torch::Tensor &batch, const std::vector<int> &labels) {
  if (batch.dim() != 4 || batch.size(0) != static_cast<std::int64_t>(labels.size()))
    throw InputError("rotate_batch: batch " + shape_string(batch) + " vs " +
                     std::to_string(labels.size()) + " labels");
  std::vector<torch::Tensor> out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    out.push_back(rotate_image(batch[static_cast<std::int64_t>(i)], labels[i]));
  return torch::stack(out);
}

// ---------------------------------------------------------------------------
// jigsaw

int hamming_distance(const Permutation &a, const Permutation &b) {
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

Permutation invert(const Permutation &p) {
  Permutation inv{};
  for (std::size_t i = 0; i < p.size(); ++i) inv[p[i]] = static_cast<std::uint8_t>(i);
  return inv;
}

PermutationTable::PermutationTable(std::vector<Permutation> perms, std::uint64_t seed)
    : perms_(std::move(perms)), seed_(seed) {
  if (perms_.empty()) throw InputError("permutation table is empty");
  std::set<Permutation> seen;
  for (const auto &p : perms_) {
    if (!is_bijection(p)) throw InputError("permutation table entry is not a bijection on 0..8");
    if (!seen.insert(p).second) throw InputError("permutation table has duplicate entries");
  }
  min_hamming_ = perms_.size() > 1 ? 9 : 0;
  for (std::size_t i = 0; i < perms_.size(); ++i)
    for (std::size_t j = i + 1; j < perms_.size(); ++j)
      min_hamming_ = std::min(min_hamming_, hamming_distance(perms_[i], perms_[j]));
}

PermutationTable PermutationTable::build(std::uint64_t seed, std::size_t count) {
  if (count == 0) throw InputError("permutation count must be positive");
  if (count > kFactorial9)
    throw InputError("cannot select " + std::to_string(count) + " permutations out of 9! = 362880");

  Rng rng(seed);
  std::vector<Permutation> chosen{identity_permutation()};
  std::set<Permutation> used{chosen.front()};
  while (chosen.size() < count) {
    Permutation best{};
    long best_score = -1;
    std::size_t drawn = 0;
    for (std::size_t attempt = 0; drawn < kCandidatesPerSlot && attempt < 64 * kCandidatesPerSlot;
         ++attempt) {
      const auto cand = random_permutation(rng);
      if (used.count(cand)) continue;
      ++drawn;
      long score = 0;
      for (const auto &c : chosen) score += hamming_distance(cand, c);
      if (score > best_score) {
        best_score = score;
        best = cand;
      }
    }
    if (best_score < 0) {
      // The random stream is exhausted near 9!; take the next unused
      // permutation in lexicographic order.
      auto p = identity_permutation();
      do {
        if (!used.count(p)) break;
      } while (std::next_permutation(p.begin(), p.end()));
      best = p;
    }
    used.insert(best);
    chosen.push_back(best);
  }
  return PermutationTable(std::move(chosen), seed);
}

void PermutationTable::save(const std::filesystem::path &file) const {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw IoError("cannot write permutation table " + file.string());
  for (const auto &p : perms_) {
    for (std::size_t i = 0; i < p.size(); ++i) out << (i ? " " : "") << int(p[i]);
    out << "\n";
  }
}

PermutationTable PermutationTable::load(const std::filesystem::path &file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot read permutation table " + file.string());
  std::vector<Permutation> perms;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream row(line);
    Permutation p{};
    for (auto &v : p) {
      int x = -1;
      if (!(row >> x) || x < 0 || x > 8)
        throw InputError(file.string() + ":" + std::to_string(lineno) +
                         ": expected 9 digits in 0..8");
      v = static_cast<std::uint8_t>(x);
    }
    std::string rest;
    if (row >> rest)
      throw InputError(file.string() + ":" + std::to_string(lineno) + ": trailing data");
    perms.push_back(p);
  }
  return PermutationTable(std::move(perms));
}

torch::Tensor permute_tiles(const torch::Tensor &image, const Permutation &perm) {
  if (image.dim() != 3 || image.size(1) != image.size(2))
    throw InputError("jigsaw needs a square CxHxW image, got " + shape_string(image));
  const auto side = image.size(1);
  if (side % 3 != 0)
    throw InputError("jigsaw tiling needs a side divisible by 3, got " + std::to_string(side));
  const auto t = side / 3;
  auto out = torch::empty_like(image);
  for (int pos = 0; pos < 9; ++pos) {
    const int src = perm[pos];
    const auto dr = (pos / 3) * t, dc = (pos % 3) * t;
    const auto sr = (src / 3) * t, sc = (src % 3) * t;
    out.narrow(1, dr, t).narrow(2, dc, t).copy_(image.narrow(1, sr, t).narrow(2, sc, t));
  }
  return out;
}

std::pair<torch::Tensor, int> make_jigsaw_sample(const torch::Tensor &image, int perm_id,
                                                 const PermutationTable &table) {
  if (perm_id < 0 || static_cast<std::size_t>(perm_id) >= table.size())
    throw InputError("jigsaw permutation id " + std::to_string(perm_id) + " outside table");
  if (image.dim() != 3 || image.size(1) != image.size(2))
    throw InputError("jigsaw needs a square CxHxW image, got " + shape_string(image));
  const auto side = image.size(1);
  const auto cropped = side - side % 3;
  if (cropped == side) return {permute_tiles(image, table[perm_id]), perm_id};

  const auto offset = (side - cropped) / 2;
  auto crop = image.narrow(1, offset, cropped).narrow(2, offset, cropped);
  auto shuffled = permute_tiles(crop.contiguous(), table[perm_id]);
  auto resized = F::interpolate(shuffled.unsqueeze(0), F::InterpolateFuncOptions()
                                                           .size(std::vector<std::int64_t>{side, side})
                                                           .mode(torch::kBilinear)
                                                           .align_corners(false));
  return {resized.squeeze(0), perm_id};
}

torch::Tensor jigsaw_batch(const torch::Tensor &batch, const std::vector<int> &perm_ids,
                           const PermutationTable &table) {
  if (batch.dim() != 4 || batch.size(0) != static_cast<std::int64_t>(perm_ids.size()))
    throw InputError("jigsaw_batch: batch " + shape_string(batch) + " vs " +
                     std::to_string(perm_ids.size()) + " labels");
  std::vector<torch::Tensor> out;
  out.reserve(perm_ids.size());
  for (std::size_t i = 0; i < perm_ids.size(); ++i)
    out.push_back(make_jigsaw_sample(batch[static_cast<std::int64_t>(i)], perm_ids[i], table).first);
  return torch::stack(out);
}

// ---------------------------------------------------------------------------
// losses

torch::Tensor classification_loss(const torch::Tensor &logits, const torch::Tensor &labels) {
  if (logits.dim() != 2 || labels.dim() != 1 || logits.size(0) != labels.size(0))
    throw InputError("classification_loss: logits " + shape_string(logits) + " vs labels " +
                     shape_string(labels));
  if (labels.numel() > 0) {
    const auto lo = labels.min().item<std::int64_t>();
    const auto hi = labels.max().item<std::int64_t>();
    if (lo < 0 || hi >= logits.size(1))
      throw InputError("class label outside 0.." + std::to_string(logits.size(1) - 1));
  }
  return F::cross_entropy(logits, labels.to(torch::kLong));
}

torch::Tensor depth_loss(const torch::Tensor &pred, const torch::Tensor &pseudo_label) {
  require_same_shape(pred, pseudo_label, "depth_loss");
  return (pred - pseudo_label).abs().mean();
}

torch::Tensor grayify(const torch::Tensor &image) {
  const int cdim = image.dim() == 4 ? 1 : 0;
  if ((image.dim() != 3 && image.dim() != 4) || image.size(cdim) != 3)
    throw InputError("grayify needs a 3-channel image, got " + shape_string(image));
  auto unit = (image + 1.0) * 0.5;
  auto luma = 0.299 * unit.select(cdim, 0) + 0.587 * unit.select(cdim, 1) +
              0.114 * unit.select(cdim, 2);
  auto gray = luma * 2.0 - 1.0;
  return gray.unsqueeze(cdim).expand_as(image).contiguous();
}

torch::Tensor normalize_depth(const torch::Tensor &depth) {
  const bool batched = depth.dim() == 4;
  if ((depth.dim() != 3 && depth.dim() != 4) || depth.size(batched ? 1 : 0) != 1)
    throw InputError("depth map must be 1xHxW or Nx1xHxW, got " + shape_string(depth));
  auto d = batched ? depth : depth.unsqueeze(0);
  auto flat = d.reshape({d.size(0), -1});
  auto lo = std::get<0>(flat.min(1, true));
  auto hi = std::get<0>(flat.max(1, true));
  auto range = hi - lo;
  auto safe = torch::where(range > 0, range, torch::ones_like(range));
  auto norm = torch::where(range > 0, (flat - lo) / safe, torch::zeros_like(flat));
  auto out = norm.reshape(d.sizes());
  return batched ? out : out.squeeze(0);
}

torch::Tensor patch_average(const torch::Tensor &patch_logits) {
  if (patch_logits.dim() < 2)
    throw InputError("patch grid must be batched, got " + shape_string(patch_logits));
  return patch_logits.reshape({patch_logits.size(0), -1}).mean(1);
}

torch::Tensor gan_generator_term(const torch::Tensor &fake_patch_logits, GanMode mode) {
  auto z = patch_average(fake_patch_logits);
  if (mode == GanMode::least_squares) return (z - 1.0).pow(2).mean();
  // -log sigmoid(z) = softplus(-z)
  return F::softplus(-z).mean();
}

torch::Tensor gan_discriminator_term(const torch::Tensor &real_patch_logits,
                                     const torch::Tensor &fake_patch_logits, GanMode mode) {
  auto zr = patch_average(real_patch_logits);
  auto zf = patch_average(fake_patch_logits);
  if (mode == GanMode::least_squares)
    return 0.5 * ((zr - 1.0).pow(2).mean() + zf.pow(2).mean());
  // -log(1 - sigmoid(z)) = softplus(z)
  return F::softplus(-zr).mean() + F::softplus(zf).mean();
}

GanLosses gan_losses(Discriminator &disc, const torch::Tensor &real, const torch::Tensor &fake,
                     GanMode mode) {
  require_same_shape(real, fake, "gan_losses");
  GanLosses out;
  out.gen = gan_generator_term(disc->forward(fake), mode);
  out.disc = gan_discriminator_term(disc->forward(real), disc->forward(fake.detach()), mode);
  return out;
}

torch::Tensor colorization_loss(const torch::Tensor &pred, const torch::Tensor &target,
                                Discriminator &disc, GanMode mode) {
  require_same_shape(pred, target, "colorization_loss");
  auto l1 = (pred - target).abs().mean();
  return kColorizationL1Weight * l1 + kColorizationGanWeight * gan_generator_term(disc->forward(pred), mode);
}

torch::Tensor identity_loss(const torch::Tensor &translated_own_domain, const torch::Tensor &input) {
  require_same_shape(translated_own_domain, input, "identity_loss");
  return (input - translated_own_domain).abs().mean();
}

torch::Tensor cycle_loss(const torch::Tensor &x, const torch::Tensor &round_trip) {
  require_same_shape(x, round_trip, "cycle_loss");
  return (x - round_trip).abs().mean();
}

torch::Tensor translation_objective(const torch::Tensor &gan_gen_term, const torch::Tensor &idt,
                                    const torch::Tensor &cyc, double lambda_idt, double lambda_cyc) {
  if (lambda_idt < 0.0) throw ConfigError("lambda_idt must be >= 0");
  if (lambda_cyc < 0.0) throw ConfigError("lambda_cyc must be >= 0");
  return gan_gen_term + lambda_idt * idt + lambda_cyc * cyc;
}

} // namespace liss

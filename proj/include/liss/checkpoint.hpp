#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

namespace liss {

/// A checkpoint is a directory:
///
///   <dir>/manifest.json      human-readable manifest (free-form "meta" object
///                            plus an "arrays" index of name, file, dtype, shape)
///   <dir>/arrays/<name>.arr  one file per named array
///
/// Array file layout (all integers little-endian):
///
///   offset 0   4 bytes   magic "LSAR"
///   offset 4   u32       format version (1)
///   offset 8   u32       dtype code (1 = float32, 2 = float64, 3 = int64)
///   offset 12  u32       rank r
///   offset 16  r x u64   dimensions, outermost first
///   then       data      row-major, little-endian IEEE-754 / two's complement
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, torch::Tensor>> arrays;

  /// Throws LookupError when absent.
  const torch::Tensor &array(const std::string &name) const;
};

/// Throws IoError on any filesystem failure.
void write_checkpoint(const std::filesystem::path &dir, const Checkpoint &ckpt);
Checkpoint read_checkpoint(const std::filesystem::path &dir);

void write_array(const std::filesystem::path &file, const torch::Tensor &t);
torch::Tensor read_array(const std::filesystem::path &file);

} // namespace liss

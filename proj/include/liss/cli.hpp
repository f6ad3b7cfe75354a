#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "liss/data.hpp"
#include "liss/trainer.hpp"

namespace liss {

enum class DatasetSource { synthetic, paths };

struct ExperimentConfig {
  TrainConfig train;
  DatasetSource dataset = DatasetSource::synthetic;
  std::filesystem::path data_a, data_b;
  std::optional<std::filesystem::path> depth_dir;
  double split_fraction = 0.1;
  /// Images per domain of the synthetic dataset.
  int synth_count = 240;
  /// Background gradient ranges and pixel noise of the synthetic scenes.
  SynthConfig synth;
  std::vector<ScheduleKind> schedules{ScheduleKind::continual};
  /// Root of every output; each schedule writes into <out>/<schedule>.
  std::filesystem::path out = "liss_out";

  /// Throws ConfigError (bad values) or DatasetError (missing paths).
  void validate() const;
};

/// Settings as `key = value` pairs. Keys are dotted, '#' starts a comment,
/// blank lines are ignored.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Throws ConfigError naming the line on malformed input.
KeyValues parse_key_values(const std::string &text);

/// Every accepted key, in the order of the resolved-config echo.
std::vector<std::string> config_keys();

/// Applies one setting. Throws ConfigError for an unknown key (listing the
/// valid ones) or a value of the wrong type (naming key and expected type).
void apply_setting(ExperimentConfig &cfg, const std::string &key, const std::string &value);

/// Defaults, then the file (when given), then the overrides in order.
ExperimentConfig parse_config(const std::optional<std::filesystem::path> &file,
                              const KeyValues &overrides);

/// Full resolved config in the same key-value format; parsing it back yields
/// an identical config.
std::string format_config(const ExperimentConfig &cfg);

/// Builds the configured dataset (synthetic scenes seeded by the train seed,
/// or images loaded from the two domain paths).
UnpairedDataset make_dataset(const ExperimentConfig &cfg);

struct ComparisonReport {
  std::vector<std::pair<ScheduleKind, TrainingLog>> runs;
  std::string text;
};

/// Side-by-side table of peak, final and retention per pretext task and
/// schedule. With more than one schedule each later schedule also gets a
/// retention delta against the first one.
std::string format_comparison(const std::vector<std::pair<ScheduleKind, TrainingLog>> &runs);

/// Runs every selected schedule on the same dataset and seed, writes the
/// resolved config, per-schedule outputs, series files and
/// <out>/comparison.txt.
ComparisonReport run_comparison(const ExperimentConfig &cfg);

/// Writes one "step,value" file per (domain, pretext head) named after the
/// metrics column. An empty log writes nothing and prints a warning. Throws
/// IoError when the directory cannot be written.
std::vector<std::filesystem::path> emit_series(const TrainingLog &log,
                                               const std::filesystem::path &dir);

} // namespace liss

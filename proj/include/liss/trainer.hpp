#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "liss/data.hpp"
#include "liss/nets.hpp"
#include "liss/optim.hpp"
#include "liss/schedule.hpp"
#include "liss/tasks.hpp"

namespace liss {

/// Desk-scale architecture: 64 px, 16 base channels, all tasks.
inline ArchConfig desk_arch() {
  ArchConfig a;
  a.input_size = 64;
  a.base_channels = 16;
  return a;
}

struct TrainConfig {
  ScheduleKind schedule = ScheduleKind::continual;
  ArchConfig arch = desk_arch();

  double learning_rate = 5e-4;
  int batch_size = 5;
  /// Batch size used by the parallel schedule, which runs every head per
  /// sample.
  int parallel_batch_size = 3;
  /// Training stops once this many translation steps are done. Pretext-task
  /// steps of the curriculum schedules do not count.
  std::int64_t max_translation_steps = 2000;

  double alpha = kDefaultAlpha;
  double beta = kDefaultBeta;
  /// Per-task overrides of the loss weight (default 1) and curriculum
  /// threshold (default 0.85 accuracy / 0.15 L1).
  std::map<TaskId, double> lambda;
  std::map<TaskId, double> thresholds;
  double lambda_idt = kDefaultLambdaIdt;
  double lambda_cyc = kDefaultLambdaCyc;

  std::int64_t validation_cadence = 100;
  /// A curriculum task that has not passed its threshold after this many
  /// steps aborts the run.
  std::int64_t stall_budget = 5000;
  std::uint64_t seed = 0;

  std::uint64_t permutation_seed = 0;
  std::optional<std::filesystem::path> permutation_file;
  /// Jigsaw permutations evaluated per validation image.
  int jigsaw_val_perms = 4;

  OptimizerKind optimizer = OptimizerKind::radam;
  GanMode gan = GanMode::log;

  /// When empty nothing is written to disk.
  std::filesystem::path output_dir;
  bool write_checkpoints = true;

  /// Throws ConfigError on invalid values.
  void validate() const;
  std::vector<TaskSpec> task_specs() const;
  int effective_batch_size() const;
};

/// Per-step losses, keyed "<domain>_<task>" for task objectives plus
/// "<domain>_dist", "<domain>_disc_<task>" and the translation components
/// "<domain>_translation_{gan,idt,cyc}".
using LossTerms = std::map<std::string, double>;

/// Validation metric per (domain, pretext task): accuracy for rotation and
/// jigsaw, mean L1 for depth and colorization.
using ValidationMetrics = std::map<std::pair<Domain, TaskId>, double>;

struct MetricsRecord {
  std::int64_t step = 0;
  TaskId task = TaskId::rotation; ///< current task when the metrics were taken
  ValidationMetrics metrics;
  /// Mean of each loss term over the steps since the previous record.
  LossTerms losses;
  double seconds_per_sample = 0.0;
};

struct TrainingLog {
  ScheduleKind schedule = ScheduleKind::continual;
  std::vector<TaskId> tasks;
  std::vector<MetricsRecord> records;
  std::vector<TransitionRecord> transitions;
  std::filesystem::path final_checkpoint;
  std::int64_t total_steps = 0;
  std::int64_t translation_steps = 0;
};

/// Column names of the metrics file for a task list.
std::vector<std::string> metric_columns(const std::vector<TaskId> &tasks);
std::vector<std::string> loss_columns(const std::vector<TaskId> &tasks);
std::string metrics_header(const std::vector<TaskId> &tasks);
std::string format_metrics_row(ScheduleKind schedule, const std::vector<TaskId> &tasks,
                               const MetricsRecord &rec);
std::string metric_column_name(Domain d, TaskId task);

/// Evaluates every pretext head of both generators on the validation split.
/// Rotation uses all four rotations of each image; jigsaw uses
/// `jigsaw_perms` permutations per image. Throws ConfigError on an empty
/// validation split.
ValidationMetrics validate(Generator &gen_a, Generator &gen_b, const UnpairedDataset &ds,
                           const std::vector<TaskId> &tasks, const PermutationTable &table,
                           int jigsaw_perms = 4);

/// Owns both domains' models, optimizers, reference encoders and curriculum
/// for one training run. Single-threaded.
class Trainer {
public:
  Trainer(TrainConfig cfg, const UnpairedDataset &ds);

  /// One generator update then one discriminator update on the given batch.
  /// Returns the loss terms used. Throws NumericError on a non-finite term.
  LossTerms train_step(const Batch &batch);
  ValidationMetrics validate();
  /// Runs to completion and returns the log. Throws StallError when a
  /// curriculum task exceeds the stall budget.
  TrainingLog run();

  void save_checkpoint(const std::filesystem::path &dir);
  void load_checkpoint(const std::filesystem::path &dir);

  /// Tasks whose losses the next train_step optimises.
  std::vector<TaskId> active_tasks() const;

  Generator &generator(Domain d) { return gens_[static_cast<int>(d)]; }
  /// Throws LookupError when the domain has no discriminator for the task.
  Discriminator &discriminator(Domain d, TaskId task);
  ReferenceEncoder &reference(Domain d) { return *refs_[static_cast<int>(d)]; }
  const CurriculumState &curriculum() const { return curriculum_; }
  const PermutationTable &permutations() const { return table_; }
  const TrainConfig &config() const { return cfg_; }
  std::int64_t step() const { return step_; }
  std::int64_t translation_steps() const { return translation_steps_; }
  BatchIterator &batches() { return batches_; }

  /// Applies the bookkeeping of a curriculum transition at the current step:
  /// advances the curriculum, freezes the completed head (and its
  /// discriminator) and, for the continual schedule, folds the encoder
  /// snapshot into the reference before any further step.
  void transition();

private:
  torch::Tensor pretext_loss(Domain d, TaskId task, const torch::Tensor &x,
                             const torch::Tensor &depth, LossTerms &terms,
                             torch::Tensor *generated);
  void refresh_trainable();
  std::vector<torch::Tensor> generator_parameters();
  void check_finite(const std::string &name, const torch::Tensor &t) const;

  TrainConfig cfg_;
  const UnpairedDataset *ds_;
  std::vector<TaskSpec> specs_;
  PermutationTable table_;
  Generator gens_[2] = {Generator(nullptr), Generator(nullptr)};
  std::map<TaskId, Discriminator> discs_[2];
  std::unique_ptr<ReferenceEncoder> refs_[2];
  CurriculumState curriculum_;
  std::unique_ptr<AdaptiveMoment> gen_opt_;
  std::unique_ptr<AdaptiveMoment> disc_opt_;
  BatchIterator batches_;
  Rng sample_rng_;
  std::int64_t step_ = 0;
  std::int64_t translation_steps_ = 0;
};

/// Trains one schedule on a dataset (see Trainer::run).
TrainingLog run(const TrainConfig &cfg, const UnpairedDataset &ds);

struct ForgettingReport {
  TaskId task = TaskId::rotation;
  double peak[2] = {0, 0};
  double final_value[2] = {0, 0};
  double retention[2] = {0, 0};
  double mean_peak = 0;
  double mean_final = 0;
  double mean_retention = 0;
};

/// Peak is the best validation metric while the task was being trained,
/// final the metric at the last validation point. Retention is final / peak
/// for accuracies and peak / final for L1 metrics (so 1 means no loss either
/// way). Throws StateError when the task was never trained.
ForgettingReport forgetting_report(const TrainingLog &log, TaskId task);

} // namespace liss

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <torch/torch.h>

#include "liss/nets.hpp"
#include "liss/tasks.hpp"

namespace liss {

/// Loss-composition rule applied at every training step.
enum class ScheduleKind {
  baseline,   ///< translation task only
  parallel,   ///< weighted sum of every task's loss
  sequential, ///< current curriculum task only
  continual,  ///< sequential plus distillation toward the reference encoder
};

std::string_view schedule_name(ScheduleKind kind);
/// Throws LookupError on unknown names.
ScheduleKind parse_schedule(std::string_view name);
/// Whether the schedule walks the threshold curriculum.
bool uses_curriculum(ScheduleKind kind);

inline constexpr double kDefaultAlpha = 0.5;
inline constexpr double kDefaultBeta = 1.0;

// ---------------------------------------------------------------------------
// loss composition

/// Sum over all tasks of weight * loss. Throws ConfigError when a task of
/// `tasks` has no entry in `losses`.
torch::Tensor parallel_loss(const std::vector<TaskSpec> &tasks,
                            const std::map<TaskId, torch::Tensor> &losses);

/// weight(t) * loss_t. Throws LookupError when t is not a task index.
torch::Tensor sequential_loss(const std::vector<TaskSpec> &tasks, std::size_t t,
                              const torch::Tensor &loss_t);

/// seq + beta * dist; an undefined dist tensor (task 0) contributes nothing.
/// Throws ConfigError for beta < 0.
torch::Tensor continual_loss(const torch::Tensor &seq_term, const torch::Tensor &dist_term,
                             double beta);

// ---------------------------------------------------------------------------
// reference encoder

/// One step of the reference recurrence: at k == 1 the reference becomes the
/// snapshot verbatim, for k > 1 it becomes alpha * snapshot + (1 - alpha) *
/// previous. Throws IncompatibleSnapshotError on name/shape mismatch.
ParamVector fold_reference(const std::optional<ParamVector> &previous, const ParamVector &snapshot,
                           int k, double alpha);

/// Frozen exponential moving average of encoder snapshots taken at task
/// transitions. Inactive until the first transition.
class ReferenceEncoder {
public:
  /// Parameter-only reference (no network to evaluate).
  explicit ReferenceEncoder(double alpha = kDefaultAlpha);
  /// Reference that can also encode batches with the given architecture.
  ReferenceEncoder(const ArchConfig &cfg, double alpha = kDefaultAlpha);

  bool active() const { return params_.has_value(); }
  int last_update_task() const { return last_task_; }
  double alpha() const { return alpha_; }
  /// Throws StateError while inactive.
  const ParamVector &params() const;

  /// Folds the encoder snapshot taken when entering task k. Throws
  /// OrderingError unless k follows the previous update (the first update
  /// must be k == 1).
  void update(const ParamVector &snapshot, int k);

  /// Restores a saved state (used by checkpoint loading).
  void restore(ParamVector params, int last_task);

  /// Reference latent of a batch, computed without gradient tracking.
  /// Throws StateError while inactive or without a network.
  torch::Tensor encode(const torch::Tensor &batch) const;
  bool has_network() const { return static_cast<bool>(net_); }

private:
  double alpha_;
  int last_task_ = 0;
  std::optional<ParamVector> params_;
  int input_size_ = 0;
  mutable Network net_{nullptr};
};

/// Returns the updated reference after folding the snapshot for task k.
ReferenceEncoder update_reference_encoder(ReferenceEncoder ref, const ParamVector &snapshot, int k);

/// Mean absolute difference (over batch, channels and positions) between the
/// reference latent and the current latent. No gradient reaches the
/// reference. Throws StateError when the reference is inactive.
torch::Tensor distillation_loss(const ReferenceEncoder &ref, Network &encoder,
                                const torch::Tensor &batch);
/// Same, for a current latent that was already computed from `batch`.
torch::Tensor distillation_loss_from_latent(const ReferenceEncoder &ref,
                                            const torch::Tensor &current_latent,
                                            const torch::Tensor &batch);

// ---------------------------------------------------------------------------
// curriculum

struct TransitionRecord {
  TaskId task;
  std::int64_t start_step;
  std::int64_t end_step;
};

class CurriculumState {
public:
  /// `tasks` must end with the translation task.
  CurriculumState(std::vector<TaskSpec> tasks, std::int64_t validation_cadence);

  std::size_t current_index() const { return current_; }
  TaskId current_task() const { return tasks_[current_].id; }
  const TaskSpec &current_spec() const { return tasks_[current_]; }
  bool at_final_task() const { return current_ + 1 == tasks_.size(); }
  std::int64_t task_start_step() const { return start_step_; }
  std::int64_t validation_cadence() const { return cadence_; }
  const std::vector<TaskSpec> &tasks() const { return tasks_; }
  const std::vector<TransitionRecord> &log() const { return log_; }

  /// True iff both domains meet the current task's threshold. Always false
  /// for the final (translation) task.
  bool should_transition(double metric_a, double metric_b) const;

  /// Closes the current task at `step` and moves to the next one. Returns the
  /// completed task. Throws TerminalStateError at the final task and
  /// OrderingError when step does not exceed the current task's start.
  TaskId advance(std::int64_t step);

  void record_metric(Domain d, TaskId task, double value);
  std::optional<double> latest_metric(Domain d, TaskId task) const;

  /// Rebuilds state from a transition log (checkpoint restore).
  void restore(const std::vector<TransitionRecord> &log);

private:
  std::vector<TaskSpec> tasks_;
  std::int64_t cadence_;
  std::size_t current_ = 0;
  std::int64_t start_step_ = 0;
  std::vector<TransitionRecord> log_;
  std::map<std::pair<Domain, TaskId>, double> latest_;
};

bool should_transition(const CurriculumState &state, double metric_a, double metric_b);
CurriculumState advance(CurriculumState state, std::int64_t step);

/// Text table with the columns Schedule, Task, Start_Step, End_Step.
std::string format_transition_table(
    const std::vector<std::pair<ScheduleKind, std::vector<TransitionRecord>>> &runs);
/// CSV with header "schedule,task,start_step,end_step".
std::string format_transition_csv(ScheduleKind kind, const std::vector<TransitionRecord> &log);

} // namespace liss

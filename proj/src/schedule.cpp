#include "liss/schedule.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "liss/errors.hpp"

namespace liss {

std::string_view schedule_name(ScheduleKind kind) {
  switch (kind) {
  case ScheduleKind::baseline:
    return "baseline";
  case ScheduleKind::parallel:
    return "parallel";
  case ScheduleKind::sequential:
    return "sequential";
  case ScheduleKind::continual:
    return "continual";
  }
  return "unknown";
}

ScheduleKind parse_schedule(std::string_view name) {
  for (auto k : {ScheduleKind::baseline, ScheduleKind::parallel, ScheduleKind::sequential,
                 ScheduleKind::continual}) {
    if (schedule_name(k) == name) return k;
  }
  throw LookupError("unknown schedule '" + std::string(name) +
                    "' (expected baseline, parallel, sequential or continual)");
}

bool uses_curriculum(ScheduleKind kind) {
  return kind == ScheduleKind::sequential || kind == ScheduleKind::continual;
}

// ---------------------------------------------------------------------------
// loss composition

torch::Tensor parallel_loss(const std::vector<TaskSpec> &tasks,
                            const std::map<TaskId, torch::Tensor> &losses) {
  if (tasks.empty()) throw ConfigError("parallel loss over an empty task list");
  torch::Tensor total;
  for (const auto &spec : tasks) {
    auto it = losses.find(spec.id);
    if (it == losses.end() || !it->second.defined())
      throw ConfigError("parallel loss is missing the '" + std::string(task_name(spec.id)) +
                        "' term");
    auto term = spec.weight * it->second;
    total = total.defined() ? total + term : term;
  }
  return total;
}

torch::Tensor sequential_loss(const std::vector<TaskSpec> &tasks, std::size_t t,
                              const torch::Tensor &loss_t) {
  if (t >= tasks.size())
    throw LookupError("task index " + std::to_string(t) + " outside the curriculum of " +
                      std::to_string(tasks.size()) + " tasks");
  return tasks[t].weight * loss_t;
}

torch::Tensor continual_loss(const torch::Tensor &seq_term, const torch::Tensor &dist_term,
                             double beta) {
  if (beta < 0.0) throw ConfigError("beta must be >= 0");
  if (!dist_term.defined()) return seq_term;
  return seq_term + beta * dist_term;
}

// ---------------------------------------------------------------------------
// reference encoder

ParamVector fold_reference(const std::optional<ParamVector> &previous, const ParamVector &snapshot,
                           int k, double alpha) {
  if (k < 1) throw OrderingError("reference updates start at task 1");
  ParamVector out;
  out.entries.reserve(snapshot.entries.size());
  if (k == 1 || !previous) {
    for (const auto &[name, t] : snapshot.entries) out.entries.emplace_back(name, t.detach().clone());
    return out;
  }
  previous->check_compatible(snapshot);
  torch::NoGradGuard no_grad;
  for (std::size_t i = 0; i < snapshot.entries.size(); ++i) {
    const auto &[name, snap] = snapshot.entries[i];
    const auto &prev = previous->entries[i].second;
    out.entries.emplace_back(name, alpha * snap + (1.0 - alpha) * prev);
  }
  return out;
}

namespace {
void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0,1]");
}

// The reference network follows the precision of the parameters it is given.
void match_dtype(Network &net, const ParamVector &pv) {
  if (!net || pv.entries.empty()) return;
  const auto dtype = pv.entries.front().second.scalar_type();
  if (net->parameters().front().scalar_type() != dtype) net->to(dtype);
}
} // namespace

ReferenceEncoder::ReferenceEncoder(double alpha) : alpha_(alpha) { check_alpha(alpha); }

ReferenceEncoder::ReferenceEncoder(const ArchConfig &cfg, double alpha)
    : alpha_(alpha), input_size_(cfg.input_size), net_(make_encoder(cfg)) {
  check_alpha(alpha);
  for (auto &p : net_->parameters()) p.set_requires_grad(false);
}

const ParamVector &ReferenceEncoder::params() const {
  if (!params_) throw StateError("reference encoder is inactive before the first transition");
  return *params_;
}

void ReferenceEncoder::update(const ParamVector &snapshot, int k) {
  if (!params_ && k != 1)
    throw OrderingError("first reference update must be for task 1, got " + std::to_string(k));
  if (params_ && k <= last_task_)
    throw OrderingError("reference update for task " + std::to_string(k) +
                        " after task " + std::to_string(last_task_));
  if (params_) params_->check_compatible(snapshot);
  if (net_) snapshot_params(*net_).check_compatible(snapshot);
  auto folded = fold_reference(params_, snapshot, k, alpha_);
  match_dtype(net_, folded);
  if (net_) load_params(*net_, folded);
  params_ = std::move(folded);
  last_task_ = k;
}

void ReferenceEncoder::restore(ParamVector params, int last_task) {
  match_dtype(net_, params);
  if (net_) load_params(*net_, params);
  params_ = std::move(params);
  last_task_ = last_task;
}

torch::Tensor ReferenceEncoder::encode(const torch::Tensor &batch) const {
  if (!params_) throw StateError("reference encoder is inactive before the first transition");
  if (!net_) throw StateError("reference encoder holds parameters only");
  if (batch.dim() != 4 || batch.size(2) != input_size_ || batch.size(3) != input_size_)
    throw InputError("reference encoder input has the wrong shape");
  torch::NoGradGuard no_grad;
  return net_->forward(batch);
}

ReferenceEncoder update_reference_encoder(ReferenceEncoder ref, const ParamVector &snapshot, int k) {
  ref.update(snapshot, k);
  return ref;
}

torch::Tensor distillation_loss_from_latent(const ReferenceEncoder &ref,
                                            const torch::Tensor &current_latent,
                                            const torch::Tensor &batch) {
  auto target = ref.encode(batch);
  if (target.sizes() != current_latent.sizes())
    throw InputError("reference and current latents differ in shape");
  return (target - current_latent).abs().mean();
}

torch::Tensor distillation_loss(const ReferenceEncoder &ref, Network &encoder,
                                const torch::Tensor &batch) {
  if (!ref.active()) throw StateError("distillation requested before the first transition");
  return distillation_loss_from_latent(ref, encoder->forward(batch), batch);
}

// ---------------------------------------------------------------------------
// curriculum

CurriculumState::CurriculumState(std::vector<TaskSpec> tasks, std::int64_t validation_cadence)
    : tasks_(std::move(tasks)), cadence_(validation_cadence) {
  if (tasks_.empty()) throw ConfigError("curriculum has no tasks");
  if (tasks_.back().id != TaskId::translation)
    throw ConfigError("curriculum must end with the translation task");
  if (cadence_ < 1) throw ConfigError("validation cadence must be at least 1");
  for (const auto &t : tasks_) t.validate();
}

bool CurriculumState::should_transition(double metric_a, double metric_b) const {
  if (at_final_task()) return false;
  const auto &spec = current_spec();
  return spec.passes(metric_a) && spec.passes(metric_b);
}

TaskId CurriculumState::advance(std::int64_t step) {
  if (at_final_task())
    throw TerminalStateError("cannot advance past the final '" +
                             std::string(task_name(current_task())) + "' task");
  if (step <= start_step_)
    throw OrderingError("transition at step " + std::to_string(step) +
                        " does not follow the task start at step " + std::to_string(start_step_));
  const auto done = current_task();
  log_.push_back({done, start_step_, step});
  start_step_ = step;
  ++current_;
  return done;
}

void CurriculumState::record_metric(Domain d, TaskId task, double value) {
  latest_[{d, task}] = value;
}

std::optional<double> CurriculumState::latest_metric(Domain d, TaskId task) const {
  auto it = latest_.find({d, task});
  if (it == latest_.end()) return std::nullopt;
  return it->second;
}

void CurriculumState::restore(const std::vector<TransitionRecord> &log) {
  current_ = 0;
  start_step_ = 0;
  log_.clear();
  for (const auto &rec : log) {
    if (rec.task != current_task() || rec.start_step != start_step_)
      throw StateError("transition log does not match the curriculum");
    advance(rec.end_step);
  }
}

bool should_transition(const CurriculumState &state, double metric_a, double metric_b) {
  return state.should_transition(metric_a, metric_b);
}

CurriculumState advance(CurriculumState state, std::int64_t step) {
  state.advance(step);
  return state;
}

// ---------------------------------------------------------------------------
// transition tables

namespace {
std::string display(std::string_view s) {
  std::string out(s);
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}
} // namespace

std::string format_transition_table(
    const std::vector<std::pair<ScheduleKind, std::vector<TransitionRecord>>> &runs) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "Schedule" << std::setw(14) << "Task" << std::setw(12)
     << "Start_Step" << "End_Step\n";
  for (const auto &[kind, log] : runs) {
    bool first = true;
    for (const auto &rec : log) {
      os << std::left << std::setw(12) << (first ? display(schedule_name(kind)) : "")
         << std::setw(14) << display(task_name(rec.task)) << std::setw(12) << rec.start_step
         << rec.end_step << "\n";
      first = false;
    }
    if (log.empty()) os << std::left << std::setw(12) << display(schedule_name(kind)) << "-\n";
  }
  return os.str();
}

std::string format_transition_csv(ScheduleKind kind, const std::vector<TransitionRecord> &log) {
  std::ostringstream os;
  os << "schedule,task,start_step,end_step\n";
  for (const auto &rec : log)
    os << schedule_name(kind) << "," << task_name(rec.task) << "," << rec.start_step << ","
       << rec.end_step << "\n";
  return os.str();
}

} // namespace liss

#include "liss/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>

#include "liss/checkpoint.hpp"
#include "liss/errors.hpp"

namespace liss {

namespace fs = std::filesystem;

namespace {

constexpr std::int64_t kValidationChunk = 32;

int idx(Domain d) { return static_cast<int>(d); }

std::string key(Domain d, std::string_view suffix) {
  return std::string(domain_name(d)) + "_" + std::string(suffix);
}

std::string key(Domain d, TaskId t) { return key(d, task_name(t)); }

void set_trainable(torch::nn::Module &m, bool on) {
  for (auto &p : m.parameters()) p.set_requires_grad(on);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

torch::Tensor label_tensor(const std::vector<int> &labels) {
  std::vector<std::int64_t> v(labels.begin(), labels.end());
  return torch::tensor(v, torch::kLong);
}

std::vector<int> random_labels(Rng &rng, std::int64_t n, std::size_t classes) {
  std::vector<int> out(static_cast<std::size_t>(n));
  for (auto &l : out) l = static_cast<int>(uniform_index(rng, classes));
  return out;
}

ParamVector strip_prefix(const Checkpoint &ckpt, const std::string &prefix) {
  ParamVector pv;
  for (const auto &[name, t] : ckpt.arrays)
    if (name.rfind(prefix, 0) == 0) pv.entries.emplace_back(name.substr(prefix.size()), t);
  return pv;
}

void add_prefixed(Checkpoint &ckpt, const std::string &prefix, const ParamVector &pv) {
  for (const auto &[name, t] : pv.entries) ckpt.arrays.emplace_back(prefix + name, t);
}

nlohmann::json arch_json(const ArchConfig &a) {
  return {{"input_channels", a.input_channels},
          {"input_size", a.input_size},
          {"base_channels", a.base_channels},
          {"n_residual_blocks", a.n_residual_blocks},
          {"tasks", format_task_list(a.tasks)}};
}

TrainConfig checked(TrainConfig cfg) {
  cfg.validate();
  return cfg;
}

PermutationTable make_table(const TrainConfig &cfg) {
  auto table = cfg.permutation_file ? PermutationTable::load(*cfg.permutation_file)
                                    : PermutationTable::build(cfg.permutation_seed);
  const auto want = static_cast<std::size_t>(class_count(TaskId::jigsaw));
  if (table.size() != want)
    throw ConfigError("permutation table has " + std::to_string(table.size()) +
                      " entries, the jigsaw head predicts " + std::to_string(want));
  return table;
}

} // namespace

// ---------------------------------------------------------------------------
// config

void TrainConfig::validate() const {
  arch.validate();
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (parallel_batch_size < 1) throw ConfigError("parallel_batch_size must be at least 1");
  if (max_translation_steps < 1) throw ConfigError("max_translation_steps must be at least 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  if (!(lambda_idt >= 0.0) || !(lambda_cyc >= 0.0))
    throw ConfigError("lambda_idt and lambda_cyc must be >= 0");
  if (validation_cadence < 1) throw ConfigError("validation_cadence must be at least 1");
  if (stall_budget < 1) throw ConfigError("stall_budget must be at least 1");
  if (jigsaw_val_perms < 1 || jigsaw_val_perms > class_count(TaskId::jigsaw))
    throw ConfigError("jigsaw_val_perms must lie in 1.." +
                      std::to_string(class_count(TaskId::jigsaw)));
  for (const auto &m : {lambda, thresholds})
    for (const auto &[t, v] : m)
      if (!arch.has_task(t))
        throw ConfigError("override for task '" + std::string(task_name(t)) +
                          "' which is not in the task list");
  task_specs();
}

std::vector<TaskSpec> TrainConfig::task_specs() const {
  std::vector<TaskSpec> out;
  for (auto t : arch.tasks) {
    auto spec = default_task_spec(t);
    if (auto it = lambda.find(t); it != lambda.end()) spec.weight = it->second;
    if (auto it = thresholds.find(t); it != thresholds.end()) spec.threshold = it->second;
    spec.validate();
    out.push_back(spec);
  }
  return out;
}

int TrainConfig::effective_batch_size() const {
  return schedule == ScheduleKind::parallel ? parallel_batch_size : batch_size;
}

// ---------------------------------------------------------------------------
// metrics file

std::string metric_column_name(Domain d, TaskId task) {
  return key(d, task) + (is_classification(task) ? "_acc" : "_l1");
}

std::vector<std::string> metric_columns(const std::vector<TaskId> &tasks) {
  std::vector<std::string> out;
  for (auto t : tasks) {
    if (t == TaskId::translation) continue;
    for (auto d : kDomains) out.push_back(metric_column_name(d, t));
  }
  return out;
}

std::vector<std::string> loss_columns(const std::vector<TaskId> &tasks) {
  std::vector<std::string> out;
  for (auto d : kDomains) {
    for (auto t : tasks) {
      out.push_back(key(d, t));
      if (t == TaskId::translation)
        for (auto part : {"gan", "idt", "cyc"}) out.push_back(key(d, "translation_") + part);
    }
    out.push_back(key(d, "dist"));
    for (auto t : tasks)
      if (needs_discriminator(t)) out.push_back(key(d, "disc_") + std::string(task_name(t)));
  }
  return out;
}

std::string metrics_header(const std::vector<TaskId> &tasks) {
  std::string out = "step,schedule,task";
  for (const auto &c : metric_columns(tasks)) out += "," + c;
  for (const auto &c : loss_columns(tasks)) out += "," + c;
  return out;
}

std::string format_metrics_row(ScheduleKind schedule, const std::vector<TaskId> &tasks,
                               const MetricsRecord &rec) {
  std::string out = std::to_string(rec.step) + "," + std::string(schedule_name(schedule)) + "," +
                    std::string(task_name(rec.task));
  for (auto t : tasks) {
    if (t == TaskId::translation) continue;
    for (auto d : kDomains) {
      out += ",";
      if (auto it = rec.metrics.find({d, t}); it != rec.metrics.end())
        out += format_double(it->second);
    }
  }
  for (const auto &c : loss_columns(tasks)) {
    out += ",";
    if (auto it = rec.losses.find(c); it != rec.losses.end()) out += format_double(it->second);
  }
  return out;
}

// ---------------------------------------------------------------------------
// validation

ValidationMetrics validate(Generator &gen_a, Generator &gen_b, const UnpairedDataset &ds,
                           const std::vector<TaskId> &tasks, const PermutationTable &table,
                           int jigsaw_perms) {
  torch::NoGradGuard no_grad;
  ValidationMetrics out;
  for (auto d : kDomains) {
    auto &gen = d == Domain::A ? gen_a : gen_b;
    const auto &split = ds.val_split(d);
    const auto n = split.size();
    if (n == 0)
      throw ConfigError("validation split of domain " + std::string(domain_name(d)) + " is empty");

    for (auto task : tasks) {
      if (task == TaskId::translation) continue;
      double hits = 0, l1_sum = 0, count = 0;
      for (std::int64_t lo = 0; lo < n; lo += kValidationChunk) {
        const auto hi = std::min(n, lo + kValidationChunk);
        auto x = split.images.slice(0, lo, hi);
        const auto m = hi - lo;
        switch (task) {
        case TaskId::rotation:
          for (int r = 0; r < 4; ++r) {
            auto logits = gen->head_forward(task, gen->encode(rotate_image(x, r)));
            hits += logits.argmax(1).eq(r).sum().item<double>();
            count += static_cast<double>(m);
          }
          break;
        case TaskId::jigsaw:
          for (int j = 0; j < jigsaw_perms; ++j) {
            std::vector<int> ids(static_cast<std::size_t>(m));
            for (std::int64_t i = 0; i < m; ++i)
              ids[static_cast<std::size_t>(i)] = static_cast<int>(
                  ((lo + i) * jigsaw_perms + j) % static_cast<std::int64_t>(table.size()));
            auto logits = gen->head_forward(task, gen->encode(jigsaw_batch(x, ids, table)));
            hits += logits.argmax(1).eq(label_tensor(ids)).sum().item<double>();
            count += static_cast<double>(m);
          }
          break;
        case TaskId::depth: {
          if (!split.depth.defined())
            throw DatasetError("domain " + std::string(domain_name(d)) +
                               " has no depth labels for validation");
          auto pred = gen->head_forward(task, gen->encode(x));
          l1_sum += (pred - split.depth.slice(0, lo, hi)).abs().sum().item<double>();
          count += static_cast<double>(pred.numel());
          break;
        }
        case TaskId::colorization: {
          auto pred = gen->head_forward(task, gen->encode(grayify(x)));
          l1_sum += (pred - x).abs().sum().item<double>();
          count += static_cast<double>(pred.numel());
          break;
        }
        case TaskId::translation:
          break;
        }
      }
      out[{d, task}] = is_classification(task) ? hits / count : l1_sum / count;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// trainer

Trainer::Trainer(TrainConfig cfg, const UnpairedDataset &ds)
    : cfg_(checked(std::move(cfg))), ds_(&ds), specs_(cfg_.task_specs()), table_(make_table(cfg_)),
      curriculum_(specs_, cfg_.validation_cadence),
      batches_(ds, cfg_.effective_batch_size(), derive_seed(cfg_.seed, 1)),
      sample_rng_(derive_seed(cfg_.seed, 2)) {
  if (ds.image_size != cfg_.arch.input_size)
    throw ConfigError("dataset images are " + std::to_string(ds.image_size) +
                      " px, the architecture expects " + std::to_string(cfg_.arch.input_size));

  std::vector<torch::Tensor> gen_params, disc_params;
  for (auto d : kDomains) {
    const auto i = static_cast<std::uint64_t>(idx(d));
    gens_[idx(d)] = build_generator(cfg_.arch, d, derive_seed(cfg_.seed, 10 + i));
    for (auto &p : gens_[idx(d)]->parameters()) gen_params.push_back(p);
    for (auto t : cfg_.arch.tasks) {
      if (!needs_discriminator(t)) continue;
      const auto salt = 20 + 8 * i + static_cast<std::uint64_t>(t);
      auto disc = build_discriminator(cfg_.arch, t, d, derive_seed(cfg_.seed, salt));
      for (auto &p : disc->parameters()) disc_params.push_back(p);
      discs_[idx(d)].emplace(t, std::move(disc));
    }
    refs_[idx(d)] = std::make_unique<ReferenceEncoder>(cfg_.arch, cfg_.alpha);
  }

  AdaptiveMomentOptions opt;
  opt.lr = cfg_.learning_rate;
  opt.kind = cfg_.optimizer;
  gen_opt_ = std::make_unique<AdaptiveMoment>(std::move(gen_params), opt);
  disc_opt_ = std::make_unique<AdaptiveMoment>(std::move(disc_params), opt);
  refresh_trainable();
}

std::vector<TaskId> Trainer::active_tasks() const {
  switch (cfg_.schedule) {
  case ScheduleKind::baseline:
    return {TaskId::translation};
  case ScheduleKind::parallel:
    return cfg_.arch.tasks;
  default:
    return {curriculum_.current_task()};
  }
}

Discriminator &Trainer::discriminator(Domain d, TaskId task) {
  auto &m = discs_[idx(d)];
  auto it = m.find(task);
  if (it == m.end())
    throw LookupError("domain " + std::string(domain_name(d)) + " has no discriminator for '" +
                      std::string(task_name(task)) + "'");
  return it->second;
}

void Trainer::refresh_trainable() {
  const auto active = active_tasks();
  auto is_active = [&](TaskId t) {
    return std::find(active.begin(), active.end(), t) != active.end();
  };
  for (auto d : kDomains) {
    auto &gen = gens_[idx(d)];
    set_trainable(*gen->encoder(), true);
    for (auto t : cfg_.arch.tasks) set_trainable(*gen->head(t), is_active(t));
    for (auto &[t, disc] : discs_[idx(d)]) set_trainable(*disc, is_active(t));
  }
}

std::vector<torch::Tensor> Trainer::generator_parameters() {
  std::vector<torch::Tensor> out;
  for (auto d : kDomains)
    for (auto &p : gens_[idx(d)]->parameters()) out.push_back(p);
  return out;
}

void Trainer::check_finite(const std::string &name, const torch::Tensor &t) const {
  if (!torch::isfinite(t).all().item<bool>())
    throw NumericError("non-finite value in '" + name + "' at step " + std::to_string(step_));
}

torch::Tensor Trainer::pretext_loss(Domain d, TaskId task, const torch::Tensor &x,
                                    const torch::Tensor &depth, LossTerms &terms,
                                    torch::Tensor *generated) {
  auto &gen = gens_[idx(d)];
  torch::Tensor loss;
  switch (task) {
  case TaskId::rotation: {
    auto labels = random_labels(sample_rng_, x.size(0), 4);
    loss = classification_loss(gen->head_forward(task, gen->encode(rotate_batch(x, labels))),
                               label_tensor(labels));
    break;
  }
  case TaskId::jigsaw: {
    auto ids = random_labels(sample_rng_, x.size(0), table_.size());
    loss = classification_loss(gen->head_forward(task, gen->encode(jigsaw_batch(x, ids, table_))),
                               label_tensor(ids));
    break;
  }
  case TaskId::depth:
    if (!depth.defined())
      throw DatasetError("domain " + std::string(domain_name(d)) + " batch has no depth labels");
    loss = depth_loss(gen->head_forward(task, gen->encode(x)), depth);
    break;
  case TaskId::colorization: {
    auto pred = gen->head_forward(task, gen->encode(grayify(x)));
    loss = colorization_loss(pred, x, discriminator(d, task), cfg_.gan);
    if (generated) *generated = pred.detach();
    break;
  }
  case TaskId::translation:
    throw StateError("translation loss is computed jointly for both domains");
  }
  check_finite(key(d, task), loss);
  terms[key(d, task)] = loss.item<double>();
  return loss;
}

LossTerms Trainer::train_step(const Batch &batch) {
  LossTerms terms;
  const auto active = active_tasks();
  const bool translating =
      std::find(active.begin(), active.end(), TaskId::translation) != active.end();

  // Discriminators are constants during the generator update.
  for (auto d : kDomains)
    for (auto &[t, disc] : discs_[idx(d)]) set_trainable(*disc, false);

  std::map<TaskId, torch::Tensor> losses[2];
  torch::Tensor fakes[2], colorized[2];

  for (auto d : kDomains) {
    const auto &x = batch.images(d);
    for (auto t : active) {
      if (t == TaskId::translation) continue;
      losses[idx(d)][t] = pretext_loss(d, t, x, batch.depth(d), terms, &colorized[idx(d)]);
    }
  }

  if (translating) {
    const auto tr = TaskId::translation;
    auto translate = [&](Domain to, const torch::Tensor &x) {
      auto &gen = gens_[idx(to)];
      return gen->head_forward(tr, gen->encode(x));
    };
    // fakes[d] is a domain-d image made from the other domain's batch.
    for (auto d : kDomains) fakes[idx(d)] = translate(d, batch.images(other(d)));
    for (auto d : kDomains) {
      const auto &x = batch.images(d);
      auto rec = translate(d, fakes[idx(other(d))]);
      auto idt = translate(d, x);
      auto gan = gan_generator_term(discriminator(d, tr)->forward(fakes[idx(d)]), cfg_.gan);
      auto idt_l = identity_loss(idt, x);
      auto cyc_l = cycle_loss(x, rec);
      auto obj = translation_objective(gan, idt_l, cyc_l, cfg_.lambda_idt, cfg_.lambda_cyc);
      check_finite(key(d, tr), obj);
      terms[key(d, "translation_gan")] = gan.item<double>();
      terms[key(d, "translation_idt")] = idt_l.item<double>();
      terms[key(d, "translation_cyc")] = cyc_l.item<double>();
      terms[key(d, tr)] = obj.item<double>();
      losses[idx(d)][tr] = obj;
    }
  }

  torch::Tensor total;
  for (auto d : kDomains) {
    auto &per_task = losses[idx(d)];
    torch::Tensor ld;
    switch (cfg_.schedule) {
    case ScheduleKind::parallel:
      ld = parallel_loss(specs_, per_task);
      break;
    case ScheduleKind::baseline:
      ld = sequential_loss(specs_, specs_.size() - 1, per_task.at(TaskId::translation));
      break;
    case ScheduleKind::sequential:
    case ScheduleKind::continual:
      ld = sequential_loss(specs_, curriculum_.current_index(),
                           per_task.at(curriculum_.current_task()));
      break;
    }
    auto &ref = *refs_[idx(d)];
    if (cfg_.schedule == ScheduleKind::continual && ref.active()) {
      torch::Tensor dist;
      if (cfg_.beta > 0.0) {
        dist = distillation_loss(ref, gens_[idx(d)]->encoder(), batch.images(d));
      } else {
        torch::NoGradGuard no_grad;
        dist = distillation_loss(ref, gens_[idx(d)]->encoder(), batch.images(d));
      }
      check_finite(key(d, "dist"), dist);
      terms[key(d, "dist")] = dist.item<double>();
      if (cfg_.beta > 0.0) ld = continual_loss(ld, dist, cfg_.beta);
    }
    total = total.defined() ? total + ld : ld;
  }

  gen_opt_->zero_grad();
  total.backward();
  gen_opt_->step();

  // Discriminator update on the detached generator outputs.
  torch::Tensor disc_total;
  for (auto d : kDomains) {
    for (auto t : active) {
      if (!needs_discriminator(t)) continue;
      const auto &fake = t == TaskId::translation ? fakes[idx(d)] : colorized[idx(d)];
      auto &disc = discriminator(d, t);
      set_trainable(*disc, true);
      auto l = gan_discriminator_term(disc->forward(batch.images(d)), disc->forward(fake.detach()),
                                      cfg_.gan);
      const auto name = key(d, "disc_") + std::string(task_name(t));
      check_finite(name, l);
      terms[name] = l.item<double>();
      disc_total = disc_total.defined() ? disc_total + l : l;
    }
  }
  if (disc_total.defined()) {
    disc_opt_->zero_grad();
    disc_total.backward();
    disc_opt_->step();
  }

  ++step_;
  if (translating) ++translation_steps_;
  return terms;
}

ValidationMetrics Trainer::validate() {
  std::vector<TaskId> pretext;
  for (auto t : cfg_.arch.tasks)
    if (t != TaskId::translation) pretext.push_back(t);
  return liss::validate(gens_[0], gens_[1], *ds_, pretext, table_, cfg_.jigsaw_val_perms);
}

void Trainer::transition() {
  curriculum_.advance(step_);
  if (cfg_.schedule == ScheduleKind::continual) {
    const auto k = static_cast<int>(curriculum_.current_index());
    for (auto d : kDomains) refs_[idx(d)]->update(snapshot_params(*gens_[idx(d)]->encoder()), k);
  }
  refresh_trainable();
}

TrainingLog Trainer::run() {
  if (cfg_.arch.has_task(TaskId::depth)) ds_->require_depth();

  TrainingLog log;
  log.schedule = cfg_.schedule;
  log.tasks = cfg_.arch.tasks;

  const bool to_disk = !cfg_.output_dir.empty();
  std::ofstream metrics_out, timing_out;
  if (to_disk) {
    fs::create_directories(cfg_.output_dir);
    metrics_out.open(cfg_.output_dir / "metrics.csv");
    timing_out.open(cfg_.output_dir / "timing.csv");
    if (!metrics_out || !timing_out)
      throw IoError("cannot write into " + cfg_.output_dir.string());
    metrics_out << metrics_header(log.tasks) << "\n";
    timing_out << "step,seconds_per_sample\n";
  }

  std::map<std::string, std::pair<double, std::int64_t>> window;
  double window_seconds = 0;
  std::int64_t window_samples = 0;

  auto record = [&] {
    MetricsRecord rec;
    rec.step = step_;
    rec.task = uses_curriculum(cfg_.schedule) ? curriculum_.current_task() : TaskId::translation;
    rec.metrics = validate();
    for (const auto &[k, v] : rec.metrics) curriculum_.record_metric(k.first, k.second, v);
    for (const auto &[name, acc] : window)
      rec.losses[name] = acc.first / static_cast<double>(acc.second);
    rec.seconds_per_sample =
        window_samples > 0 ? window_seconds / static_cast<double>(window_samples) : 0.0;
    if (to_disk) {
      metrics_out << format_metrics_row(cfg_.schedule, log.tasks, rec) << "\n";
      timing_out << rec.step << "," << format_double(rec.seconds_per_sample) << "\n";
      metrics_out.flush();
      timing_out.flush();
    }
    log.records.push_back(std::move(rec));
    window.clear();
    window_seconds = 0;
    window_samples = 0;
  };

  auto write_summaries = [&] {
    log.transitions = curriculum_.log();
    log.total_steps = step_;
    log.translation_steps = translation_steps_;
    if (!to_disk) return;
    std::ofstream csv(cfg_.output_dir / "transitions.csv");
    csv << format_transition_csv(cfg_.schedule, log.transitions);
    std::ofstream txt(cfg_.output_dir / "transitions.txt");
    txt << format_transition_table({{cfg_.schedule, log.transitions}});
  };

  auto checkpoint_dir = [&](const std::string &name) {
    return cfg_.output_dir / "checkpoints" / name;
  };

  record();
  while (translation_steps_ < cfg_.max_translation_steps) {
    auto batch = batches_.next();
    const auto t0 = std::chrono::steady_clock::now();
    auto terms = train_step(batch);
    window_seconds +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    window_samples += batch.a.size(0);
    for (const auto &[name, v] : terms) {
      auto &acc = window[name];
      acc.first += v;
      acc.second += 1;
    }

    const bool done = translation_steps_ >= cfg_.max_translation_steps;
    if (step_ % cfg_.validation_cadence != 0 && !done) continue;
    record();

    if (!uses_curriculum(cfg_.schedule) || curriculum_.at_final_task()) continue;
    const auto task = curriculum_.current_task();
    const auto &m = log.records.back().metrics;
    if (curriculum_.should_transition(m.at({Domain::A, task}), m.at({Domain::B, task}))) {
      transition();
      if (to_disk && cfg_.write_checkpoints)
        save_checkpoint(checkpoint_dir("step_" + std::to_string(step_)));
    } else if (step_ - curriculum_.task_start_step() >= cfg_.stall_budget) {
      write_summaries();
      throw StallError("task '" + std::string(task_name(task)) + "' did not reach its threshold " +
                       format_double(curriculum_.current_spec().threshold) + " within " +
                       std::to_string(cfg_.stall_budget) + " steps (A " +
                       format_double(m.at({Domain::A, task})) + ", B " +
                       format_double(m.at({Domain::B, task})) + ")");
    }
  }

  write_summaries();
  if (to_disk && cfg_.write_checkpoints) {
    log.final_checkpoint = checkpoint_dir("final");
    save_checkpoint(log.final_checkpoint);
  }
  return log;
}

// ---------------------------------------------------------------------------
// checkpoints

void Trainer::save_checkpoint(const fs::path &dir) {
  Checkpoint ckpt;
  auto &meta = ckpt.meta;
  meta["kind"] = "liss-trainer";
  meta["schedule"] = std::string(schedule_name(cfg_.schedule));
  meta["arch"] = arch_json(cfg_.arch);
  meta["step"] = step_;
  meta["translation_steps"] = translation_steps_;
  meta["seed"] = cfg_.seed;
  meta["alpha"] = cfg_.alpha;
  meta["beta"] = cfg_.beta;

  auto transitions = nlohmann::json::array();
  for (const auto &r : curriculum_.log())
    transitions.push_back(
        {{"task", std::string(task_name(r.task))}, {"start_step", r.start_step},
         {"end_step", r.end_step}});
  meta["transitions"] = transitions;

  auto perms = nlohmann::json::array();
  for (const auto &p : table_.permutations()) {
    std::string s;
    for (auto v : p) s += static_cast<char>('0' + v);
    perms.push_back(s);
  }
  meta["permutations"] = perms;

  for (auto d : kDomains) {
    const std::string dn(domain_name(d));
    add_prefixed(ckpt, "gen_" + dn + ".", snapshot_params(*gens_[idx(d)]));
    for (auto &[t, disc] : discs_[idx(d)])
      add_prefixed(ckpt, "disc_" + dn + "_" + std::string(task_name(t)) + ".",
                   snapshot_params(*disc));
    auto &ref = *refs_[idx(d)];
    meta["reference"][dn] = ref.active() ? ref.last_update_task() : 0;
    if (ref.active()) add_prefixed(ckpt, "ref_" + dn + ".", ref.params());
  }
  write_checkpoint(dir, ckpt);
}

void Trainer::load_checkpoint(const fs::path &dir) {
  const auto ckpt = read_checkpoint(dir);
  const auto &meta = ckpt.meta;
  if (meta.value("kind", "") != "liss-trainer")
    throw IncompatibleSnapshotError(dir.string() + " is not a trainer checkpoint");
  if (meta.at("arch") != arch_json(cfg_.arch))
    throw IncompatibleSnapshotError("checkpoint architecture " + meta.at("arch").dump() +
                                    " differs from the configured " +
                                    arch_json(cfg_.arch).dump());

  std::vector<TransitionRecord> log;
  for (const auto &r : meta.at("transitions"))
    log.push_back({parse_task(r.at("task").get<std::string>()),
                   r.at("start_step").get<std::int64_t>(), r.at("end_step").get<std::int64_t>()});

  for (auto d : kDomains) {
    const std::string dn(domain_name(d));
    load_params(*gens_[idx(d)], strip_prefix(ckpt, "gen_" + dn + "."));
    for (auto &[t, disc] : discs_[idx(d)])
      load_params(*disc, strip_prefix(ckpt, "disc_" + dn + "_" + std::string(task_name(t)) + "."));
    const int last = meta.at("reference").at(dn).get<int>();
    if (last > 0) refs_[idx(d)]->restore(strip_prefix(ckpt, "ref_" + dn + "."), last);
  }
  curriculum_.restore(log);
  step_ = meta.at("step").get<std::int64_t>();
  translation_steps_ = meta.at("translation_steps").get<std::int64_t>();
  refresh_trainable();
}

TrainingLog run(const TrainConfig &cfg, const UnpairedDataset &ds) {
  Trainer trainer(cfg, ds);
  return trainer.run();
}

// ---------------------------------------------------------------------------
// forgetting

ForgettingReport forgetting_report(const TrainingLog &log, TaskId task) {
  if (task == TaskId::translation)
    throw LookupError("translation has no validation metric to track");
  if (std::find(log.tasks.begin(), log.tasks.end(), task) == log.tasks.end())
    throw LookupError("task '" + std::string(task_name(task)) + "' is not in the run");
  if (log.schedule == ScheduleKind::baseline)
    throw StateError("the baseline schedule never trains '" + std::string(task_name(task)) + "'");

  std::vector<const MetricsRecord *> trained;
  for (const auto &r : log.records)
    if (r.step > 0 && (log.schedule == ScheduleKind::parallel || r.task == task))
      trained.push_back(&r);
  if (trained.empty())
    throw StateError("task '" + std::string(task_name(task)) + "' was never trained");

  const bool accuracy = is_classification(task);
  ForgettingReport rep;
  rep.task = task;
  for (auto d : kDomains) {
    const int i = idx(d);
    double peak = trained.front()->metrics.at({d, task});
    for (const auto *r : trained) {
      const double v = r->metrics.at({d, task});
      peak = accuracy ? std::max(peak, v) : std::min(peak, v);
    }
    const double fin = log.records.back().metrics.at({d, task});
    rep.peak[i] = peak;
    rep.final_value[i] = fin;
    const double num = accuracy ? fin : peak;
    const double den = accuracy ? peak : fin;
    rep.retention[i] = den > 0 ? num / den : (num == 0 ? 1.0 : std::numeric_limits<double>::infinity());
  }
  rep.mean_peak = 0.5 * (rep.peak[0] + rep.peak[1]);
  rep.mean_final = 0.5 * (rep.final_value[0] + rep.final_value[1]);
  rep.mean_retention = 0.5 * (rep.retention[0] + rep.retention[1]);
  return rep;
}

} // namespace liss

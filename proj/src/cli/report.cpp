#include <cstdio>
#include <fstream>
#include <iostream>

#include "liss/cli.hpp"
#include "liss/errors.hpp"

namespace liss {

namespace fs = std::filesystem;

namespace {

std::string cell(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string pad(const std::string &s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

void ensure_dir(const fs::path &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw IoError("cannot create directory " + dir.string() + (ec ? ": " + ec.message() : ""));
}

void write_text(const fs::path &file, const std::string &text) {
  std::ofstream out(file, std::ios::trunc);
  out << text;
  if (!out) throw IoError("cannot write " + file.string());
}

} // namespace

UnpairedDataset make_dataset(const ExperimentConfig &cfg) {
  if (cfg.dataset == DatasetSource::synthetic) {
    SynthConfig sc = cfg.synth;
    sc.seed = cfg.train.seed;
    sc.count_per_domain = cfg.synth_count;
    sc.image_size = cfg.train.arch.input_size;
    sc.val_fraction = cfg.split_fraction;
    return synth_generate(sc).data;
  }
  LoadOptions opt;
  opt.image_size = cfg.train.arch.input_size;
  opt.split_fraction = cfg.split_fraction;
  opt.seed = cfg.train.seed;
  return load_unpaired_dataset(cfg.data_a, cfg.data_b, cfg.depth_dir, opt);
}

std::string format_comparison(const std::vector<std::pair<ScheduleKind, TrainingLog>> &runs) {
  std::string out;
  if (runs.empty()) return out;
  const bool deltas = runs.size() > 1;

  std::vector<std::string> header{"Task", "Schedule", "Peak_A", "Peak_B", "Final_A", "Final_B",
                                  "Retention"};
  if (deltas) header.push_back("Delta");
  const std::size_t w = 14;
  for (const auto &h : header) out += pad(h, w);
  out += "\n";

  for (auto task : runs.front().second.tasks) {
    if (task == TaskId::translation) continue;
    std::optional<double> first_retention;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const auto &[kind, log] = runs[i];
      std::vector<std::string> row{std::string(task_name(task)), std::string(schedule_name(kind))};
      std::optional<ForgettingReport> rep;
      try {
        rep = forgetting_report(log, task);
      } catch (const StateError &) {
      }
      if (rep) {
        row.push_back(cell(rep->peak[0]));
        row.push_back(cell(rep->peak[1]));
        row.push_back(cell(rep->final_value[0]));
        row.push_back(cell(rep->final_value[1]));
        row.push_back(cell(rep->mean_retention));
      } else {
        row.insert(row.end(), {"-", "-"});
        for (auto d : kDomains) {
          const auto &recs = log.records;
          row.push_back(recs.empty() ? "-" : cell(recs.back().metrics.at({d, task})));
        }
        row.push_back("-");
      }
      if (deltas) {
        if (i == 0) {
          row.push_back("");
          if (rep) first_retention = rep->mean_retention;
        } else if (rep && first_retention) {
          const double delta = rep->mean_retention - *first_retention;
          row.push_back((delta >= 0 ? "+" : "") + cell(delta));
        } else {
          row.push_back("-");
        }
      }
      for (const auto &c : row) out += pad(c, w);
      out += "\n";
    }
  }

  std::vector<std::pair<ScheduleKind, std::vector<TransitionRecord>>> tables;
  for (const auto &[kind, log] : runs)
    if (uses_curriculum(kind)) tables.emplace_back(kind, log.transitions);
  if (!tables.empty()) out += "\n" + format_transition_table(tables);
  return out;
}

std::vector<fs::path> emit_series(const TrainingLog &log, const fs::path &dir) {
  std::vector<fs::path> files;
  if (log.records.empty()) {
    std::cerr << "warning: training log has no validation records; no series written\n";
    return files;
  }
  ensure_dir(dir);
  for (auto task : log.tasks) {
    if (task == TaskId::translation) continue;
    for (auto d : kDomains) {
      const auto file = dir / (metric_column_name(d, task) + ".csv");
      std::string text = "step,value\n";
      for (const auto &r : log.records) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%lld,%.9g\n", static_cast<long long>(r.step),
                      r.metrics.at({d, task}));
        text += buf;
      }
      write_text(file, text);
      files.push_back(file);
    }
  }
  return files;
}

ComparisonReport run_comparison(const ExperimentConfig &cfg) {
  cfg.validate();
  ensure_dir(cfg.out);
  write_text(cfg.out / "config.resolved.txt", format_config(cfg));

  const auto ds = make_dataset(cfg);
  ComparisonReport report;
  for (auto kind : cfg.schedules) {
    auto tc = cfg.train;
    tc.schedule = kind;
    tc.output_dir = cfg.out / std::string(schedule_name(kind));
    auto log = run(tc, ds);
    emit_series(log, tc.output_dir / "series");
    report.runs.emplace_back(kind, std::move(log));
  }
  report.text = format_comparison(report.runs);
  write_text(cfg.out / "comparison.txt", report.text);
  return report;
}

} // namespace liss

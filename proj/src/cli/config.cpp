#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "liss/cli.hpp"
#include "liss/errors.hpp"

namespace liss {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void type_error(const std::string &key, const char *type, const std::string &value) {
  throw ConfigError("key '" + key + "' expects " + type + ", got '" + value + "'");
}

template <typename T> T parse_integer(const std::string &key, const std::string &v) {
  T out{};
  const auto *end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (v.empty() || ec != std::errc() || p != end) type_error(key, "an integer", v);
  return out;
}

double parse_real(const std::string &key, const std::string &v) {
  double out = 0;
  const auto *end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (v.empty() || ec != std::errc() || p != end) type_error(key, "a number", v);
  return out;
}

bool parse_bool(const std::string &key, const std::string &v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  type_error(key, "a boolean (true/false)", v);
}

std::string real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename F> auto as(const std::string &key, const char *type, F &&parse) {
  try {
    return parse();
  } catch (const LookupError &e) {
    throw ConfigError("key '" + key + "' expects " + type + ": " + e.what());
  }
}

struct KeySpec {
  std::string name;
  std::function<void(ExperimentConfig &, const std::string &)> set;
  std::function<std::string(const ExperimentConfig &)> get;
};

std::string schedule_list(const std::vector<ScheduleKind> &v) {
  std::string out;
  for (auto s : v) out += (out.empty() ? "" : ",") + std::string(schedule_name(s));
  return out;
}

std::vector<ScheduleKind> parse_schedules(const std::string &key, const std::string &v) {
  if (v == "all")
    return {ScheduleKind::baseline, ScheduleKind::parallel, ScheduleKind::sequential,
            ScheduleKind::continual};
  std::vector<ScheduleKind> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(as(key, "a schedule list", [&] { return parse_schedule(item); }));
  }
  return out;
}

const std::vector<KeySpec> &registry() {
  static const std::vector<KeySpec> specs = [] {
    std::vector<KeySpec> r;
    auto add = [&](std::string name, auto set, auto get) {
      r.push_back({std::move(name), set, get});
    };

    add("schedule",
        [](ExperimentConfig &c, const std::string &v) { c.schedules = parse_schedules("schedule", v); },
        [](const ExperimentConfig &c) { return schedule_list(c.schedules); });
    add("dataset",
        [](ExperimentConfig &c, const std::string &v) {
          if (v == "synthetic") c.dataset = DatasetSource::synthetic;
          else if (v == "paths") c.dataset = DatasetSource::paths;
          else type_error("dataset", "one of synthetic, paths", v);
        },
        [](const ExperimentConfig &c) {
          return std::string(c.dataset == DatasetSource::synthetic ? "synthetic" : "paths");
        });
    add("data.a", [](ExperimentConfig &c, const std::string &v) { c.data_a = v; },
        [](const ExperimentConfig &c) { return c.data_a.string(); });
    add("data.b", [](ExperimentConfig &c, const std::string &v) { c.data_b = v; },
        [](const ExperimentConfig &c) { return c.data_b.string(); });
    add("data.depth_dir",
        [](ExperimentConfig &c, const std::string &v) {
          if (v.empty()) c.depth_dir.reset();
          else c.depth_dir = v;
        },
        [](const ExperimentConfig &c) { return c.depth_dir ? c.depth_dir->string() : ""; });
    add("data.split_fraction",
        [](ExperimentConfig &c, const std::string &v) {
          c.split_fraction = parse_real("data.split_fraction", v);
        },
        [](const ExperimentConfig &c) { return real(c.split_fraction); });
    add("data.synth_count",
        [](ExperimentConfig &c, const std::string &v) {
          c.synth_count = parse_integer<int>("data.synth_count", v);
        },
        [](const ExperimentConfig &c) { return std::to_string(c.synth_count); });
    add("data.synth_vertical_min",
        [](ExperimentConfig &c, const std::string &v) {
          c.synth.vertical_min = parse_real("data.synth_vertical_min", v);
        },
        [](const ExperimentConfig &c) { return real(c.synth.vertical_min); });
    add("data.synth_vertical_max",
        [](ExperimentConfig &c, const std::string &v) {
          c.synth.vertical_max = parse_real("data.synth_vertical_max", v);
        },
        [](const ExperimentConfig &c) { return real(c.synth.vertical_max); });
    add("data.synth_horizontal_min",
        [](ExperimentConfig &c, const std::string &v) {
          c.synth.horizontal_min = parse_real("data.synth_horizontal_min", v);
        },
        [](const ExperimentConfig &c) { return real(c.synth.horizontal_min); });
    add("data.synth_horizontal_max",
        [](ExperimentConfig &c, const std::string &v) {
          c.synth.horizontal_max = parse_real("data.synth_horizontal_max", v);
        },
        [](const ExperimentConfig &c) { return real(c.synth.horizontal_max); });
    add("data.synth_noise",
        [](ExperimentConfig &c, const std::string &v) {
          c.synth.noise = parse_real("data.synth_noise", v);
        },
        [](const ExperimentConfig &c) { return real(c.synth.noise); });

    add("arch.size",
        [](ExperimentConfig &c, const std::string &v) {
          c.train.arch.input_size = parse_integer<int>("arch.size", v);
        },
        [](const ExperimentConfig &c) { return std::to_string(c.train.arch.input_size); });
    add("arch.base_channels",
        [](ExperimentConfig &c, const std::string &v) {
          c.train.arch.base_channels = parse_integer<int>("arch.base_channels", v);
        },
        [](const ExperimentConfig &c) { return std::to_string(c.train.arch.base_channels); });
    add("arch.residual_blocks",
        [](ExperimentConfig &c, const std::string &v) {
          c.train.arch.n_residual_blocks = parse_integer<int>("arch.residual_blocks", v);
        },
        [](const ExperimentConfig &c) { return std::to_string(c.train.arch.n_residual_blocks); });
    add("arch.tasks",
        [](ExperimentConfig &c, const std::string &v) {
          c.train.arch.tasks = as("arch.tasks", "a task list", [&] { return parse_task_list(v); });
        },
        [](const ExperimentConfig &c) { return format_task_list(c.train.arch.tasks); });

    auto add_real = [&](std::string name, double TrainConfig::*field) {
      add(
          name,
          [name, field](ExperimentConfig &c, const std::string &v) {
            c.train.*field = parse_real(name, v);
          },
          [field](const ExperimentConfig &c) { return real(c.train.*field); });
    };
    auto add_i64 = [&](std::string name, std::int64_t TrainConfig::*field) {
      add(
          name,
          [name, field](ExperimentConfig &c, const std::string &v) {
            c.train.*field = parse_integer<std::int64_t>(name, v);
          },
          [field](const ExperimentConfig &c) { return std::to_string(c.train.*field); });
    };
    auto add_int = [&](std::string name, int TrainConfig::*field) {
      add(
          name,
          [name, field](ExperimentConfig &c, const std::string &v) {
            c.train.*field = parse_integer<int>(name, v);
          },
          [field](const ExperimentConfig &c) { return std::to_string(c.train.*field); });
    };
    auto add_u64 = [&](std::string name, std::uint64_t TrainConfig::*field) {
      add(
          name,
          [name, field](ExperimentConfig &c, const std::string &v) {
            c.train.*field = parse_integer<std::uint64_t>(name, v);
          },
          [field](const ExperimentConfig &c) { return std::to_string(c.train.*field); });
    };

    add_real("train.lr", &TrainConfig::learning_rate);
    add_int("train.batch", &TrainConfig::batch_size);
    add_int("train.parallel_batch", &TrainConfig::parallel_batch_size);
    add_i64("train.steps", &TrainConfig::max_translation_steps);
    add_real("train.alpha", &TrainConfig::alpha);
    add_real("train.beta", &TrainConfig::beta);
    add_real("train.lambda_idt", &TrainConfig::lambda_idt);
    add_real("train.lambda_cyc", &TrainConfig::lambda_cyc);
    add_i64("train.cadence", &TrainConfig::validation_cadence);
    add_i64("train.stall_budget", &TrainConfig::stall_budget);
    add_u64("train.seed", &TrainConfig::seed);
    add_u64("train.permutation_seed", &TrainConfig::permutation_seed);
    add_int("train.jigsaw_val_perms", &TrainConfig::jigsaw_val_perms);
    add("train.permutation_file",
        [](ExperimentConfig &c, const std::string &v) {
          if (v.empty()) c.train.permutation_file.reset();
          else c.train.permutation_file = v;
        },
        [](const ExperimentConfig &c) {
          return c.train.permutation_file ? c.train.permutation_file->string() : "";
        });
    add("train.optimizer",
        [](ExperimentConfig &c, const std::string &v) {
          c.train.optimizer =
              as("train.optimizer", "radam or adam", [&] { return parse_optimizer(v); });
        },
        [](const ExperimentConfig &c) { return std::string(optimizer_name(c.train.optimizer)); });
    add("train.gan",
        [](ExperimentConfig &c, const std::string &v) {
          if (v == "log") c.train.gan = GanMode::log;
          else if (v == "least_squares") c.train.gan = GanMode::least_squares;
          else type_error("train.gan", "one of log, least_squares", v);
        },
        [](const ExperimentConfig &c) {
          return std::string(c.train.gan == GanMode::log ? "log" : "least_squares");
        });
    add("train.checkpoints",
        [](ExperimentConfig &c, const std::string &v) {
          c.train.write_checkpoints = parse_bool("train.checkpoints", v);
        },
        [](const ExperimentConfig &c) {
          return std::string(c.train.write_checkpoints ? "true" : "false");
        });

    for (auto t : kAllTasks) {
      const auto lname = "lambda." + std::string(task_name(t));
      add(
          lname,
          [lname, t](ExperimentConfig &c, const std::string &v) {
            if (v.empty()) c.train.lambda.erase(t);
            else c.train.lambda[t] = parse_real(lname, v);
          },
          [t](const ExperimentConfig &c) {
            auto it = c.train.lambda.find(t);
            return it == c.train.lambda.end() ? std::string() : real(it->second);
          });
    }
    for (auto t : kAllTasks) {
      if (t == TaskId::translation) continue;
      const auto tname = "threshold." + std::string(task_name(t));
      add(
          tname,
          [tname, t](ExperimentConfig &c, const std::string &v) {
            if (v.empty()) c.train.thresholds.erase(t);
            else c.train.thresholds[t] = parse_real(tname, v);
          },
          [t](const ExperimentConfig &c) {
            auto it = c.train.thresholds.find(t);
            return it == c.train.thresholds.end() ? std::string() : real(it->second);
          });
    }

    add("out", [](ExperimentConfig &c, const std::string &v) { c.out = v; },
        [](const ExperimentConfig &c) { return c.out.string(); });
    return r;
  }();
  return specs;
}

} // namespace

void ExperimentConfig::validate() const {
  if (schedules.empty()) throw ConfigError("no schedule selected");
  if (!(split_fraction > 0.0 && split_fraction < 1.0))
    throw ConfigError("data.split_fraction must lie in (0, 1)");
  if (synth_count < 2) throw ConfigError("data.synth_count must be at least 2");
  if (synth.noise < 0) throw ConfigError("data.synth_noise must be non-negative");
  if (synth.vertical_min > synth.vertical_max || synth.horizontal_min > synth.horizontal_max)
    throw ConfigError("synthetic gradient minimum exceeds its maximum");
  if (out.empty()) throw ConfigError("out must not be empty");
  for (auto s : schedules) {
    auto t = train;
    t.schedule = s;
    t.validate();
  }
  if (dataset == DatasetSource::paths) {
    if (data_a.empty() || data_b.empty())
      throw ConfigError("dataset 'paths' needs data.a and data.b");
    for (const auto &p : {data_a, data_b})
      if (!fs::is_directory(p)) throw DatasetError("no such directory: " + p.string());
    if (depth_dir && !fs::is_directory(*depth_dir))
      throw DatasetError("no such directory: " + depth_dir->string());
  }
  if (train.permutation_file && !fs::exists(*train.permutation_file))
    throw DatasetError("no such file: " + train.permutation_file->string());
}

KeyValues parse_key_values(const std::string &text) {
  KeyValues out;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(std::move(key), trim(line.substr(eq + 1)));
  }
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto &k : registry()) out.push_back(k.name);
  return out;
}

void apply_setting(ExperimentConfig &cfg, const std::string &key, const std::string &value) {
  for (const auto &k : registry()) {
    if (k.name != key) continue;
    k.set(cfg, value);
    return;
  }
  std::string valid;
  for (const auto &k : registry()) valid += (valid.empty() ? "" : ", ") + k.name;
  throw ConfigError("unknown key '" + key + "'; valid keys: " + valid);
}

ExperimentConfig parse_config(const std::optional<fs::path> &file, const KeyValues &overrides) {
  ExperimentConfig cfg;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw IoError("cannot read config file " + file->string());
    std::stringstream buf;
    buf << in.rdbuf();
    for (const auto &[k, v] : parse_key_values(buf.str())) apply_setting(cfg, k, v);
  }
  for (const auto &[k, v] : overrides) apply_setting(cfg, k, v);
  cfg.validate();
  return cfg;
}

std::string format_config(const ExperimentConfig &cfg) {
  std::string out;
  for (const auto &k : registry()) out += k.name + " = " + k.get(cfg) + "\n";
  return out;
}

} // namespace liss

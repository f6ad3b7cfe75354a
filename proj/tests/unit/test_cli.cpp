#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "liss/cli.hpp"
#include "liss/errors.hpp"

using namespace liss;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name) {
  auto p = fs::temp_directory_path() / ("liss_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string error_of(const std::function<void()> &f) {
  try {
    f();
  } catch (const ConfigError &e) {
    return e.what();
  }
  return "";
}

} // namespace

TEST(Config, DefaultsWithoutFileOrFlags) {
  auto c = parse_config(std::nullopt, {});
  EXPECT_EQ(c.train.learning_rate, 0.0005);
  EXPECT_EQ(c.train.alpha, 0.5);
  EXPECT_EQ(c.train.batch_size, 5);
  for (const auto &s : c.train.task_specs()) {
    EXPECT_EQ(s.weight, 1.0);
    EXPECT_EQ(s.threshold, is_classification(s.id) ? 0.85 : 0.15);
  }
  EXPECT_EQ(c.schedules, std::vector<ScheduleKind>{ScheduleKind::continual});
  EXPECT_EQ(c.dataset, DatasetSource::synthetic);
}

TEST(Config, FlagsSelectContinualWithZeroBeta) {
  auto c = parse_config(std::nullopt, {{"schedule", "continual"}, {"train.beta", "0"}});
  EXPECT_EQ(c.schedules, std::vector<ScheduleKind>{ScheduleKind::continual});
  EXPECT_EQ(c.train.beta, 0.0);
}

TEST(Config, AlphaOutOfRange) {
  EXPECT_THROW(parse_config(std::nullopt, {{"train.alpha", "1.5"}}), ConfigError);
}

TEST(Config, UnknownKeyListsValidKeys) {
  auto msg = error_of([] { parse_config(std::nullopt, {{"train.momentum", "0.9"}}); });
  EXPECT_NE(msg.find("train.momentum"), std::string::npos);
  EXPECT_NE(msg.find("train.lr"), std::string::npos);
  EXPECT_NE(msg.find("train.beta"), std::string::npos);
}

TEST(Config, TypeMismatchNamesKeyAndType) {
  auto msg = error_of([] { parse_config(std::nullopt, {{"train.batch", "five"}}); });
  EXPECT_NE(msg.find("train.batch"), std::string::npos);
  EXPECT_NE(msg.find("integer"), std::string::npos);
  msg = error_of([] { parse_config(std::nullopt, {{"train.lr", "1e-3x"}}); });
  EXPECT_NE(msg.find("number"), std::string::npos);
  msg = error_of([] { parse_config(std::nullopt, {{"train.optimizer", "sgd"}}); });
  EXPECT_NE(msg.find("train.optimizer"), std::string::npos);
}

TEST(Config, FileThenFlagsPrecedence) {
  auto dir = scratch("prec");
  {
    std::ofstream(dir / "c.txt") << "# comment\ntrain.lr = 0.001\ntrain.batch = 4  # trailing\n\n"
                                    "schedule = sequential, continual\n";
  }
  auto c = parse_config(dir / "c.txt", {{"train.batch", "2"}});
  EXPECT_EQ(c.train.learning_rate, 0.001);
  EXPECT_EQ(c.train.batch_size, 2);
  EXPECT_EQ(c.schedules, (std::vector<ScheduleKind>{ScheduleKind::sequential, ScheduleKind::continual}));
  fs::remove_all(dir);
}

TEST(Config, MalformedLine) {
  EXPECT_THROW(parse_key_values("train.lr 0.1\n"), ConfigError);
  EXPECT_THROW(parse_key_values(" = 3\n"), ConfigError);
}

TEST(Config, ResolvedEchoRoundTrips) {
  auto c = parse_config(std::nullopt, {{"schedule", "all"},
                                       {"train.lr", "0.00031"},
                                       {"lambda.depth", "2.5"},
                                       {"threshold.rotation", "0.9"},
                                       {"arch.tasks", "rotation,depth,translation"},
                                       {"train.gan", "least_squares"}});
  auto text = format_config(c);
  ExperimentConfig back;
  for (const auto &[k, v] : parse_key_values(text)) apply_setting(back, k, v);
  EXPECT_EQ(format_config(back), text);
  EXPECT_EQ(back.schedules.size(), 4u);
  EXPECT_EQ(back.train.lambda.at(TaskId::depth), 2.5);
  EXPECT_EQ(back.train.learning_rate, 0.00031);
  for (const auto &k : config_keys()) EXPECT_NE(text.find(k + " ="), std::string::npos) << k;
}

TEST(Config, PathsMustExist) {
  EXPECT_THROW(parse_config(std::nullopt, {{"dataset", "paths"}}), ConfigError);
  EXPECT_THROW(parse_config(std::nullopt, {{"dataset", "paths"},
                                           {"data.a", "/nonexistent/a"},
                                           {"data.b", "/nonexistent/b"}}),
               DatasetError);
}

TEST(Config, EmptyScheduleList) {
  EXPECT_THROW(parse_config(std::nullopt, {{"schedule", ""}}), ConfigError);
}

// --- series --------------------------------------------------------------------

namespace {

TrainingLog fake_log(std::vector<TaskId> tasks) {
  TrainingLog log;
  log.schedule = ScheduleKind::sequential;
  log.tasks = std::move(tasks);
  for (std::int64_t step : {0, 100, 200}) {
    MetricsRecord r;
    r.step = step;
    r.task = log.tasks.front();
    for (auto t : log.tasks)
      if (t != TaskId::translation)
        for (auto d : kDomains) r.metrics[{d, t}] = 0.001 * static_cast<double>(step);
    log.records.push_back(r);
  }
  return log;
}

} // namespace

TEST(Series, OneFilePerDomainAndHead) {
  auto dir = scratch("series");
  auto log = fake_log({TaskId::rotation, TaskId::jigsaw, TaskId::depth, TaskId::colorization,
                       TaskId::translation});
  auto files = emit_series(log, dir / "s");
  EXPECT_EQ(files.size(), 4u * 2u);
  auto text = slurp(dir / "s" / "B_depth_l1.csv");
  EXPECT_EQ(text, "step,value\n0,0\n100,0.1\n200,0.2\n");
  fs::remove_all(dir);
}

TEST(Series, EmptyLogWritesNothing) {
  auto dir = scratch("empty");
  TrainingLog log;
  log.tasks = {TaskId::rotation, TaskId::translation};
  EXPECT_TRUE(emit_series(log, dir / "s").empty());
  EXPECT_FALSE(fs::exists(dir / "s"));
  fs::remove_all(dir);
}

TEST(Series, UnwritablePath) {
  auto dir = scratch("unwritable");
  {
    std::ofstream(dir / "file") << "x";
  }
  EXPECT_THROW(emit_series(fake_log({TaskId::rotation, TaskId::translation}), dir / "file" / "s"),
               IoError);
  fs::remove_all(dir);
}

// --- comparison ----------------------------------------------------------------

TEST(Comparison, SingleScheduleOmitsDeltas) {
  auto text = format_comparison({{ScheduleKind::sequential, fake_log({TaskId::rotation, TaskId::translation})}});
  EXPECT_EQ(text.find("Delta"), std::string::npos);
  EXPECT_NE(text.find("Retention"), std::string::npos);
  EXPECT_NE(text.find("Start_Step"), std::string::npos);
}

TEST(Comparison, EndToEndOnSyntheticData) {
  auto dir = scratch("e2e");
  auto cfg = parse_config(std::nullopt, {{"schedule", "sequential,continual"},
                                         {"arch.size", "32"},
                                         {"arch.base_channels", "4"},
                                         {"arch.residual_blocks", "1"},
                                         {"arch.tasks", "rotation,translation"},
                                         {"threshold.rotation", "0"},
                                         {"data.synth_count", "16"},
                                         {"data.split_fraction", "0.25"},
                                         {"train.batch", "2"},
                                         {"train.steps", "2"},
                                         {"train.cadence", "2"},
                                         {"train.checkpoints", "false"},
                                         {"out", (dir / "out").string()}});
  auto report = run_comparison(cfg);
  ASSERT_EQ(report.runs.size(), 2u);
  EXPECT_NE(report.text.find("Delta"), std::string::npos);
  EXPECT_NE(report.text.find("Sequential"), std::string::npos);
  EXPECT_NE(report.text.find("Continual"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "out" / "comparison.txt"));
  EXPECT_TRUE(fs::exists(dir / "out" / "continual" / "metrics.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "sequential" / "series" / "A_rotation_acc.csv"));

  // rerunning from the echoed config reproduces the metrics file
  const auto first = slurp(dir / "out" / "continual" / "metrics.csv");
  auto again = parse_config(dir / "out" / "config.resolved.txt", {{"schedule", "continual"}});
  run_comparison(again);
  EXPECT_EQ(slurp(dir / "out" / "continual" / "metrics.csv"), first);
  fs::remove_all(dir);
}

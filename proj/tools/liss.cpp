#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "liss/cli.hpp"
#include "liss/errors.hpp"

namespace {

int fail(const std::string &kind, const std::string &message) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << std::endl;
  return 1;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Multi-task CycleGAN trainer with self-supervised pretext curricula"};

  std::optional<std::string> config_file;
  app.add_option("--config", config_file, "key = value settings file");

  // Each flag maps onto a config key and is applied after the file.
  const std::pair<const char *, const char *> flags[] = {
      {"--schedule", "schedule"},   {"--dataset", "dataset"},  {"--data-a", "data.a"},
      {"--data-b", "data.b"},       {"--depth-dir", "data.depth_dir"},
      {"--size", "arch.size"},      {"--steps", "train.steps"}, {"--seed", "train.seed"},
      {"--alpha", "train.alpha"},   {"--beta", "train.beta"},  {"--lr", "train.lr"},
      {"--batch", "train.batch"},   {"--out", "out"},
  };
  std::map<std::string, std::optional<std::string>> values;
  for (const auto &[flag, key] : flags)
    app.add_option(flag, values[key], std::string("sets ") + key);

  std::vector<std::string> sets;
  app.add_option("--set", sets, "extra key=value override (repeatable)");
  bool list_keys = false;
  app.add_flag("--list-keys", list_keys, "print every config key and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    return fail("usage", e.what());
  }

  try {
    if (list_keys) {
      for (const auto &k : liss::config_keys()) std::cout << k << "\n";
      return 0;
    }
    liss::KeyValues overrides;
    for (const auto &s : sets) {
      const auto kv = liss::parse_key_values(s);
      if (kv.size() != 1) throw liss::ConfigError("--set expects key=value, got '" + s + "'");
      overrides.push_back(kv.front());
    }
    for (const auto &[flag, key] : flags)
      if (values[key]) overrides.emplace_back(key, *values[key]);

    const auto cfg = liss::parse_config(
        config_file ? std::optional<std::filesystem::path>(*config_file) : std::nullopt, overrides);
    const auto report = liss::run_comparison(cfg);
    std::cout << report.text;
    std::cout << "outputs written to " << cfg.out.string() << "\n";
  } catch (const liss::Error &e) {
    return fail(e.kind(), e.what());
  } catch (const std::exception &e) {
    return fail("internal", e.what());
  }
  return 0;
}

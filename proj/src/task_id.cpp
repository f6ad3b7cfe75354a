#include "liss/task_id.hpp"

#include <sstream>

#include "liss/errors.hpp"

namespace liss {

std::string_view task_name(TaskId id) {
  switch (id) {
  case TaskId::rotation:
    return "rotation";
  case TaskId::jigsaw:
    return "jigsaw";
  case TaskId::depth:
    return "depth";
  case TaskId::colorization:
    return "colorization";
  case TaskId::translation:
    return "translation";
  }
  return "unknown";
}

TaskId parse_task(std::string_view name) {
  for (auto id : kAllTasks) {
    if (task_name(id) == name) return id;
  }
  throw LookupError("unknown task '" + std::string(name) +
                    "' (expected rotation, jigsaw, depth, colorization or translation)");
}

std::string_view domain_name(Domain d) { return d == Domain::A ? "A" : "B"; }

bool is_classification(TaskId id) { return id == TaskId::rotation || id == TaskId::jigsaw; }

bool needs_discriminator(TaskId id) {
  return id == TaskId::colorization || id == TaskId::translation;
}

std::vector<TaskId> parse_task_list(std::string_view list) {
  std::vector<TaskId> out;
  std::string item;
  std::istringstream in{std::string(list)};
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(parse_task(item.substr(b, e - b + 1)));
  }
  return out;
}

std::string format_task_list(const std::vector<TaskId> &tasks) {
  std::string out;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (i) out += ',';
    out += task_name(tasks[i]);
  }
  return out;
}

} // namespace liss

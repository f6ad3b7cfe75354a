#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace liss {

/// Task identifiers in curriculum order. The numeric value is the task index
/// used throughout (rotation is first, translation is always last).
enum class TaskId : int {
  rotation = 0,
  jigsaw = 1,
  depth = 2,
  colorization = 3,
  translation = 4,
};

inline constexpr std::array<TaskId, 5> kAllTasks = {
    TaskId::rotation, TaskId::jigsaw, TaskId::depth, TaskId::colorization,
    TaskId::translation};

enum class Domain : int { A = 0, B = 1 };

inline constexpr std::array<Domain, 2> kDomains = {Domain::A, Domain::B};

inline Domain other(Domain d) { return d == Domain::A ? Domain::B : Domain::A; }

std::string_view task_name(TaskId id);
/// Throws LookupError on unknown names.
TaskId parse_task(std::string_view name);
std::string_view domain_name(Domain d);

bool is_classification(TaskId id);
/// Tasks whose head emits an image-shaped output and that train against a
/// discriminator.
bool needs_discriminator(TaskId id);

/// Parses a comma-separated task list such as "rotation,jigsaw,translation".
std::vector<TaskId> parse_task_list(std::string_view list);
std::string format_task_list(const std::vector<TaskId> &tasks);

} // namespace liss

#pragma once

#include <memory>
#include <string>

#include "json.hpp"

#include "ehfl/tasks.hpp"

namespace ehfl {

/// Self-describing artifact: kind, dimensions, constants (L, f*, x*), data and partition.
nlohmann::json task_to_json(const Task& task);
/// Constants only (no data, no partition); the data is regenerable from the config.
nlohmann::json task_summary_json(const Task& task);
/// Rebuilds a task without re-solving for its optimum.
std::unique_ptr<Task> task_from_json(const nlohmann::json& j);

void save_task(const std::string& path, const Task& task);
std::unique_ptr<Task> load_task(const std::string& path);

}  // namespace ehfl

#pragma once

#include <string>
#include <string_view>

namespace evomd {

// Forecasting task kinds. potential_k shares forward_1 geometry (one target)
// but is scored over ranked candidate lists.
enum class Task { forward_1, forward_2, backward, potential_k };

std::string_view task_name(Task task);
Task task_from_name(std::string_view name);

// Number of target events a sample of this task carries.
int target_count(Task task);

}  // namespace evomd

#pragma once

#include <string>

#include "nmpsim/mapper.hpp"

namespace nmpsim {

/// Serializes a mapping plan for inspection and replay.
std::string plan_to_json(const MappingPlan& plan);
MappingPlan plan_from_json_text(const std::string& text);
MappingPlan load_plan(const std::string& path);

}  // namespace nmpsim

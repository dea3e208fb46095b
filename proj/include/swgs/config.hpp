#pragma once

#include <string>
#include <utility>
#include <vector>

#include "swgs/model.hpp"

namespace swgs {

/// Schema tag carried by every scenario and design document.
inline constexpr const char* kSchemaTag = "swgs/1";

// Scenario and design documents are YAML mappings with a `schema` tag and a
// `kind` of `scenario` or `design`. Unknown fields are rejected. Numbers may
// be written as fractions ("1/3") and infinities as .inf / -.inf.
// Malformed documents raise ParseError naming the source, line and field.

ScenarioSpec parse_scenario(const std::string& text, const std::string& source = "<input>");
ScenarioSpec load_scenario(const std::string& path);

GroupSequentialDesign parse_design(const std::string& text, const std::string& source = "<input>");
GroupSequentialDesign load_design(const std::string& path);

using SummaryFields = std::vector<std::pair<std::string, double>>;

std::string emit_scenario(const ScenarioSpec& scenario);
/// `summary` lands in an optional `summary` mapping that parse_design skips.
std::string emit_design(const GroupSequentialDesign& design, const SummaryFields& summary = {});

/// Shortest form that reads back exactly; infinities as .inf / -.inf.
std::string format_double(double x);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

} // namespace swgs

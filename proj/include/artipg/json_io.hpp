#pragma once

#include "artipg/program.hpp"

#include <json.hpp>

#include <string>

namespace artipg {

// Canonical text for a JSON document: sorted object keys, 2-space indent,
// shortest-exact decimal floats, no trailing newline. Program, trace, and
// sidecar serialization all share this one writer so their byte form never
// diverges.
std::string canonicalDump(const nlohmann::json& j);

// {"value": v[, "min": lo, "max": hi][, "integer": true]} or {"expr": "..."}.
nlohmann::json paramEntryToJson(const ParamEntry& e);
ParamEntry paramEntryFromJson(const nlohmann::json& j, const std::string& ctx);

} // namespace artipg

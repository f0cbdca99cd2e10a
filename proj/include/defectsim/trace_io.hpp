#pragma once

// Trace and audit serialization: JSON (lossless) and the per-round CSV view.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "defectsim/analysis.hpp"
#include "defectsim/core.hpp"

namespace defectsim {

nlohmann::json trace_to_json(const Trace& trace);
Trace trace_from_json(const nlohmann::json& j);

nlohmann::json audit_to_json(const AuditReport& report);
AuditReport audit_from_json(const nlohmann::json& j);

/// Header: round,case,F_avg,loss_agent_0..loss_agent_{M-1},grad_norm,defections.
std::string csv_header(int num_agents);
/// Numbers use 17 significant digits; defections are ids joined by ';'.
std::string trace_to_csv(const Trace& trace);

std::string read_text_file(const std::filesystem::path& path);
/// Throws std::runtime_error if the file cannot be written.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace defectsim

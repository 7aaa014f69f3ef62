#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "atcline/align.hpp"

// One JSON object shape per domain record, shared by every *.jsonl stage file
// so a record reads identically wherever it is nested.
namespace atcline {

nlohmann::ordered_json command_json(const ParsedCommand& c);
ParsedCommand command_from_json(const nlohmann::json& j);

nlohmann::ordered_json event_json(const ManeuverEvent& e);
ManeuverEvent event_from_json(const nlohmann::json& j);

// Pair rows nest the command and event objects plus the offset label.
void save_aligned_jsonl(const std::filesystem::path& path,
                        const std::vector<AlignedPair>& pairs);
std::vector<AlignedPair> load_aligned_jsonl(const std::filesystem::path& path);

}  // namespace atcline

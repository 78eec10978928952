#pragma once

#include <json.hpp>

#include "shotlist/core.hpp"

namespace shotlist::core {

inline constexpr int kSchemaVersion = 1;

void to_json(nlohmann::json& j, const Example& e);
void from_json(const nlohmann::json& j, Example& e);
void to_json(nlohmann::json& j, const Demo& d);
void from_json(const nlohmann::json& j, Demo& d);
void to_json(nlohmann::json& j, const FeedbackEvent& e);
void from_json(const nlohmann::json& j, FeedbackEvent& e);
/// Snapshot document, carrying "schema_version".
void to_json(nlohmann::json& j, const SessionState& s);
void from_json(const nlohmann::json& j, SessionState& s);
/// One journal line: {"type": "pool" | "draft" | "pseudo" | "feedback" | "round" |
/// "description", ...}.
void to_json(nlohmann::json& j, const JournalEntry& e);
void from_json(const nlohmann::json& j, JournalEntry& e);

}  // namespace shotlist::core

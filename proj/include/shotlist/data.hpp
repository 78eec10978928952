#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "shotlist/core.hpp"
#include "shotlist/llmfn.hpp"

namespace shotlist::data {

/// One line of a pool or test JSONL file.
struct PoolRecord {
  std::string id;
  std::string input;
  std::optional<std::string> gold_output;
  std::map<std::string, std::string> meta;

  bool operator==(const PoolRecord&) const = default;
};

struct RejectedLine {
  std::size_t line = 0;  // 1-based
  std::string reason;
};

struct ParsedRecords {
  std::vector<PoolRecord> accepted;
  std::vector<RejectedLine> rejected;
};

/// Blank lines are ignored. Invalid lines (bad JSON, missing or empty
/// "input", missing "id", non-string meta values, ids repeated within the
/// upload) are reported, never fatal.
ParsedRecords parse_jsonl(std::string_view body);

std::string to_jsonl(const std::vector<PoolRecord>& records);
std::vector<PoolRecord> read_jsonl_file(const std::filesystem::path& path);
void write_jsonl_file(const std::filesystem::path& path, const std::vector<PoolRecord>& records);

core::Example to_example(const PoolRecord& r);

/// Mock-teacher entries for records carrying a gold output; the family comes
/// from meta["family"], falling back to the record id.
std::vector<llmfn::MockTeacher::Entry> teacher_entries(const std::vector<PoolRecord>& records);

}  // namespace shotlist::data

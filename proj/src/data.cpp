#include "shotlist/data.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace shotlist::data {

using nlohmann::json;

ParsedRecords parse_jsonl(std::string_view body) {
  ParsedRecords out;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < body.size()) {
    auto nl = body.find('\n', start);
    if (nl == std::string_view::npos) nl = body.size();
    const auto line = body.substr(start, nl - start);
    start = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    auto reject = [&](std::string why) { out.rejected.push_back({line_no, std::move(why)}); };
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      reject("invalid JSON");
      continue;
    }
    if (!j.is_object()) {
      reject("line is not a JSON object");
      continue;
    }
    if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>().empty()) {
      reject("missing \"id\"");
      continue;
    }
    if (!j.contains("input") || !j["input"].is_string() ||
        j["input"].get<std::string>().find_first_not_of(" \t\r") == std::string::npos) {
      reject("missing \"input\"");
      continue;
    }
    PoolRecord r;
    r.id = j["id"].get<std::string>();
    r.input = j["input"].get<std::string>();
    if (auto g = j.find("gold_output"); g != j.end() && !g->is_null()) {
      if (!g->is_string()) {
        reject("\"gold_output\" must be a string");
        continue;
      }
      r.gold_output = g->get<std::string>();
    }
    bool meta_ok = true;
    if (auto m = j.find("meta"); m != j.end() && !m->is_null()) {
      if (!m->is_object()) {
        meta_ok = false;
      } else {
        for (const auto& [k, v] : m->items()) {
          if (!v.is_string()) {
            meta_ok = false;
            break;
          }
          r.meta[k] = v.get<std::string>();
        }
      }
    }
    if (!meta_ok) {
      reject("\"meta\" must map strings to strings");
      continue;
    }
    if (!seen.insert(r.id).second) {
      reject("duplicate id: " + r.id);
      continue;
    }
    out.accepted.push_back(std::move(r));
  }
  return out;
}

std::string to_jsonl(const std::vector<PoolRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    json j = {{"id", r.id}, {"input", r.input}};
    if (r.gold_output) j["gold_output"] = *r.gold_output;
    if (!r.meta.empty()) j["meta"] = r.meta;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<PoolRecord> read_jsonl_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  auto parsed = parse_jsonl(buf.str());
  if (!parsed.rejected.empty())
    throw std::runtime_error(path.string() + ":" + std::to_string(parsed.rejected.front().line) +
                             ": " + parsed.rejected.front().reason);
  return std::move(parsed.accepted);
}

void write_jsonl_file(const std::filesystem::path& path, const std::vector<PoolRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_jsonl(records);
}

core::Example to_example(const PoolRecord& r) {
  core::Example e;
  e.id = r.id;
  e.input = r.input;
  e.gold_output = r.gold_output;
  e.meta = r.meta;
  return e;
}

std::vector<llmfn::MockTeacher::Entry> teacher_entries(const std::vector<PoolRecord>& records) {
  std::vector<llmfn::MockTeacher::Entry> out;
  for (const auto& r : records) {
    if (!r.gold_output) continue;
    auto fam = r.meta.find("family");
    out.push_back({r.input, *r.gold_output, fam == r.meta.end() ? r.id : fam->second});
  }
  return out;
}

}  // namespace shotlist::data

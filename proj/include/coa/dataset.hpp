#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace coa {

// One long-context QA item: a query plus the full document it is asked
// against, with gold answers and/or multiple-choice options.
struct QueryRecord {
    std::string query_id;
    std::string query_text;
    std::string context;
    std::vector<std::string> gold_answers;
    std::optional<std::vector<std::string>> choices;
    std::optional<int> gold_choice_index;
};

struct MalformedRecord : std::runtime_error {
    MalformedRecord(size_t line, const std::string& field, const std::string& detail)
        : std::runtime_error("line " + std::to_string(line) + ", field '" + field + "': " + detail),
          line(line), field(field) {}
    size_t line;
    std::string field;
};

struct MissingField : MalformedRecord {
    MissingField(size_t line, const std::string& field)
        : MalformedRecord(line, field, "missing required field") {}
};

// Streams a JSONL dataset: one object per line, order preserved.
// Schema: {"id", "query", "context", "answers", "choices"?, "gold_choice_index"?}
std::vector<QueryRecord> load_dataset(const std::filesystem::path& path);

} // namespace coa

#include "coa/dataset.hpp"

#include <fstream>

#include <json.hpp>

namespace coa {

namespace {

using nlohmann::json;

std::string require_string(const json& j, const char* field, size_t line) {
    if (!j.contains(field)) throw MissingField(line, field);
    const auto& v = j.at(field);
    if (!v.is_string()) throw MalformedRecord(line, field, "expected a string");
    return v.get<std::string>();
}

std::vector<std::string> require_string_array(const json& j, const char* field, size_t line) {
    if (!j.contains(field)) throw MissingField(line, field);
    const auto& v = j.at(field);
    if (!v.is_array()) throw MalformedRecord(line, field, "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
        if (!e.is_string()) throw MalformedRecord(line, field, "expected an array of strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

} // namespace

std::vector<QueryRecord> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset: " + path.string());

    std::vector<QueryRecord> records;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw MalformedRecord(lineno, "", std::string("invalid JSON: ") + e.what());
        }
        if (!j.is_object()) throw MalformedRecord(lineno, "", "expected a JSON object");

        QueryRecord r;
        r.query_id = require_string(j, "id", lineno);
        r.query_text = require_string(j, "query", lineno);
        r.context = require_string(j, "context", lineno);
        r.gold_answers = require_string_array(j, "answers", lineno);

        if (j.contains("choices")) {
            r.choices = require_string_array(j, "choices", lineno);
            if (!j.contains("gold_choice_index"))
                throw MissingField(lineno, "gold_choice_index");
            const auto& gi = j.at("gold_choice_index");
            if (!gi.is_number_integer())
                throw MalformedRecord(lineno, "gold_choice_index", "expected an integer");
            int idx = gi.get<int>();
            if (idx < 0 || idx >= static_cast<int>(r.choices->size()))
                throw MalformedRecord(lineno, "gold_choice_index", "index out of range of choices");
            r.gold_choice_index = idx;
        } else if (j.contains("gold_choice_index")) {
            throw MalformedRecord(lineno, "gold_choice_index", "present without choices");
        }

        records.push_back(std::move(r));
    }
    return records;
}

} // namespace coa

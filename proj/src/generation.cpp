#include "coa/generation.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <thread>
#include <unordered_set>

#include <httplib.h>
#include <json.hpp>

namespace coa {

namespace {

constexpr std::string_view kWorkerSummaryMarker =
    "\nHere is the summary of the previous source text: ";
constexpr std::string_view kWorkerTailMarker = "\nYou need to read current source text";
constexpr std::string_view kQuestionMarker = "\nQuestion: ";
constexpr std::string_view kManagerMarker = "You need to answer based on the summary:\n";
constexpr std::string_view kManagerQuestionMarker = "\n\nQuestion: ";
constexpr std::string_view kAnswerMarker = "\nAnswer:";

std::vector<std::string> lowercase_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

struct MockFact {
    std::string key;
    std::string value;
};

bool is_fact_key(std::string_view key) {
    if (key.empty()) return false;
    if (!(key[0] >= 'A' && key[0] <= 'Z')) return false;
    for (char c : key)
        if (!((c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_')) return false;
    return true;
}

// "KEY: VALUE" lines, keys all-caps, exact duplicates collapsed.
void parse_facts(std::string_view section, std::vector<MockFact>& out) {
    size_t pos = 0;
    while (pos <= section.size()) {
        size_t eol = section.find('\n', pos);
        std::string_view line = section.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        size_t colon = line.find(": ");
        if (colon != std::string_view::npos && is_fact_key(line.substr(0, colon))) {
            MockFact f{std::string(line.substr(0, colon)), std::string(line.substr(colon + 2))};
            bool dup = std::any_of(out.begin(), out.end(), [&](const MockFact& g) {
                return g.key == f.key && g.value == f.value;
            });
            if (!dup) out.push_back(std::move(f));
        }
        if (eol == std::string_view::npos) break;
        pos = eol + 1;
    }
}

int key_query_overlap(const std::string& key, const std::unordered_set<std::string>& query_tokens) {
    std::unordered_set<std::string> seen;
    int overlap = 0;
    size_t pos = 0;
    while (pos <= key.size()) {
        size_t us = key.find('_', pos);
        std::string token = key.substr(pos, us == std::string::npos ? std::string::npos : us - pos);
        for (auto& c : token) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (!token.empty() && seen.insert(token).second && query_tokens.count(token)) ++overlap;
        if (us == std::string::npos) break;
        pos = us + 1;
    }
    return overlap;
}

} // namespace

MockSummarizerBackend::MockSummarizerBackend(MockBackendConfig cfg) : cfg_(cfg) {
    if (cfg_.max_facts < 1) throw std::invalid_argument("mock max_facts must be >= 1");
}

std::string MockSummarizerBackend::generate(const std::string& prompt, const GenerationParams&) {
    const std::string_view view(prompt);

    if (view.find(kManagerMarker) != std::string_view::npos) {
        size_t start = view.find(kManagerMarker) + kManagerMarker.size();
        size_t q_pos = view.rfind(kManagerQuestionMarker);
        std::string_view summary, query;
        if (q_pos == std::string_view::npos || q_pos < start) {
            summary = view.substr(start);
        } else {
            summary = view.substr(start, q_pos - start);
            size_t q_start = q_pos + kManagerQuestionMarker.size();
            size_t a_pos = view.rfind(kAnswerMarker);
            query = (a_pos == std::string_view::npos || a_pos < q_start)
                        ? view.substr(q_start)
                        : view.substr(q_start, a_pos - q_start);
        }

        std::vector<MockFact> facts;
        parse_facts(summary, facts);
        if (facts.empty()) return "unknown";

        std::unordered_set<std::string> qtokens;
        for (auto& t : lowercase_tokens(query)) qtokens.insert(std::move(t));

        int best_overlap = -1;
        std::string best_key;
        for (const auto& f : facts) {
            int ov = key_query_overlap(f.key, qtokens);
            if (ov > best_overlap) {
                best_overlap = ov;
                best_key = f.key;
            }
        }
        std::string answer;
        for (const auto& f : facts) {
            if (f.key != best_key) continue;
            if (!answer.empty()) answer.push_back(' ');
            answer += f.value;
        }
        return answer;
    }

    // Worker: chunk is everything before the summary marker; facts are read
    // chunk-first so fresher evidence wins ties with remembered facts.
    size_t mark = view.find(kWorkerSummaryMarker);
    size_t tail = view.rfind(kWorkerTailMarker);
    if (mark == std::string_view::npos || tail == std::string_view::npos ||
        tail < mark + kWorkerSummaryMarker.size())
        return "";
    std::string_view chunk = view.substr(0, mark);
    std::string_view rest = view.substr(mark + kWorkerSummaryMarker.size(),
                                        tail - (mark + kWorkerSummaryMarker.size()));
    size_t q_pos = rest.rfind(kQuestionMarker);
    std::string_view summary = q_pos == std::string_view::npos ? rest : rest.substr(0, q_pos);
    std::string_view query =
        q_pos == std::string_view::npos ? std::string_view{}
                                        : rest.substr(q_pos + kQuestionMarker.size());

    std::vector<MockFact> facts;
    parse_facts(chunk, facts);
    parse_facts(summary, facts);

    std::unordered_set<std::string> qtokens;
    for (auto& t : lowercase_tokens(query)) qtokens.insert(std::move(t));

    std::stable_sort(facts.begin(), facts.end(), [&](const MockFact& a, const MockFact& b) {
        return key_query_overlap(a.key, qtokens) > key_query_overlap(b.key, qtokens);
    });
    if (static_cast<int>(facts.size()) > cfg_.max_facts)
        facts.resize(static_cast<size_t>(cfg_.max_facts));

    std::string out;
    for (const auto& f : facts) {
        if (!out.empty()) out.push_back('\n');
        out += f.key + ": " + f.value;
    }
    return out;
}

HttpGenerationBackend::HttpGenerationBackend(GenerationBackendConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.endpoint.empty()) throw std::invalid_argument("http generation backend needs an endpoint");
}

std::string HttpGenerationBackend::generate(const std::string& prompt, const GenerationParams& params) {
    nlohmann::json body{
        {"model", cfg_.model},
        {"messages", nlohmann::json::array({nlohmann::json{{"role", "user"}, {"content", prompt}}})},
        {"temperature", params.temperature},
        {"top_p", params.top_p},
        {"max_tokens", params.max_output_tokens},
    };
    const std::string payload = body.dump();

    auto scheme_end = cfg_.endpoint.find("://");
    if (scheme_end == std::string::npos) throw std::invalid_argument("endpoint must include scheme");
    auto path_start = cfg_.endpoint.find('/', scheme_end + 3);
    std::string base = path_start == std::string::npos ? cfg_.endpoint : cfg_.endpoint.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : cfg_.endpoint.substr(path_start);

    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(100ll << (attempt - 1)));
        httplib::Client client(base);
        client.set_read_timeout(600, 0);
        httplib::Headers headers;
        if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = "no response (" + httplib::to_string(res.error()) + ")";
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
        if (j.is_discarded() || !j.contains("choices") || j["choices"].empty()) {
            last_error = "malformed generation response";
            continue;
        }
        const auto& choice = j["choices"][0];
        if (choice.contains("message") && choice["message"].contains("content"))
            return choice["message"]["content"].get<std::string>();
        if (choice.contains("text")) return choice["text"].get<std::string>();
        last_error = "choice carries no text";
    }
    throw BackendUnavailable("generation backend failed after " + std::to_string(cfg_.max_retries + 1) +
                             " attempts: " + last_error);
}

std::unique_ptr<GenerationBackend> make_generation_backend(const GenerationBackendConfig& cfg) {
    if (cfg.kind == GenerationBackendConfig::Kind::Mock)
        return std::make_unique<MockSummarizerBackend>(cfg.mock);
    return std::make_unique<HttpGenerationBackend>(cfg);
}

} // namespace coa

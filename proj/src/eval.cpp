#include "coa/eval.hpp"

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <map>
#include <sstream>

namespace coa {

std::string normalize_answer(std::string_view text) {
    std::string spaced;
    spaced.reserve(text.size());
    for (char c : text) {
        unsigned char u = static_cast<unsigned char>(c);
        if (std::ispunct(u)) continue;
        spaced.push_back(std::isspace(u) ? ' ' : static_cast<char>(std::tolower(u)));
    }
    std::istringstream iss(spaced);
    std::vector<std::string> words;
    std::string w;
    while (iss >> w) words.push_back(std::move(w));

    size_t start = 0;
    while (start < words.size() &&
           (words[start] == "a" || words[start] == "an" || words[start] == "the"))
        ++start;

    std::string out;
    for (size_t i = start; i < words.size(); ++i) {
        if (!out.empty()) out.push_back(' ');
        out += words[i];
    }
    return out;
}

std::optional<int> parse_choice_letter(std::string_view answer, int num_choices) {
    size_t i = 0;
    while (i < answer.size() && std::isspace(static_cast<unsigned char>(answer[i]))) ++i;
    bool parenthesized = false;
    if (i < answer.size() && answer[i] == '(') {
        parenthesized = true;
        ++i;
    }
    if (i >= answer.size() || !std::isalpha(static_cast<unsigned char>(answer[i])))
        return std::nullopt;
    int idx = std::toupper(static_cast<unsigned char>(answer[i])) - 'A';
    ++i;
    if (parenthesized) {
        if (i >= answer.size() || answer[i] != ')') return std::nullopt;
        ++i;
    } else if (i < answer.size() && (answer[i] == '.' || answer[i] == ')' || answer[i] == ':')) {
        ++i;
    }
    // The letter must stand alone: end of string or whitespace next.
    if (i < answer.size() && !std::isspace(static_cast<unsigned char>(answer[i])))
        return std::nullopt;
    if (idx < 0 || idx >= num_choices) return std::nullopt;
    return idx;
}

int exact_match(const std::string& answer, const QueryRecord& record) {
    const bool has_choices = record.choices && record.gold_choice_index;
    if (!has_choices && record.gold_answers.empty())
        throw NoGold("record '" + record.query_id + "' has neither choices nor gold answers");

    if (has_choices) {
        if (auto letter = parse_choice_letter(answer, static_cast<int>(record.choices->size())))
            return *letter == *record.gold_choice_index ? 1 : 0;
        std::string norm = normalize_answer(answer);
        for (size_t i = 0; i < record.choices->size(); ++i) {
            if (norm == normalize_answer((*record.choices)[i]))
                return static_cast<int>(i) == *record.gold_choice_index ? 1 : 0;
        }
        return 0;
    }

    std::string norm = normalize_answer(answer);
    for (const auto& gold : record.gold_answers)
        if (norm == normalize_answer(gold)) return 1;
    return 0;
}

EvalRecord score_answer(const std::string& answer, const QueryRecord& record,
                        const std::string& strategy) {
    EvalRecord out;
    out.query_id = record.query_id;
    out.strategy = strategy;
    out.answer = answer;
    const bool has_choices = record.choices && record.gold_choice_index;
    if (!has_choices && record.gold_answers.empty()) return out; // em stays unset

    out.em = exact_match(answer, record);
    if (has_choices) {
        if (auto letter = parse_choice_letter(answer, static_cast<int>(record.choices->size()))) {
            out.matched_choice_index = letter;
        } else {
            std::string norm = normalize_answer(answer);
            for (size_t i = 0; i < record.choices->size(); ++i)
                if (norm == normalize_answer((*record.choices)[i])) {
                    out.matched_choice_index = static_cast<int>(i);
                    break;
                }
        }
    }
    return out;
}

std::vector<StrategyReport> aggregate(const std::vector<EvalRecord>& records) {
    const std::vector<std::string> canonical{"default", "dense", "dfs-greedy", "cl-order"};
    std::vector<std::string> order;
    for (const auto& r : records) {
        if (std::find(order.begin(), order.end(), r.strategy) == order.end())
            order.push_back(r.strategy);
    }
    std::stable_sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) {
        auto rank = [&](const std::string& s) {
            auto it = std::find(canonical.begin(), canonical.end(), s);
            return it == canonical.end() ? canonical.size() : static_cast<size_t>(it - canonical.begin());
        };
        return rank(a) < rank(b);
    });

    std::vector<StrategyReport> reports;
    for (const auto& strategy : order) {
        StrategyReport rep;
        rep.strategy = strategy;
        long hits = 0;
        for (const auto& r : records) {
            if (r.strategy != strategy) continue;
            rep.rows.push_back(r);
            ++rep.n;
            if (r.em) {
                ++rep.scored;
                hits += *r.em;
            }
        }
        rep.em_accuracy = rep.scored == 0 ? 0.0 : 100.0 * static_cast<double>(hits) / rep.scored;
        reports.push_back(std::move(rep));
    }
    return reports;
}

std::string render_report_table(const std::vector<StrategyReport>& reports) {
    std::ostringstream os;
    os << std::left << std::setw(12) << "strategy" << std::right << std::setw(8) << "n"
       << std::setw(8) << "scored" << std::setw(10) << "em" << '\n';
    for (const auto& r : reports) {
        os << std::left << std::setw(12) << r.strategy << std::right << std::setw(8) << r.n
           << std::setw(8) << r.scored << std::setw(10) << std::fixed << std::setprecision(2)
           << r.em_accuracy << '\n';
    }
    return os.str();
}

std::string report_csv(const std::vector<StrategyReport>& reports) {
    std::ostringstream os;
    os << "strategy,n,scored,em_accuracy\n";
    for (const auto& r : reports) {
        os << r.strategy << ',' << r.n << ',' << r.scored << ','
           << std::fixed << std::setprecision(4) << r.em_accuracy << '\n';
    }
    return os.str();
}

} // namespace coa

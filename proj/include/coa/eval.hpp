#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "coa/dataset.hpp"

namespace coa {

struct NoGold : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Lowercase, strip punctuation, collapse whitespace, drop leading articles.
// The same rule is applied to predictions and references of every strategy,
// so comparisons stay fair.
std::string normalize_answer(std::string_view text);

// Exact match. Multiple choice: 1 iff the answer names the gold choice by
// letter ("B", "B.", "(B)", "B)" prefixes) or equals a choice's normalized
// text and that choice is gold. Free-form: 1 iff the normalized answer equals
// any normalized gold answer. Throws NoGold when the record has neither.
int exact_match(const std::string& answer, const QueryRecord& record);

// Letter/index the answer names, if any; bounded by the number of choices.
std::optional<int> parse_choice_letter(std::string_view answer, int num_choices);

struct EvalRecord {
    std::string query_id;
    std::string strategy;
    std::string answer;
    std::optional<int> em; // unset when the record has no gold
    std::optional<int> matched_choice_index;
};

// Scores one answer; em stays unset (instead of throwing) when the record
// carries no gold signal, so judge-ready answers can still flow through.
EvalRecord score_answer(const std::string& answer, const QueryRecord& record,
                        const std::string& strategy);

struct StrategyReport {
    std::string strategy;
    int n = 0;        // records for this strategy
    int scored = 0;   // records with non-null em
    double em_accuracy = 0.0; // 100 * mean(em) over scored records
    std::vector<EvalRecord> rows;
};

// One report per strategy, in the stable order default, dense, dfs-greedy,
// cl-order, then anything else by first appearance.
std::vector<StrategyReport> aggregate(const std::vector<EvalRecord>& records);

std::string render_report_table(const std::vector<StrategyReport>& reports);
std::string report_csv(const std::vector<StrategyReport>& reports);

} // namespace coa

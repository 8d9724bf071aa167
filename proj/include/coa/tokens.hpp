#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace coa {

// How token counts are estimated. Orderings and budgets must be reproducible
// without a model-specific vocabulary, so all modes are deterministic pure
// functions of the input bytes.
enum class TokenEstimatorMode {
    WhitespaceWords,        // count of whitespace-separated words
    BytesDiv4,              // byte length / 4, the usual rule of thumb
    ExternalTokenizerTable, // per-codepoint weights loaded from a JSON table
};

std::string to_string(TokenEstimatorMode mode);
TokenEstimatorMode parse_token_estimator_mode(std::string_view name);

struct TokenEstimatorConfig {
    TokenEstimatorMode mode = TokenEstimatorMode::WhitespaceWords;
    std::filesystem::path table_path; // only for ExternalTokenizerTable
};

// Codepoint-range weight, e.g. CJK at 1.0 tokens/char vs ASCII at 0.25.
struct CodepointWeight {
    uint32_t from = 0;
    uint32_t to = 0;
    double weight = 0.0;
};

// Compiled estimator. The table mode sums per-codepoint weights and takes the
// ceiling, which keeps the estimate monotone under concatenation (a per-word
// vocabulary lookup cannot guarantee that at word-merge boundaries).
class TokenEstimator {
public:
    TokenEstimator() = default;

    static TokenEstimator from_config(const TokenEstimatorConfig& cfg);
    static TokenEstimator whitespace_words();
    static TokenEstimator bytes_div4();
    static TokenEstimator weight_table(double default_weight, std::vector<CodepointWeight> ranges);

    int estimate(std::string_view text) const;
    TokenEstimatorMode mode() const { return mode_; }

private:
    TokenEstimatorMode mode_ = TokenEstimatorMode::WhitespaceWords;
    double default_weight_ = 0.25;
    std::vector<CodepointWeight> ranges_;
};

// One-shot convenience matching the estimator config. Table mode loads the
// table file on every call; build a TokenEstimator once for hot paths.
int estimate_tokens(std::string_view text, const TokenEstimatorConfig& cfg);

} // namespace coa

#include "coa/tokens.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace coa {

std::string to_string(TokenEstimatorMode mode) {
    switch (mode) {
    case TokenEstimatorMode::WhitespaceWords: return "whitespace-words";
    case TokenEstimatorMode::BytesDiv4: return "bytes-div-4";
    case TokenEstimatorMode::ExternalTokenizerTable: return "external-tokenizer-table";
    }
    return "whitespace-words";
}

TokenEstimatorMode parse_token_estimator_mode(std::string_view name) {
    if (name == "whitespace-words") return TokenEstimatorMode::WhitespaceWords;
    if (name == "bytes-div-4") return TokenEstimatorMode::BytesDiv4;
    if (name == "external-tokenizer-table") return TokenEstimatorMode::ExternalTokenizerTable;
    throw std::invalid_argument("unknown token estimator mode: " + std::string(name));
}

TokenEstimator TokenEstimator::whitespace_words() {
    TokenEstimator e;
    e.mode_ = TokenEstimatorMode::WhitespaceWords;
    return e;
}

TokenEstimator TokenEstimator::bytes_div4() {
    TokenEstimator e;
    e.mode_ = TokenEstimatorMode::BytesDiv4;
    return e;
}

TokenEstimator TokenEstimator::weight_table(double default_weight, std::vector<CodepointWeight> ranges) {
    if (default_weight < 0.0) throw std::invalid_argument("default_weight must be >= 0");
    TokenEstimator e;
    e.mode_ = TokenEstimatorMode::ExternalTokenizerTable;
    e.default_weight_ = default_weight;
    e.ranges_ = std::move(ranges);
    return e;
}

TokenEstimator TokenEstimator::from_config(const TokenEstimatorConfig& cfg) {
    switch (cfg.mode) {
    case TokenEstimatorMode::WhitespaceWords: return whitespace_words();
    case TokenEstimatorMode::BytesDiv4: return bytes_div4();
    case TokenEstimatorMode::ExternalTokenizerTable: break;
    }
    std::ifstream in(cfg.table_path);
    if (!in) throw std::runtime_error("cannot open tokenizer table: " + cfg.table_path.string());
    nlohmann::json j = nlohmann::json::parse(in);
    double def = j.value("default_weight", 0.25);
    std::vector<CodepointWeight> ranges;
    if (j.contains("ranges")) {
        for (const auto& r : j.at("ranges")) {
            ranges.push_back({r.at("from").get<uint32_t>(), r.at("to").get<uint32_t>(),
                              r.at("weight").get<double>()});
        }
    }
    return weight_table(def, std::move(ranges));
}

namespace {

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

int count_words(std::string_view text) {
    int count = 0;
    bool in_word = false;
    for (char c : text) {
        if (is_space(c)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++count;
        }
    }
    return count;
}

// Decodes one UTF-8 codepoint at pos; malformed bytes are consumed one at a
// time so the estimate stays total and deterministic on arbitrary input.
uint32_t next_codepoint(std::string_view text, size_t& pos) {
    unsigned char c0 = static_cast<unsigned char>(text[pos]);
    size_t len = 1;
    uint32_t cp = c0;
    if (c0 >= 0xF0) {
        len = 4;
        cp = c0 & 0x07u;
    } else if (c0 >= 0xE0) {
        len = 3;
        cp = c0 & 0x0Fu;
    } else if (c0 >= 0xC0) {
        len = 2;
        cp = c0 & 0x1Fu;
    }
    if (pos + len > text.size()) len = 1;
    for (size_t i = 1; i < len; ++i) {
        unsigned char cc = static_cast<unsigned char>(text[pos + i]);
        if ((cc & 0xC0u) != 0x80u) {
            len = 1;
            cp = c0;
            break;
        }
        cp = (cp << 6) | (cc & 0x3Fu);
    }
    pos += len;
    return len == 1 ? c0 : cp;
}

} // namespace

int TokenEstimator::estimate(std::string_view text) const {
    switch (mode_) {
    case TokenEstimatorMode::WhitespaceWords:
        return count_words(text);
    case TokenEstimatorMode::BytesDiv4:
        return static_cast<int>(text.size() / 4);
    case TokenEstimatorMode::ExternalTokenizerTable: {
        double total = 0.0;
        size_t pos = 0;
        while (pos < text.size()) {
            uint32_t cp = next_codepoint(text, pos);
            double w = default_weight_;
            for (const auto& r : ranges_) {
                if (cp >= r.from && cp <= r.to) {
                    w = r.weight;
                    break;
                }
            }
            total += w;
        }
        return static_cast<int>(std::ceil(total));
    }
    }
    return 0;
}

int estimate_tokens(std::string_view text, const TokenEstimatorConfig& cfg) {
    return TokenEstimator::from_config(cfg).estimate(text);
}

} // namespace coa

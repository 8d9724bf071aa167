#pragma once

#include <memory>
#include <string>
#include <vector>

#include "coa/embedding.hpp" // BackendUnavailable

namespace coa {

struct GenerationParams {
    double temperature = 0.0;
    double top_p = 0.95;
    int max_output_tokens = 1024;
};

class GenerationBackend {
public:
    virtual ~GenerationBackend() = default;
    virtual std::string generate(const std::string& prompt, const GenerationParams& params) = 0;
    virtual int max_context_tokens() const { return 1 << 20; }
    virtual int max_output_tokens() const { return 1 << 16; }
    // Deterministic backends always map the same prompt to the same output;
    // trace latency is reported as zero for them.
    virtual bool deterministic() const { return false; }
};

struct MockBackendConfig {
    int max_facts = 4; // memory capacity in facts
};

// Deterministic extractive summarizer standing in for an LLM. Workers parse
// "KEY: VALUE" lines from the incoming chunk and memory, keep at most
// max_facts of them preferring keys that overlap the query tokens, and emit
// the survivors as the new summary. The manager emits the value(s) of the key
// that best matches the query, or "unknown" when memory holds no facts.
class MockSummarizerBackend : public GenerationBackend {
public:
    explicit MockSummarizerBackend(MockBackendConfig cfg = {});
    std::string generate(const std::string& prompt, const GenerationParams& params) override;
    bool deterministic() const override { return true; }

private:
    MockBackendConfig cfg_;
};

struct GenerationBackendConfig {
    enum class Kind { Mock, HttpService };
    Kind kind = Kind::Mock;
    std::string endpoint;
    std::string model = "mock";
    std::string api_key_env = "GEN_API_KEY";
    int max_retries = 3;
    MockBackendConfig mock;
};

// POST {"model", "messages": [{"role": "user", "content"}], "temperature",
// "top_p", "max_tokens"} -> first choice's message content. The API key comes
// from the configured environment variable and is never logged.
class HttpGenerationBackend : public GenerationBackend {
public:
    explicit HttpGenerationBackend(GenerationBackendConfig cfg);
    std::string generate(const std::string& prompt, const GenerationParams& params) override;

private:
    GenerationBackendConfig cfg_;
};

std::unique_ptr<GenerationBackend> make_generation_backend(const GenerationBackendConfig& cfg);

} // namespace coa

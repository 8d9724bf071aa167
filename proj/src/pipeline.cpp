#include "coa/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <ostream>
#include <unordered_set>

#include <json.hpp>

namespace coa {

std::string truncate_to_budget(const std::string& text, int budget, const TokenEstimator& est) {
    if (budget <= 0) throw std::invalid_argument("budget must be > 0");
    if (est.estimate(text) <= budget) return text;

    // Candidate cuts: end of each word (position whose next char is space).
    std::vector<size_t> cuts;
    for (size_t i = 1; i < text.size(); ++i) {
        bool prev_word = !std::isspace(static_cast<unsigned char>(text[i - 1]));
        bool here_space = std::isspace(static_cast<unsigned char>(text[i]));
        if (prev_word && here_space) cuts.push_back(i);
    }
    std::string_view view(text);
    size_t lo = 0, hi = cuts.size();
    // First index whose prefix no longer fits; estimate is monotone in the
    // prefix so binary search applies.
    while (lo < hi) {
        size_t mid = lo + (hi - lo) / 2;
        if (est.estimate(view.substr(0, cuts[mid])) <= budget)
            lo = mid + 1;
        else
            hi = mid;
    }
    if (lo == 0) return "";
    return text.substr(0, cuts[lo - 1]);
}

MemoryState worker_step(GenerationBackend& backend, const std::string& query, const Chunk& chunk,
                        const MemoryState& memory, const PipelineLimits& limits,
                        const TokenEstimator& est) {
    std::string prompt = render_worker_prompt(chunk.text, memory.summary_text, query);
    std::string raw = backend.generate(prompt, limits.gen);
    MemoryState next;
    next.step_index = memory.step_index + 1;
    next.summary_text = truncate_to_budget(raw, limits.summary_token_limit, est);
    next.token_count = est.estimate(next.summary_text);
    return next;
}

std::string manager_step(GenerationBackend& backend, const std::string& query,
                         const MemoryState& memory, const std::string& task_instruction,
                         const GenerationParams& params) {
    std::string prompt = render_manager_prompt(memory.summary_text, query, task_instruction);
    std::string raw = backend.generate(prompt, params);
    size_t begin = raw.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    size_t end = raw.find_last_not_of(" \t\r\n");
    return raw.substr(begin, end - begin + 1);
}

PipelineResult run_chain(GenerationBackend& backend, const std::string& query_id,
                         const std::string& query, const std::vector<Chunk>& chunks,
                         const Ordering& ordering, const PipelineLimits& limits,
                         const TokenEstimator& est, const std::string& task_instruction) {
    const int n = static_cast<int>(chunks.size());
    if (static_cast<int>(ordering.permutation.size()) != n)
        throw std::invalid_argument("ordering length does not match chunk count");
    {
        std::unordered_set<int> seen;
        for (int idx : ordering.permutation) {
            if (idx < 0 || idx >= n || !seen.insert(idx).second)
                throw std::invalid_argument("ordering is not a permutation of the chunk indices");
        }
    }

    PipelineResult result;
    result.query_id = query_id;
    result.strategy = ordering.strategy;
    result.trace.push_back(MemoryState{}); // M_0: empty memory

    using clock = std::chrono::steady_clock;
    for (int k = 0; k < n; ++k) {
        const Chunk& chunk = chunks[static_cast<size_t>(ordering.permutation[static_cast<size_t>(k)])];
        auto t0 = clock::now();
        MemoryState next;
        try {
            next = worker_step(backend, query, chunk, result.trace.back(), limits, est);
        } catch (const BackendUnavailable& e) {
            throw ChainAborted(k + 1, chunk.chunk_id, result.trace, e.what());
        }
        auto t1 = clock::now();

        StepStats stats;
        stats.chunk_id = chunk.chunk_id;
        stats.prompt_tokens =
            est.estimate(render_worker_prompt(chunk.text, result.trace.back().summary_text, query));
        stats.response_tokens = next.token_count;
        stats.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        result.steps.push_back(std::move(stats));
        result.trace.push_back(std::move(next));
    }

    auto t0 = clock::now();
    try {
        result.answer =
            manager_step(backend, query, result.trace.back(), task_instruction, limits.gen);
    } catch (const BackendUnavailable& e) {
        throw ChainAborted(n + 1, "<manager>", result.trace, e.what());
    }
    auto t1 = clock::now();
    StepStats manager_stats;
    manager_stats.chunk_id = "<manager>";
    manager_stats.prompt_tokens =
        est.estimate(render_manager_prompt(result.trace.back().summary_text, query, task_instruction));
    manager_stats.response_tokens = est.estimate(result.answer);
    manager_stats.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    result.steps.push_back(std::move(manager_stats));

    return result;
}

void write_trace_jsonl(std::ostream& out, const PipelineResult& result,
                       const std::vector<Chunk>& chunks, const Ordering& ordering,
                       bool include_latency) {
    for (size_t k = 1; k < result.trace.size(); ++k) {
        const MemoryState& state = result.trace[k];
        const Chunk& chunk = chunks[static_cast<size_t>(ordering.permutation[k - 1])];
        nlohmann::json line{
            {"query_id", result.query_id},
            {"step", state.step_index},
            {"chunk_id", chunk.chunk_id},
            {"summary", state.summary_text},
            {"summary_tokens", state.token_count},
            {"latency_ms",
             include_latency ? static_cast<long>(result.steps[k - 1].wall_ms) : 0L},
        };
        out << line.dump() << '\n';
    }
    out << nlohmann::json{{"query_id", result.query_id}, {"answer", result.answer}}.dump() << '\n';
}

} // namespace coa

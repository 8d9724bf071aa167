#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "coa/chunking.hpp"
#include "coa/generation.hpp"
#include "coa/ordering.hpp"
#include "coa/prompts.hpp"
#include "coa/tokens.hpp"

namespace coa {

// Token-bounded summary passed between worker steps. Step 0 is the empty
// initial memory.
struct MemoryState {
    int step_index = 0;
    std::string summary_text;
    int token_count = 0;
};

struct StepStats {
    std::string chunk_id;
    int prompt_tokens = 0;
    int response_tokens = 0;
    double wall_ms = 0.0;
};

struct PipelineResult {
    std::string query_id;
    Strategy strategy = Strategy::Default;
    std::string answer;
    std::vector<MemoryState> trace; // all N+1 memory states
    std::vector<StepStats> steps;   // N worker steps + 1 manager entry
};

struct PipelineLimits {
    int per_chunk_token_limit = 8000;
    int summary_token_limit = 8000;
    GenerationParams gen;
};

// Chain aborted at a failing worker/manager call. Carries the partial trace;
// a chunk is never silently skipped because that would corrupt the ordering
// under comparison.
struct ChainAborted : std::runtime_error {
    ChainAborted(int failed_step, std::string chunk_id, std::vector<MemoryState> partial,
                 const std::string& why)
        : std::runtime_error("chain aborted at step " + std::to_string(failed_step) + " (chunk " +
                             chunk_id + "): " + why),
          failed_step(failed_step), chunk_id(std::move(chunk_id)), partial_trace(std::move(partial)) {}
    int failed_step;
    std::string chunk_id;
    std::vector<MemoryState> partial_trace;
};

// Longest prefix ending on a whitespace boundary whose estimate fits the
// budget; idempotent, returns the input unchanged when it already fits.
std::string truncate_to_budget(const std::string& text, int budget, const TokenEstimator& est);

MemoryState worker_step(GenerationBackend& backend, const std::string& query, const Chunk& chunk,
                        const MemoryState& memory, const PipelineLimits& limits,
                        const TokenEstimator& est);

std::string manager_step(GenerationBackend& backend, const std::string& query,
                         const MemoryState& memory, const std::string& task_instruction,
                         const GenerationParams& params);

// Runs the worker chain in the ordering's sequence, strictly one step after
// another, then the manager. The trace records every intermediate memory.
PipelineResult run_chain(GenerationBackend& backend, const std::string& query_id,
                         const std::string& query, const std::vector<Chunk>& chunks,
                         const Ordering& ordering, const PipelineLimits& limits,
                         const TokenEstimator& est,
                         const std::string& task_instruction = std::string(kDefaultTaskInstruction));

// JSONL trace: one line per step {"query_id", "step", "chunk_id", "summary",
// "summary_tokens", "latency_ms"}, then a final {"query_id", "answer"} line.
// Latency is written as 0 when include_latency is off (deterministic runs).
void write_trace_jsonl(std::ostream& out, const PipelineResult& result,
                       const std::vector<Chunk>& chunks, const Ordering& ordering,
                       bool include_latency);

} // namespace coa

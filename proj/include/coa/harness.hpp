#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "coa/dataset.hpp"
#include "coa/eval.hpp"
#include "coa/generation.hpp"
#include "coa/lossy_sim.hpp"
#include "coa/pipeline.hpp"

namespace coa {

enum class SimilarityBackendKind { LocalHash, HttpDense, Bm25 };

std::string to_string(SimilarityBackendKind kind);
SimilarityBackendKind parse_similarity_backend(std::string_view name);

// Everything one experiment run needs; defaults follow the long-context QA
// hyperparameters (8K chunk and summary budgets, temperature 0, top_p 0.95).
struct RunConfig {
    std::filesystem::path dataset;
    std::vector<Strategy> strategies{Strategy::ClOrder};
    SimilarityBackendKind similarity = SimilarityBackendKind::LocalHash;
    EmbeddingBackendConfig embedding;
    GenerationBackendConfig generation;
    Bm25Params bm25;
    bool raw_inner_product = false;
    TokenEstimatorConfig estimator;
    int per_chunk_token_limit = 8000;
    int summary_token_limit = 8000;
    GenerationParams gen_params; // temperature 0.0, top_p 0.95
    std::string task_instruction = std::string(kDefaultTaskInstruction);
    int parallel = 1;
    double max_requests_per_second = 0.0; // 0 disables throttling
    std::filesystem::path cache_dir;      // empty disables the embedding cache
    uint64_t seed = 0;
};

// Effective config for provenance echoes. Secret values never appear; only
// the names of the environment variables that hold them.
nlohmann::json effective_config_json(const RunConfig& cfg);

enum class FailureKind { Backend, Data };

struct StrategyRun {
    Strategy strategy = Strategy::Default;
    Ordering ordering;
    std::optional<PipelineResult> result;
    EvalRecord eval;
    std::optional<std::string> failure;
    FailureKind failure_kind = FailureKind::Backend;
};

struct QueryRunResult {
    std::string query_id;
    std::vector<Chunk> chunks;
    std::optional<std::string> failure; // query-level (chunking/embedding)
    FailureKind failure_kind = FailureKind::Backend;
    std::vector<StrategyRun> runs;
};

struct RunOutput {
    std::vector<QueryRunResult> queries; // dataset order
    bool any_backend_failure = false;
    bool any_data_failure = false;
};

// Executes every configured strategy on every record. Queries run in
// parallel up to cfg.parallel; each chain stays strictly sequential and the
// output order is the dataset order regardless of scheduling.
RunOutput run_dataset(const RunConfig& cfg, const std::vector<QueryRecord>& records);

// {"query_id", "strategy", "answer", "em"} per successful run; failures get
// {"query_id", "strategy", "error"} lines.
void write_results_jsonl(std::ostream& out, const RunOutput& output);

// Concatenated per-run traces in the pipeline trace format.
void write_traces_jsonl(std::ostream& out, const RunOutput& output, bool include_latency);

std::vector<EvalRecord> collect_eval_records(const RunOutput& output);

// Monte Carlo driver for the lossy-memory simulator.
struct SimulateConfig {
    int seeds = 200;
    ClusteredCorpusParams corpus;
    LossySimParams sim{11, 3};
};

struct SimulateReport {
    struct Row {
        std::string strategy;
        int seeds = 0;
        double mean_retention = 0.0;
        double stddev = 0.0;
    };
    std::vector<Row> rows; // cl-order, dense, random, default
    double p_cl_vs_random = 1.0;
    int cl_wins = 0;
    int cl_losses = 0;
};

SimulateReport run_simulation(const SimulateConfig& cfg);

nlohmann::json simulate_report_json(const SimulateReport& report);

} // namespace coa

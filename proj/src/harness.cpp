#include "coa/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <ostream>
#include <thread>

namespace coa {

std::string to_string(SimilarityBackendKind kind) {
    switch (kind) {
    case SimilarityBackendKind::LocalHash: return "local-hash";
    case SimilarityBackendKind::HttpDense: return "dense";
    case SimilarityBackendKind::Bm25: return "bm25";
    }
    return "local-hash";
}

SimilarityBackendKind parse_similarity_backend(std::string_view name) {
    if (name == "local-hash") return SimilarityBackendKind::LocalHash;
    if (name == "dense") return SimilarityBackendKind::HttpDense;
    if (name == "bm25") return SimilarityBackendKind::Bm25;
    throw std::invalid_argument("unknown similarity backend: " + std::string(name));
}

nlohmann::json effective_config_json(const RunConfig& cfg) {
    nlohmann::json strategies = nlohmann::json::array();
    for (auto s : cfg.strategies) strategies.push_back(strategy_name(s));
    return nlohmann::json{
        {"dataset", cfg.dataset.string()},
        {"strategies", strategies},
        {"similarity", to_string(cfg.similarity)},
        {"embedding",
         {{"kind", cfg.embedding.kind == EmbeddingBackendConfig::Kind::LocalHash ? "local-hash"
                                                                                  : "http-service"},
          {"endpoint", cfg.embedding.endpoint},
          {"model", cfg.embedding.model},
          {"api_key_env", cfg.embedding.api_key_env}, // the name, never the value
          {"batch_size", cfg.embedding.batch_size},
          {"max_retries", cfg.embedding.max_retries},
          {"local_dim", cfg.embedding.local_dim},
          {"expected_dim", cfg.embedding.expected_dim ? nlohmann::json(*cfg.embedding.expected_dim)
                                                      : nlohmann::json(nullptr)}}},
        {"generation",
         {{"kind", cfg.generation.kind == GenerationBackendConfig::Kind::Mock ? "mock" : "http"},
          {"endpoint", cfg.generation.endpoint},
          {"model", cfg.generation.model},
          {"api_key_env", cfg.generation.api_key_env},
          {"max_retries", cfg.generation.max_retries},
          {"mock_max_facts", cfg.generation.mock.max_facts}}},
        {"bm25", {{"k1", cfg.bm25.k1}, {"b", cfg.bm25.b},
                  {"combine", cfg.bm25.combine == Bm25Params::Combine::ScoreMean ? "score-mean"
                                                                                  : "rank-mean"}}},
        {"raw_inner_product", cfg.raw_inner_product},
        {"estimator", {{"mode", to_string(cfg.estimator.mode)},
                       {"table_path", cfg.estimator.table_path.string()}}},
        {"per_chunk_token_limit", cfg.per_chunk_token_limit},
        {"summary_token_limit", cfg.summary_token_limit},
        {"task_instruction", cfg.task_instruction},
        {"temperature", cfg.gen_params.temperature},
        {"top_p", cfg.gen_params.top_p},
        {"max_output_tokens", cfg.gen_params.max_output_tokens},
        {"parallel", cfg.parallel},
        {"max_requests_per_second", cfg.max_requests_per_second},
        {"cache_dir", cfg.cache_dir.string()},
        {"seed", cfg.seed},
    };
}

namespace {

// Minimum-interval limiter shared by all outbound requests.
class RateLimiter {
public:
    explicit RateLimiter(double rps)
        : interval_(rps > 0.0 ? std::chrono::nanoseconds(static_cast<long long>(1e9 / rps))
                              : std::chrono::nanoseconds(0)) {}

    void acquire() {
        if (interval_.count() == 0) return;
        std::chrono::steady_clock::time_point wake;
        {
            std::lock_guard lock(mu_);
            auto now = std::chrono::steady_clock::now();
            next_ = std::max(next_, now);
            wake = next_;
            next_ += interval_;
        }
        std::this_thread::sleep_until(wake);
    }

private:
    std::mutex mu_;
    std::chrono::steady_clock::time_point next_{};
    std::chrono::nanoseconds interval_;
};

class ThrottledGeneration : public GenerationBackend {
public:
    ThrottledGeneration(GenerationBackend& inner, RateLimiter& limiter)
        : inner_(inner), limiter_(limiter) {}
    std::string generate(const std::string& prompt, const GenerationParams& params) override {
        limiter_.acquire();
        return inner_.generate(prompt, params);
    }
    bool deterministic() const override { return inner_.deterministic(); }

private:
    GenerationBackend& inner_;
    RateLimiter& limiter_;
};

class ThrottledEmbedding : public EmbeddingBackend {
public:
    ThrottledEmbedding(EmbeddingBackend& inner, RateLimiter& limiter)
        : inner_(inner), limiter_(limiter) {}
    std::string model_name() const override { return inner_.model_name(); }
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override {
        limiter_.acquire();
        return inner_.embed(texts);
    }

private:
    EmbeddingBackend& inner_;
    RateLimiter& limiter_;
};

struct QuerySimilarity {
    SimilarityMatrix matrix;
    std::vector<double> scores;
};

QuerySimilarity compute_similarity(const RunConfig& cfg, const QueryRecord& record,
                                   const std::vector<Chunk>& chunks, EmbeddingBackend* embedder,
                                   const EmbeddingCache* cache) {
    QuerySimilarity out;
    if (cfg.similarity == SimilarityBackendKind::Bm25) {
        out.matrix = bm25_symmetric(chunks, cfg.bm25);
        out.scores = bm25_query_scores(record.query_text, chunks, cfg.bm25);
        return out;
    }
    auto embeddings = embed_chunks(chunks, *embedder, cache);
    auto query_embedding = embed_text(record.query_text, *embedder, cache);
    out.matrix = build_similarity_matrix(embeddings, cfg.raw_inner_product);
    out.scores = query_similarity(query_embedding, embeddings);
    return out;
}

bool needs_similarity(const RunConfig& cfg) {
    for (auto s : cfg.strategies)
        if (s != Strategy::Default) return true;
    return false;
}

Ordering make_ordering(Strategy strategy, int n, const QuerySimilarity* sim) {
    if (n <= 1) {
        Ordering o = default_order(n);
        o.strategy = strategy;
        return o;
    }
    switch (strategy) {
    case Strategy::Default:
        return default_order(n);
    case Strategy::Dense: {
        Ordering o = dense_order(sim->scores);
        return o;
    }
    case Strategy::DfsGreedy:
        return dfs_greedy_order(sim->matrix, select_root(sim->scores));
    case Strategy::ClOrder: {
        auto tree = max_spanning_tree(sim->matrix);
        tree.root = select_root(sim->scores);
        return bfs_order(tree, *tree.root);
    }
    }
    return default_order(n);
}

QueryRunResult run_one_query(const RunConfig& cfg, const QueryRecord& record,
                             const TokenEstimator& est, EmbeddingBackend* embedder,
                             const EmbeddingCache* cache, GenerationBackend& generator) {
    QueryRunResult out;
    out.query_id = record.query_id;

    try {
        out.chunks = split_into_chunks(record.query_id, record.context,
                                       cfg.per_chunk_token_limit, est);
    } catch (const TextUnsplittable& e) {
        out.failure = e.what();
        out.failure_kind = FailureKind::Data;
        return out;
    }

    const int n = static_cast<int>(out.chunks.size());
    std::optional<QuerySimilarity> sim;
    if (n >= 2 && needs_similarity(cfg)) {
        try {
            sim = compute_similarity(cfg, record, out.chunks, embedder, cache);
        } catch (const BackendUnavailable& e) {
            out.failure = e.what();
            out.failure_kind = FailureKind::Backend;
            return out;
        } catch (const DimensionDrift& e) {
            out.failure = e.what();
            out.failure_kind = FailureKind::Backend;
            return out;
        }
    }

    PipelineLimits limits;
    limits.per_chunk_token_limit = cfg.per_chunk_token_limit;
    limits.summary_token_limit = cfg.summary_token_limit;
    limits.gen = cfg.gen_params;

    for (Strategy strategy : cfg.strategies) {
        StrategyRun run;
        run.strategy = strategy;
        run.ordering = make_ordering(strategy, n, sim ? &*sim : nullptr);
        run.ordering.strategy = strategy;
        try {
            run.result = run_chain(generator, record.query_id, record.query_text, out.chunks,
                                   run.ordering, limits, est, cfg.task_instruction);
            run.eval = score_answer(run.result->answer, record, strategy_name(strategy));
        } catch (const ChainAborted& e) {
            run.failure = e.what();
            run.failure_kind = FailureKind::Backend;
        }
        out.runs.push_back(std::move(run));
    }
    return out;
}

} // namespace

RunOutput run_dataset(const RunConfig& cfg, const std::vector<QueryRecord>& records) {
    TokenEstimator est = TokenEstimator::from_config(cfg.estimator);

    std::unique_ptr<EmbeddingBackend> embedder;
    if (cfg.similarity != SimilarityBackendKind::Bm25) {
        EmbeddingBackendConfig ecfg = cfg.embedding;
        if (cfg.similarity == SimilarityBackendKind::LocalHash)
            ecfg.kind = EmbeddingBackendConfig::Kind::LocalHash;
        else
            ecfg.kind = EmbeddingBackendConfig::Kind::HttpService;
        embedder = make_embedding_backend(ecfg);
    }
    std::unique_ptr<EmbeddingCache> cache;
    if (!cfg.cache_dir.empty()) cache = std::make_unique<EmbeddingCache>(cfg.cache_dir);

    auto generator = make_generation_backend(cfg.generation);

    RateLimiter limiter(cfg.max_requests_per_second);
    ThrottledGeneration throttled_gen(*generator, limiter);
    std::unique_ptr<ThrottledEmbedding> throttled_emb;
    if (embedder) throttled_emb = std::make_unique<ThrottledEmbedding>(*embedder, limiter);

    RunOutput output;
    output.queries.resize(records.size());

    const int workers = std::max(1, std::min<int>(cfg.parallel, static_cast<int>(records.size())));
    std::atomic<size_t> next{0};
    auto work = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= records.size()) break;
            try {
                output.queries[i] =
                    run_one_query(cfg, records[i], est, throttled_emb ? throttled_emb.get() : nullptr,
                                  cache.get(), throttled_gen);
            } catch (const std::exception& e) {
                QueryRunResult failed;
                failed.query_id = records[i].query_id;
                failed.failure = e.what();
                failed.failure_kind = FailureKind::Data;
                output.queries[i] = std::move(failed);
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<size_t>(workers));
        for (int w = 0; w < workers; ++w) threads.emplace_back(work);
        for (auto& t : threads) t.join();
    }

    for (const auto& q : output.queries) {
        if (q.failure) {
            (q.failure_kind == FailureKind::Backend ? output.any_backend_failure
                                                    : output.any_data_failure) = true;
        }
        for (const auto& r : q.runs) {
            if (r.failure) {
                (r.failure_kind == FailureKind::Backend ? output.any_backend_failure
                                                        : output.any_data_failure) = true;
            }
        }
    }
    return output;
}

void write_results_jsonl(std::ostream& out, const RunOutput& output) {
    for (const auto& q : output.queries) {
        if (q.failure) {
            out << nlohmann::json{{"query_id", q.query_id}, {"error", *q.failure}}.dump() << '\n';
            continue;
        }
        for (const auto& r : q.runs) {
            if (r.failure) {
                out << nlohmann::json{{"query_id", q.query_id},
                                      {"strategy", strategy_name(r.strategy)},
                                      {"error", *r.failure}}
                           .dump()
                    << '\n';
                continue;
            }
            nlohmann::json line{{"query_id", q.query_id},
                                {"strategy", strategy_name(r.strategy)},
                                {"answer", r.result->answer},
                                {"em", r.eval.em ? nlohmann::json(*r.eval.em) : nlohmann::json(nullptr)}};
            out << line.dump() << '\n';
        }
    }
}

void write_traces_jsonl(std::ostream& out, const RunOutput& output, bool include_latency) {
    for (const auto& q : output.queries)
        for (const auto& r : q.runs)
            if (r.result) write_trace_jsonl(out, *r.result, q.chunks, r.ordering, include_latency);
}

std::vector<EvalRecord> collect_eval_records(const RunOutput& output) {
    std::vector<EvalRecord> records;
    for (const auto& q : output.queries)
        for (const auto& r : q.runs)
            if (r.result) records.push_back(r.eval);
    return records;
}

SimulateReport run_simulation(const SimulateConfig& cfg) {
    if (cfg.seeds < 1) throw std::invalid_argument("seeds must be >= 1");

    const std::vector<std::string> labels{"cl-order", "dense", "random", "default"};
    std::vector<std::vector<double>> retention(labels.size());
    int cl_wins = 0, cl_losses = 0;

    for (int seed = 0; seed < cfg.seeds; ++seed) {
        auto corpus = make_clustered_corpus(cfg.corpus, static_cast<uint64_t>(seed));
        const int n = cfg.corpus.num_chunks;

        auto tree = max_spanning_tree(corpus.sim);
        tree.root = select_root(corpus.query_scores);
        auto cl = bfs_order(tree, *tree.root);
        auto dense = dense_order(corpus.query_scores);
        auto random = random_order(n, static_cast<uint64_t>(seed) * 0x9E3779B97F4A7C15ull + 1);
        auto fallback = default_order(n);

        const Ordering* orders[] = {&cl, &dense, &random, &fallback};
        double values[4];
        for (size_t s = 0; s < 4; ++s) {
            values[s] = simulate_lossy_pipeline(corpus.chunks, *orders[s], cfg.sim,
                                                corpus.relevance_keys);
            retention[s].push_back(values[s]);
        }
        if (values[0] > values[2]) ++cl_wins;
        if (values[0] < values[2]) ++cl_losses;
    }

    SimulateReport report;
    for (size_t s = 0; s < labels.size(); ++s) {
        SimulateReport::Row row;
        row.strategy = labels[s];
        row.seeds = cfg.seeds;
        double sum = 0.0;
        for (double v : retention[s]) sum += v;
        row.mean_retention = sum / cfg.seeds;
        double var = 0.0;
        for (double v : retention[s]) var += (v - row.mean_retention) * (v - row.mean_retention);
        row.stddev = cfg.seeds > 1 ? std::sqrt(var / (cfg.seeds - 1)) : 0.0;
        report.rows.push_back(row);
    }
    report.cl_wins = cl_wins;
    report.cl_losses = cl_losses;
    report.p_cl_vs_random = sign_test_p_one_sided(cl_wins, cl_losses);
    return report;
}

nlohmann::json simulate_report_json(const SimulateReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.rows) {
        rows.push_back(nlohmann::json{{"strategy", row.strategy},
                                      {"seeds", row.seeds},
                                      {"mean_retention", row.mean_retention},
                                      {"stddev", row.stddev}});
    }
    return nlohmann::json{{"strategies", rows},
                          {"sign_test", {{"comparison", "cl-order vs random"},
                                         {"wins", report.cl_wins},
                                         {"losses", report.cl_losses},
                                         {"p_one_sided", report.p_cl_vs_random}}}};
}

} // namespace coa

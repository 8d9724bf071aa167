#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "coa/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitBackend = 3;
constexpr int kExitData = 4;

struct OrderArgs {
    std::string doc_path;
    std::string query;
    std::string strategy = "cl-order";
    std::string matrix_file;
    int root_override = -1;
    std::string out_path = "-";
    std::string chunk_dump_path;
};

struct RunArgs {
    std::string results_path = "results.jsonl";
    std::string traces_path;
    std::string strategy = "cl-order";
};

struct SimArgs {
    coa::SimulateConfig cfg;
    std::string out_path;
};

struct EvalArgs {
    std::string dataset_path;
    std::string results_path;
    std::string csv_path;
};

void write_text(const std::string& path, const std::string& content) {
    if (path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::vector<coa::Strategy> parse_strategies(const std::string& name) {
    if (name == "all")
        return {coa::Strategy::Default, coa::Strategy::Dense, coa::Strategy::DfsGreedy,
                coa::Strategy::ClOrder};
    return {coa::parse_strategy(name)};
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// The run config file is flat key=value, one option per line, '#' comments.
// Keys mirror the long flag names. Values from the file are injected as
// synthetic argv tokens unless the same flag is already present, which gives
// the precedence flags > file > defaults.
std::vector<std::string> apply_config_file(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    if (args.size() < 2 || args[1] != "run") return args;

    std::string config_path;
    for (size_t i = 2; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size())
            config_path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0)
            config_path = args[i].substr(9);
    }
    if (config_path.empty()) return args;

    std::ifstream in(config_path);
    if (!in) throw std::invalid_argument("cannot open config file: " + config_path);

    auto has_flag = [&](const std::string& flag) {
        for (size_t i = 2; i < args.size(); ++i)
            if (args[i] == flag || args[i].rfind(flag + "=", 0) == 0) return true;
        return false;
    };
    auto truthy = [](const std::string& v) {
        return v == "true" || v == "1" || v == "yes" || v == "on";
    };

    std::vector<std::string> injected;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string entry = trim(line);
        if (entry.empty() || entry[0] == '#') continue;
        auto eq = entry.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key=value");
        std::string key = trim(entry.substr(0, eq));
        std::string value = trim(entry.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        std::string flag = "--" + key;
        if (key.empty() || key == "config")
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": bad key");
        if (has_flag(flag)) continue;
        if (key == "raw-inner-product" || key == "bm25-rank-mean") {
            if (truthy(value)) injected.push_back(flag);
        } else {
            injected.push_back(flag);
            injected.push_back(value);
        }
    }
    args.insert(args.begin() + 2, injected.begin(), injected.end());
    return args;
}

// {"values": [[...]], "query_scores": [...]} with a symmetric values matrix.
struct InjectedMatrix {
    coa::SimilarityMatrix matrix;
    std::vector<double> query_scores;
};

InjectedMatrix load_matrix_file(const std::string& path) {
    auto j = nlohmann::json::parse(read_text(path));
    const auto& values = j.at("values");
    int n = static_cast<int>(values.size());
    InjectedMatrix out;
    out.matrix = coa::SimilarityMatrix::zeros(n, coa::SimilarityKind::Custom);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(values[i].size()) != n)
            throw std::runtime_error("similarity matrix is not square");
        for (int k = 0; k < n; ++k)
            out.matrix.values[static_cast<size_t>(i) * n + k] = values[i][k].get<double>();
    }
    if (!out.matrix.is_symmetric()) throw std::runtime_error("similarity matrix is not symmetric");
    if (j.contains("query_scores"))
        out.query_scores = j.at("query_scores").get<std::vector<double>>();
    return out;
}

int cmd_order(const coa::RunConfig& run_cfg, const OrderArgs& args) {
    auto est = coa::TokenEstimator::from_config(run_cfg.estimator);
    std::string text = read_text(args.doc_path);
    auto chunks = coa::split_into_chunks(args.doc_path, text, run_cfg.per_chunk_token_limit, est);
    const int n = static_cast<int>(chunks.size());
    if (n == 0) throw std::runtime_error("document produced no chunks");

    if (!args.chunk_dump_path.empty()) {
        std::ofstream dump(args.chunk_dump_path, std::ios::binary | std::ios::trunc);
        if (!dump) throw std::runtime_error("cannot write " + args.chunk_dump_path);
        for (const auto& c : chunks) {
            dump << nlohmann::json{{"chunk_id", c.chunk_id},
                                   {"doc_id", c.doc_id},
                                   {"seq_index", c.seq_index},
                                   {"token_count", c.token_count},
                                   {"text", c.text}}
                        .dump()
                 << '\n';
        }
    }

    coa::Strategy strategy = coa::parse_strategy(args.strategy);

    coa::SimilarityMatrix matrix;
    std::vector<double> scores;

    if (!args.matrix_file.empty()) {
        auto injected = load_matrix_file(args.matrix_file);
        if (injected.matrix.n != n)
            throw std::runtime_error("matrix size " + std::to_string(injected.matrix.n) +
                                     " does not match " + std::to_string(n) + " chunks");
        matrix = std::move(injected.matrix);
        scores = std::move(injected.query_scores);

    } else if (n >= 2 && strategy != coa::Strategy::Default) {
        if (run_cfg.similarity == coa::SimilarityBackendKind::Bm25) {
            matrix = coa::bm25_symmetric(chunks, run_cfg.bm25);
            scores = coa::bm25_query_scores(args.query, chunks, run_cfg.bm25);
        } else {
            auto backend = coa::make_embedding_backend(run_cfg.embedding);
            std::unique_ptr<coa::EmbeddingCache> cache;
            if (!run_cfg.cache_dir.empty())
                cache = std::make_unique<coa::EmbeddingCache>(run_cfg.cache_dir);
            auto embeddings = coa::embed_chunks(chunks, *backend, cache.get());
            auto query_embedding = coa::embed_text(args.query, *backend, cache.get());
            matrix = coa::build_similarity_matrix(embeddings, run_cfg.raw_inner_product);
            scores = coa::query_similarity(query_embedding, embeddings);
        }

    }

    if (strategy == coa::Strategy::Dense && scores.empty() && n >= 2)
        throw std::invalid_argument("dense ordering needs query_scores in the matrix file");

    int root = 0;
    if (args.root_override >= 0) {
        if (args.root_override >= n) throw std::invalid_argument("--root out of range");
        root = args.root_override;
    } else if (!scores.empty()) {
        root = coa::select_root(scores);
    } else if (strategy != coa::Strategy::Default && n >= 2) {
        throw std::invalid_argument(
            "matrix file has no query_scores; pass --root to pick the traversal root");
    }

    coa::Ordering ordering;
    coa::DependencyTree tree;
    tree.n = n;
    switch (strategy) {
    case coa::Strategy::Default:
        ordering = coa::default_order(n);
        break;
    case coa::Strategy::Dense:
        ordering = n >= 2 ? coa::dense_order(scores) : coa::default_order(n);
        break;
    case coa::Strategy::DfsGreedy:
        ordering = n >= 2 ? coa::dfs_greedy_order(matrix, root) : coa::default_order(n);
        break;
    case coa::Strategy::ClOrder:
        if (n >= 2) {
            tree = coa::max_spanning_tree(matrix);
            tree.root = root;
            ordering = coa::bfs_order(tree, root);
        } else {
            ordering = coa::default_order(n);
        }
        break;
    }
    ordering.strategy = strategy;

    auto dump = coa::ordering_dump(ordering, strategy == coa::Strategy::ClOrder ? &tree : nullptr);
    dump["config"] = coa::effective_config_json(run_cfg);
    dump["config"]["doc"] = args.doc_path;
    dump["config"]["num_chunks"] = n;
    write_text(args.out_path, dump.dump(2) + "\n");

    if (args.out_path != "-") {
        std::cout << "chunks: " << n << ", strategy: " << coa::strategy_name(strategy) << "\n";
        if (strategy == coa::Strategy::ClOrder && n >= 2)
            std::cout << coa::render_tree(tree, root);
        std::cout << "order:";
        for (int idx : ordering.permutation) std::cout << ' ' << idx;
        std::cout << "\nwritten: " << args.out_path << "\n";
    }

    return kExitOk;
}

int cmd_run(coa::RunConfig& cfg, const RunArgs& args) {
    cfg.strategies = parse_strategies(args.strategy);
    auto records = coa::load_dataset(cfg.dataset);
    auto output = coa::run_dataset(cfg, records);

    {
        std::ofstream out(args.results_path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + args.results_path);
        coa::write_results_jsonl(out, output);
        std::ofstream cfg_out(args.results_path + ".config.json", std::ios::binary | std::ios::trunc);
        cfg_out << coa::effective_config_json(cfg).dump(2) << "\n";
    }
    if (!args.traces_path.empty()) {
        std::ofstream out(args.traces_path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + args.traces_path);
        bool include_latency = cfg.generation.kind != coa::GenerationBackendConfig::Kind::Mock;
        coa::write_traces_jsonl(out, output, include_latency);
    }

    std::cout << "# config: " << coa::effective_config_json(cfg).dump() << "\n";
    auto reports = coa::aggregate(coa::collect_eval_records(output));
    std::cout << coa::render_report_table(reports);

    int failures = 0;
    for (const auto& q : output.queries) {
        if (q.failure) {
            ++failures;
            std::cerr << "query " << q.query_id << " failed: " << *q.failure << "\n";
        }
        for (const auto& r : q.runs) {
            if (r.failure) {
                ++failures;
                std::cerr << "query " << q.query_id << " [" << coa::strategy_name(r.strategy)
                          << "] failed: " << *r.failure << "\n";
            }
        }
    }
    std::cout << "results: " << args.results_path;
    if (!args.traces_path.empty()) std::cout << ", traces: " << args.traces_path;
    std::cout << ", failures: " << failures << "\n";

    if (output.any_backend_failure) return kExitBackend;
    if (output.any_data_failure) return kExitData;
    return kExitOk;
}

int cmd_simulate(const SimArgs& args) {
    auto report = coa::run_simulation(args.cfg);
    auto j = coa::simulate_report_json(report);
    j["config"] = {{"seeds", args.cfg.seeds},
                   {"num_chunks", args.cfg.corpus.num_chunks},
                   {"num_clusters", args.cfg.corpus.num_clusters},
                   {"facts_per_chunk", args.cfg.corpus.facts_per_chunk},
                   {"capacity", args.cfg.sim.capacity},
                   {"window", args.cfg.sim.window}};
    if (!args.out_path.empty()) write_text(args.out_path, j.dump(2) + "\n");

    std::cout << "# config: " << j["config"].dump() << "\n";
    for (const auto& row : report.rows) {
        std::cout << row.strategy << ": mean_retention=" << row.mean_retention
                  << " stddev=" << row.stddev << " seeds=" << row.seeds << "\n";
    }
    std::cout << "sign test cl-order vs random: wins=" << report.cl_wins
              << " losses=" << report.cl_losses << " p=" << report.p_cl_vs_random << "\n";
    return kExitOk;
}

int cmd_eval(const EvalArgs& args) {
    auto records = coa::load_dataset(args.dataset_path);
    std::map<std::string, const coa::QueryRecord*> by_id;
    for (const auto& r : records) by_id[r.query_id] = &r;

    std::ifstream in(args.results_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + args.results_path);
    std::vector<coa::EvalRecord> evals;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("query_id"))
            throw coa::MalformedRecord(lineno, "", "bad results line");
        if (j.contains("error")) continue; // failed runs carry no answer
        auto it = by_id.find(j.at("query_id").get<std::string>());
        if (it == by_id.end())
            throw coa::MalformedRecord(lineno, "query_id", "not present in the dataset");
        evals.push_back(coa::score_answer(j.value("answer", ""), *it->second,
                                          j.value("strategy", "unknown")));
    }

    auto reports = coa::aggregate(evals);
    std::cout << "# dataset: " << args.dataset_path << ", results: " << args.results_path << "\n";
    std::cout << coa::render_report_table(reports);
    if (!args.csv_path.empty()) write_text(args.csv_path, coa::report_csv(reports));
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Chunk ordering and chain-of-agents runner for long-context QA"};
    app.require_subcommand(1);

    coa::RunConfig cfg;
    OrderArgs order_args;
    RunArgs run_args;
    SimArgs sim_args;
    EvalArgs eval_args;
    std::string cache_cmd_dir = "coa-cache";

    std::string similarity = "local-hash";
    std::string generation = "mock";
    std::string estimator_mode = "whitespace-words";
    std::string estimator_table;
    bool bm25_rank_mean = false;

    auto add_similarity_flags = [&](CLI::App* sub) {
        sub->add_option("--similarity", similarity, "local-hash | dense | bm25")
            ->check(CLI::IsMember({"local-hash", "dense", "bm25"}));
        sub->add_option("--embed-endpoint", cfg.embedding.endpoint, "HTTP embedding endpoint");
        sub->add_option("--embed-model", cfg.embedding.model, "Embedding model name");
        sub->add_option("--embed-dim", cfg.embedding.local_dim, "Local hash embedding dimension");
        sub->add_option("--embed-expected-dim", [&cfg](const std::vector<std::string>& vals) {
                cfg.embedding.expected_dim = std::stoi(vals[0]);
                return true;
            }, "Declared embedding dimension (drift check)");
        sub->add_option("--embed-batch-size", cfg.embedding.batch_size, "Embedding batch size");
        sub->add_option("--embed-retries", cfg.embedding.max_retries, "Embedding retry budget");
        sub->add_option("--embed-api-key-env", cfg.embedding.api_key_env,
                        "Env var holding the embedding API key");
        sub->add_option("--bm25-k1", cfg.bm25.k1, "BM25 k1");
        sub->add_option("--bm25-b", cfg.bm25.b, "BM25 b");
        sub->add_flag("--bm25-rank-mean", bm25_rank_mean,
                      "Combine directed BM25 by mean rank instead of mean score");
        sub->add_flag("--raw-inner-product", cfg.raw_inner_product,
                      "Use raw inner product instead of cosine");
        sub->add_option("--cache-dir", cfg.cache_dir, "Embedding cache directory");
        sub->add_option("--estimator", estimator_mode,
                        "whitespace-words | bytes-div-4 | external-tokenizer-table")
            ->check(CLI::IsMember({"whitespace-words", "bytes-div-4", "external-tokenizer-table"}));
        sub->add_option("--estimator-table", estimator_table, "Codepoint weight table (JSON)");
        sub->add_option("--chunk-limit", cfg.per_chunk_token_limit, "Per-chunk token limit");
    };

    auto* order = app.add_subcommand("order", "Chunk a document and dump a chunk ordering");
    order->add_option("--doc", order_args.doc_path, "Document file")->required();
    order->add_option("--query", order_args.query, "Query text")->required();
    order->add_option("--strategy", order_args.strategy, "default | dense | dfs-greedy | cl-order")
        ->check(CLI::IsMember({"default", "dense", "dfs-greedy", "cl-order"}));
    order->add_option("--similarity-matrix-file", order_args.matrix_file,
                      "Inject a precomputed similarity matrix (JSON)");
    order->add_option("--root", order_args.root_override, "Force the traversal root index");
    order->add_option("--out", order_args.out_path, "Output path for the JSON dump ('-' = stdout)");
    order->add_option("--dump-chunks", order_args.chunk_dump_path,
                      "Also write the chunk partition as JSONL");
    add_similarity_flags(order);

    std::string config_path_shown; // consumed by apply_config_file before parsing
    auto* run = app.add_subcommand("run", "Run the worker/manager pipeline over a dataset");
    run->add_option("--config", config_path_shown, "Flat key=value config file (flags win)");
    run->add_option("--dataset", cfg.dataset, "Dataset JSONL")->required();
    run->add_option("--strategy", run_args.strategy, "default | dense | dfs-greedy | cl-order | all")
        ->check(CLI::IsMember({"default", "dense", "dfs-greedy", "cl-order", "all"}));
    add_similarity_flags(run);
    run->add_option("--generation", generation, "mock | http")
        ->check(CLI::IsMember({"mock", "http"}));
    run->add_option("--gen-endpoint", cfg.generation.endpoint, "HTTP generation endpoint");
    run->add_option("--gen-model", cfg.generation.model, "Generation model name");
    run->add_option("--gen-retries", cfg.generation.max_retries, "Generation retry budget");
    run->add_option("--gen-api-key-env", cfg.generation.api_key_env,
                    "Env var holding the generation API key");
    run->add_option("--mock-capacity", cfg.generation.mock.max_facts,
                    "Mock backend memory capacity in facts");
    run->add_option("--summary-limit", cfg.summary_token_limit, "Summary token limit");
    run->add_option("--temperature", cfg.gen_params.temperature, "Sampling temperature");
    run->add_option("--top-p", cfg.gen_params.top_p, "Nucleus sampling top_p");
    run->add_option("--max-output-tokens", cfg.gen_params.max_output_tokens, "Max output tokens");
    run->add_option("--task-instruction", cfg.task_instruction, "Manager task instruction");
    run->add_option("--parallel", cfg.parallel, "Concurrent queries");
    run->add_option("--max-rps", cfg.max_requests_per_second, "Outbound request rate limit");
    run->add_option("--seed", cfg.seed, "Run seed (recorded for provenance)");
    run->add_option("--results", run_args.results_path, "Results JSONL path");
    run->add_option("--traces", run_args.traces_path, "Trace JSONL path");

    auto* simulate = app.add_subcommand("simulate", "Lossy-memory order-sensitivity Monte Carlo");
    simulate->add_option("--seeds", sim_args.cfg.seeds, "Number of seeds");
    simulate->add_option("--chunks", sim_args.cfg.corpus.num_chunks, "Chunks per corpus");
    simulate->add_option("--clusters", sim_args.cfg.corpus.num_clusters, "Planted clusters");
    simulate->add_option("--facts-per-chunk", sim_args.cfg.corpus.facts_per_chunk, "Facts per chunk");
    simulate->add_option("--capacity", sim_args.cfg.sim.capacity, "Memory capacity in facts");
    simulate->add_option("--window", sim_args.cfg.sim.window, "Cluster activation window");
    simulate->add_option("--intra-sim", sim_args.cfg.corpus.intra_sim, "Intra-cluster similarity");
    simulate->add_option("--inter-sim", sim_args.cfg.corpus.inter_sim, "Inter-cluster similarity");
    simulate->add_option("--sim-noise", sim_args.cfg.corpus.sim_noise, "Similarity noise span");
    simulate->add_option("--out", sim_args.out_path, "Report JSON path");

    auto* eval = app.add_subcommand("eval", "Score a results file against a dataset");
    eval->add_option("--dataset", eval_args.dataset_path, "Dataset JSONL")->required();
    eval->add_option("--results", eval_args.results_path, "Results JSONL")->required();
    eval->add_option("--csv", eval_args.csv_path, "Write the report as CSV");

    auto* cache = app.add_subcommand("cache", "Inspect or clear the embedding cache");
    cache->require_subcommand(1);
    auto* cache_inspect = cache->add_subcommand("inspect", "Show entry count and size");
    auto* cache_clear = cache->add_subcommand("clear", "Remove all entries");
    cache_inspect->add_option("--cache-dir", cache_cmd_dir, "Cache directory")->required();
    cache_clear->add_option("--cache-dir", cache_cmd_dir, "Cache directory")->required();

    try {
        auto args = apply_config_file(argc, argv);
        std::vector<const char*> argv2;
        argv2.reserve(args.size());
        for (const auto& a : args) argv2.push_back(a.c_str());
        app.parse(static_cast<int>(argv2.size()), argv2.data());
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        cfg.similarity = coa::parse_similarity_backend(similarity);
        cfg.generation.kind = generation == "mock" ? coa::GenerationBackendConfig::Kind::Mock
                                                   : coa::GenerationBackendConfig::Kind::HttpService;
        cfg.estimator.mode = coa::parse_token_estimator_mode(estimator_mode);
        cfg.estimator.table_path = estimator_table;
        if (bm25_rank_mean) cfg.bm25.combine = coa::Bm25Params::Combine::RankMean;
        if (cfg.similarity == coa::SimilarityBackendKind::HttpDense && cfg.embedding.endpoint.empty())
            throw std::invalid_argument("--similarity dense needs --embed-endpoint");
        if (cfg.generation.kind == coa::GenerationBackendConfig::Kind::HttpService &&
            cfg.generation.endpoint.empty() && run->parsed())
            throw std::invalid_argument("--generation http needs --gen-endpoint");
        if (cfg.per_chunk_token_limit <= 0 || cfg.summary_token_limit <= 0)
            throw std::invalid_argument("token limits must be > 0");
        if (cfg.parallel < 1) throw std::invalid_argument("--parallel must be >= 1");

        if (order->parsed()) return cmd_order(cfg, order_args);
        if (run->parsed()) return cmd_run(cfg, run_args);
        if (simulate->parsed()) return cmd_simulate(sim_args);
        if (eval->parsed()) return cmd_eval(eval_args);
        if (cache->parsed()) {
            coa::EmbeddingCache store{std::filesystem::path(cache_cmd_dir)};
            if (cache_inspect->parsed()) {
                auto stats = store.stats();
                std::cout << "entries: " << stats.entries << "\n"
                          << "bytes: " << stats.total_bytes << "\n";
            } else if (cache_clear->parsed()) {
                std::cout << "removed: " << store.clear() << "\n";
            }
            return kExitOk;
        }
        return kExitConfig;
    } catch (const coa::BackendUnavailable& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const coa::DimensionDrift& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const coa::ChainAborted& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const coa::MalformedRecord& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const coa::TextUnsplittable& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}

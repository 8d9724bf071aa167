#include <doctest.h>

#include <algorithm>

#include "coa/pipeline.hpp"
#include "test_util.hpp"

using namespace coa;

namespace {

Chunk chunk(const std::string& doc, int seq, const std::string& text) {
    Chunk c;
    c.doc_id = doc;
    c.seq_index = seq;
    c.chunk_id = doc + "#" + std::to_string(seq);
    c.text = text;
    c.token_count = static_cast<int>(text.size());
    return c;
}

// Records every prompt it sees; replies with a fixed string.
class RecordingBackend : public GenerationBackend {
public:
    explicit RecordingBackend(std::string reply = "ok") : reply_(std::move(reply)) {}
    std::string generate(const std::string& prompt, const GenerationParams&) override {
        prompts.push_back(prompt);
        return reply_;
    }
    bool deterministic() const override { return true; }
    std::vector<std::string> prompts;

private:
    std::string reply_;
};

class FailingBackend : public GenerationBackend {
public:
    explicit FailingBackend(int fail_at) : fail_at_(fail_at) {}
    std::string generate(const std::string& prompt, const GenerationParams&) override {
        if (++calls_ == fail_at_) throw BackendUnavailable("synthetic outage");
        (void)prompt;
        return "F: v";
    }

private:
    int fail_at_;
    int calls_ = 0;
};

} // namespace

TEST_CASE("worker prompt renders byte-identical to the golden files") {
    auto empty = render_worker_prompt("The vault code is 7431.", "", "What is the vault code?");
    CHECK(empty == coa::test::read_file(coa::test::test_path("golden/worker_prompt_empty_memory.txt")));

    auto with_memory = render_worker_prompt("Chunk two text.", "PREV: the vault is in the basement",
                                            "Where is the vault?");
    CHECK(with_memory == coa::test::read_file(coa::test::test_path("golden/worker_prompt_with_memory.txt")));
}

TEST_CASE("manager prompt renders byte-identical to the golden file") {
    auto prompt = render_manager_prompt("CODE: 7431", "What is the vault code?");
    CHECK(prompt == coa::test::read_file(coa::test::test_path("golden/manager_prompt_basic.txt")));
}

TEST_CASE("substitution touches only the placeholder slots") {
    // Values that look like placeholders must survive literally.
    auto prompt = render_worker_prompt("chunk with {query} inside", "memory {chunk}", "q {summary_till}");
    CHECK(prompt.find("chunk with {query} inside") != std::string::npos);
    CHECK(prompt.find("Here is the summary of the previous source text: memory {chunk}\n") !=
          std::string::npos);
    CHECK(prompt.find("Question: q {summary_till}\n") != std::string::npos);

    auto manager = render_manager_prompt("", "q", "inst");
    CHECK(manager.find("inst\nThe following are given passages.") == 0);
    CHECK(manager.find("summary:\n\n\nQuestion: q\nAnswer:") != std::string::npos);
}

TEST_CASE("task instruction override replaces only the instruction slot") {
    auto a = render_manager_prompt("S", "Q");
    auto b = render_manager_prompt("S", "Q", "Custom instruction.");
    CHECK(a.find(kDefaultTaskInstruction) == 0);
    CHECK(b.find("Custom instruction.\n") == 0);
    CHECK(a.substr(std::string(kDefaultTaskInstruction).size()) ==
          b.substr(std::string("Custom instruction.").size()));
}

TEST_CASE("truncate_to_budget clips at word boundaries and is idempotent") {
    auto est = TokenEstimator::whitespace_words();
    CHECK(truncate_to_budget("short text", 10, est) == "short text");
    CHECK(truncate_to_budget("one two three four five six seven eight nine ten", 4, est) ==
          "one two three four");
    auto once = truncate_to_budget("a b c d e f", 3, est);
    CHECK(truncate_to_budget(once, 3, est) == once);
    CHECK(truncate_to_budget(std::string(64, 'x'), 5, TokenEstimator::bytes_div4()).empty());
    CHECK_THROWS_AS(truncate_to_budget("x", 0, est), std::invalid_argument);
}

TEST_CASE("worker_step is deterministic, budget-bounded and increments the step") {
    MockSummarizerBackend backend({2});
    auto est = TokenEstimator::whitespace_words();
    PipelineLimits limits;
    limits.summary_token_limit = 8000;
    MemoryState m0;
    auto c = chunk("d", 0, "CODE: 7431\nfiller words here");
    auto s1 = worker_step(backend, "what is the code?", c, m0, limits, est);
    auto s2 = worker_step(backend, "what is the code?", c, m0, limits, est);
    CHECK(s1.step_index == 1);
    CHECK(s1.summary_text == s2.summary_text);
    CHECK(s1.token_count == est.estimate(s1.summary_text));
    CHECK(s1.token_count <= limits.summary_token_limit);

    auto s3 = worker_step(backend, "what is the code?", c, s1, limits, est);
    CHECK(s3.step_index == 2);
}

TEST_CASE("worker_step truncates oversized backend output to the budget") {
    RecordingBackend backend(
        "ONE: a\nTWO: b\nTHREE: c\nFOUR: d\nFIVE: e\nSIX: f\nSEVEN: g\nEIGHT: h");
    auto est = TokenEstimator::whitespace_words();
    PipelineLimits limits;
    limits.summary_token_limit = 5;
    auto s = worker_step(backend, "q", chunk("d", 0, "text"), MemoryState{}, limits, est);
    CHECK(s.token_count <= 5);
}

TEST_CASE("the default 8000-token summary budget binds on oversized output") {
    std::string huge;
    for (int i = 0; i < 9000; ++i) {
        if (i) huge.push_back(' ');
        huge += "w" + std::to_string(i);
    }
    RecordingBackend backend(huge);
    auto est = TokenEstimator::whitespace_words();
    PipelineLimits limits; // defaults: per-chunk 8000, summary 8000
    CHECK(limits.summary_token_limit == 8000);
    CHECK(limits.per_chunk_token_limit == 8000);
    auto s = worker_step(backend, "q", chunk("d", 0, "text"), MemoryState{}, limits, est);
    CHECK(s.token_count <= 8000);
    CHECK(s.token_count == 8000); // truncation cut exactly at the budget here
}

TEST_CASE("manager_step answers from memory facts and handles empty memory") {
    MockSummarizerBackend backend;
    GenerationParams params;
    MemoryState memory;
    memory.summary_text = "VAULT_CODE: 7431\nWEATHER: sunny";
    memory.token_count = 4;
    auto answer = manager_step(backend, "what is the vault code?", memory,
                               std::string(kDefaultTaskInstruction), params);
    CHECK(answer == "7431");

    MemoryState empty;
    auto unknown = manager_step(backend, "anything?", empty,
                                std::string(kDefaultTaskInstruction), params);
    CHECK(unknown == "unknown");
}

TEST_CASE("run_chain over one chunk: trace length two, worker saw empty memory") {
    RecordingBackend backend("SUMMARY: hello");
    auto est = TokenEstimator::whitespace_words();
    PipelineLimits limits;
    std::vector<Chunk> chunks{chunk("d", 0, "only chunk")};
    auto result = run_chain(backend, "q1", "question?", chunks, default_order(1), limits, est);
    REQUIRE(result.trace.size() == 2);
    CHECK(result.trace[0].summary_text.empty());
    CHECK(result.trace[0].step_index == 0);
    CHECK(result.trace[1].step_index == 1);
    REQUIRE(backend.prompts.size() == 2); // one worker + one manager
    CHECK(backend.prompts[0].find("Here is the summary of the previous source text: \n") !=
          std::string::npos);
}

TEST_CASE("run_chain invokes workers in exactly the ordering sequence") {
    RecordingBackend backend;
    auto est = TokenEstimator::whitespace_words();
    PipelineLimits limits;
    std::vector<Chunk> chunks{chunk("d", 0, "alpha_text"), chunk("d", 1, "beta_text"),
                              chunk("d", 2, "gamma_text")};

    auto identity = run_chain(backend, "q", "query?", chunks, default_order(3), limits, est);
    REQUIRE(backend.prompts.size() == 4);
    CHECK(backend.prompts[0].find("alpha_text") == 0);
    CHECK(backend.prompts[1].find("beta_text") == 0);
    CHECK(backend.prompts[2].find("gamma_text") == 0);
    CHECK(identity.steps.size() == 4);
    CHECK(identity.steps[0].chunk_id == "d#0");
    CHECK(identity.steps[2].chunk_id == "d#2");

    backend.prompts.clear();
    Ordering reversed;
    reversed.strategy = Strategy::Dense;
    reversed.permutation = {2, 0, 1};
    run_chain(backend, "q", "query?", chunks, reversed, limits, est);
    CHECK(backend.prompts[0].find("gamma_text") == 0);
    CHECK(backend.prompts[1].find("alpha_text") == 0);
    CHECK(backend.prompts[2].find("beta_text") == 0);
}

TEST_CASE("different orderings of dependent chunks produce different answers") {
    // Capacity-one memory: only the most recent fact survives each step, so
    // the final answer tracks the last processed fact chunk.
    MockSummarizerBackend backend({1});
    auto est = TokenEstimator::whitespace_words();
    PipelineLimits limits;
    std::vector<Chunk> chunks{chunk("d", 0, "FACT_A: red"), chunk("d", 1, "FACT_B: blue")};

    auto forward = run_chain(backend, "q", "which fact?", chunks, default_order(2), limits, est);
    Ordering backward;
    backward.permutation = {1, 0};
    auto reverse = run_chain(backend, "q", "which fact?", chunks, backward, limits, est);
    CHECK(forward.answer == "blue");
    CHECK(reverse.answer == "red");
    CHECK(forward.answer != reverse.answer);
}

TEST_CASE("run_chain under the mock backend is fully deterministic") {
    auto est = TokenEstimator::whitespace_words();
    PipelineLimits limits;
    std::vector<Chunk> chunks{chunk("d", 0, "K_ONE: 1 and text"), chunk("d", 1, "K_TWO: 2 more"),
                              chunk("d", 2, "K_THREE: 3 words")};
    MockSummarizerBackend b1({2}), b2({2});
    auto r1 = run_chain(b1, "q", "which k?", chunks, default_order(3), limits, est);
    auto r2 = run_chain(b2, "q", "which k?", chunks, default_order(3), limits, est);
    CHECK(r1.answer == r2.answer);
    REQUIRE(r1.trace.size() == r2.trace.size());
    for (size_t i = 0; i < r1.trace.size(); ++i)
        CHECK(r1.trace[i].summary_text == r2.trace[i].summary_text);
}

TEST_CASE("memory budget holds at every trace step") {
    MockSummarizerBackend backend({10});
    auto est = TokenEstimator::whitespace_words();
    PipelineLimits limits;
    limits.summary_token_limit = 6;
    std::vector<Chunk> chunks;
    for (int i = 0; i < 5; ++i)
        chunks.push_back(chunk("d", i, "KEY_" + std::to_string(i) + ": value" + std::to_string(i)));
    auto result = run_chain(backend, "q", "keys?", chunks, default_order(5), limits, est);
    for (const auto& state : result.trace) CHECK(state.token_count <= 6);
}

TEST_CASE("bad orderings are rejected") {
    RecordingBackend backend;
    auto est = TokenEstimator::whitespace_words();
    PipelineLimits limits;
    std::vector<Chunk> chunks{chunk("d", 0, "a"), chunk("d", 1, "b")};
    Ordering dup;
    dup.permutation = {0, 0};
    CHECK_THROWS_AS(run_chain(backend, "q", "q?", chunks, dup, limits, est), std::invalid_argument);
    Ordering shorter;
    shorter.permutation = {0};
    CHECK_THROWS_AS(run_chain(backend, "q", "q?", chunks, shorter, limits, est), std::invalid_argument);
}

TEST_CASE("a backend outage aborts the chain with the partial trace") {
    FailingBackend backend(3); // fails on the third generate call
    auto est = TokenEstimator::whitespace_words();
    PipelineLimits limits;
    std::vector<Chunk> chunks{chunk("d", 0, "a"), chunk("d", 1, "b"), chunk("d", 2, "c"),
                              chunk("d", 3, "e")};
    try {
        run_chain(backend, "q", "q?", chunks, default_order(4), limits, est);
        FAIL("expected ChainAborted");
    } catch (const ChainAborted& e) {
        CHECK(e.failed_step == 3);
        CHECK(e.chunk_id == "d#2");
        CHECK(e.partial_trace.size() == 3); // M_0..M_2 completed
    }
}

TEST_CASE("the mock backend never crashes on arbitrary prompts and stays deterministic") {
    MockSummarizerBackend backend({3});
    GenerationParams params;
    std::mt19937_64 rng(13);
    const std::string alphabet = "AZaz09_:. \n{}?";
    // Template fragments get spliced in so truncated or reordered marker
    // combinations hit the parser, not just random bytes.
    const std::vector<std::string> fragments{
        "\nHere is the summary of the previous source text: ",
        "\nQuestion: ",
        "\nYou need to read current source text",
        "You need to answer based on the summary:\n",
        "\n\nQuestion: ",
        "\nAnswer:",
        "KEY: value",
    };
    for (int trial = 0; trial < 600; ++trial) {
        std::string prompt;
        int pieces = coa::test::uniform_int(rng, 0, 6);
        for (int p = 0; p < pieces; ++p) {
            if (coa::test::uniform_int(rng, 0, 1)) {
                prompt += fragments[static_cast<size_t>(
                    coa::test::uniform_int(rng, 0, static_cast<int>(fragments.size()) - 1))];
            } else {
                int len = coa::test::uniform_int(rng, 0, 40);
                for (int i = 0; i < len; ++i)
                    prompt.push_back(alphabet[static_cast<size_t>(
                        coa::test::uniform_int(rng, 0, static_cast<int>(alphabet.size()) - 1))]);
            }
        }
        auto a = backend.generate(prompt, params);
        auto b = backend.generate(prompt, params);
        CHECK(a == b);
    }
}

TEST_CASE("trace serialization is stable and masks latency when asked") {
    MockSummarizerBackend backend({2});
    auto est = TokenEstimator::whitespace_words();
    PipelineLimits limits;
    std::vector<Chunk> chunks{chunk("d", 0, "A_K: 1"), chunk("d", 1, "B_K: 2")};
    auto order = default_order(2);
    auto result = run_chain(backend, "q7", "a or b?", chunks, order, limits, est);

    std::ostringstream s1, s2;
    write_trace_jsonl(s1, result, chunks, order, false);
    auto again = run_chain(backend, "q7", "a or b?", chunks, order, limits, est);
    write_trace_jsonl(s2, again, chunks, order, false);
    CHECK(s1.str() == s2.str());
    CHECK(s1.str().find("\"latency_ms\":0") != std::string::npos);
    CHECK(s1.str().find("\"query_id\":\"q7\"") != std::string::npos);
}

#include <doctest.h>

#include <filesystem>

#include "coa/embedding.hpp"
#include "coa/similarity.hpp"
#include "test_util.hpp"

using namespace coa;

namespace {

Chunk chunk(const std::string& id, const std::string& text) {
    Chunk c;
    c.chunk_id = id;
    c.doc_id = "doc";
    c.text = text;
    return c;
}

// Wraps a backend and counts how many embed() calls actually reach it.
class CountingBackend : public EmbeddingBackend {
public:
    explicit CountingBackend(EmbeddingBackend& inner) : inner_(inner) {}
    std::string model_name() const override { return inner_.model_name(); }
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override {
        ++calls;
        texts_embedded += texts.size();
        return inner_.embed(texts);
    }
    int calls = 0;
    size_t texts_embedded = 0;

private:
    EmbeddingBackend& inner_;
};

struct TempDir {
    TempDir() : path(std::filesystem::temp_directory_path() /
                     ("coa_cache_" + std::to_string(::getpid()) + "_" +
                      std::to_string(counter++))) {
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::filesystem::path path;
    static inline int counter = 0;
};

} // namespace

TEST_CASE("local hash backend is a pure function of the text") {
    LocalHashBackend backend(64);
    auto a = backend.embed({"the cat sat on the mat"});
    auto b = backend.embed({"the cat sat on the mat"});
    REQUIRE(a.size() == 1);
    CHECK(a[0].values == b[0].values);
    CHECK(a[0].dim() == 64);
    CHECK(cosine(a[0], b[0]) == doctest::Approx(1.0).epsilon(1e-12));

    auto c = backend.embed({"a completely different sentence"});
    CHECK(cosine(a[0], c[0]) < 0.999);
}

TEST_CASE("local hash never returns an all-zero vector") {
    LocalHashBackend backend(32);
    for (const auto* text : {"", "    ", "...!!!"}) {
        auto v = backend.embed({text})[0];
        double norm = 0;
        for (float x : v.values) norm += double(x) * double(x);
        CHECK(norm > 0.0);
    }
}

TEST_CASE("embed produces one vector per chunk, order aligned") {
    LocalHashBackend backend(32);
    std::vector<Chunk> chunks{chunk("a", "first text"), chunk("b", "second text"),
                              chunk("c", "third text")};
    auto vecs = embed_chunks(chunks, backend);
    REQUIRE(vecs.size() == 3);
    for (size_t i = 0; i < 3; ++i) {
        auto direct = backend.embed({chunks[i].text});
        CHECK(vecs[i].values == direct[0].values);
    }
}

TEST_CASE("cache round-trips vectors exactly") {
    TempDir dir;
    EmbeddingCache cache(dir.path);
    EmbeddingVector v;
    v.values = {1.5f, -2.25f, 0.0f, 3.125e-7f};
    cache.store("model-x", "some text", v);
    auto loaded = cache.load("model-x", "some text");
    REQUIRE(loaded.has_value());
    CHECK(loaded->values == v.values);

    CHECK_FALSE(cache.load("model-y", "some text").has_value());
    CHECK_FALSE(cache.load("model-x", "other text").has_value());

    auto stats = cache.stats();
    CHECK(stats.entries == 1);
    CHECK(cache.clear() == 1);
    CHECK(cache.stats().entries == 0);
}

TEST_CASE("warm cache issues zero backend requests") {
    TempDir dir;
    EmbeddingCache cache(dir.path);
    LocalHashBackend inner(48);
    CountingBackend counting(inner);

    std::vector<Chunk> chunks{chunk("a", "alpha text"), chunk("b", "beta text"),
                              chunk("c", "gamma text")};
    auto first = embed_chunks(chunks, counting, &cache);
    CHECK(counting.calls == 1);
    CHECK(counting.texts_embedded == 3);

    auto second = embed_chunks(chunks, counting, &cache);
    CHECK(counting.calls == 1); // no new requests
    REQUIRE(second.size() == first.size());
    for (size_t i = 0; i < first.size(); ++i) CHECK(second[i].values == first[i].values);

    // Partial warmth: one new chunk triggers exactly one more call.
    chunks.push_back(chunk("d", "delta text"));
    embed_chunks(chunks, counting, &cache);
    CHECK(counting.calls == 2);
    CHECK(counting.texts_embedded == 4);
}

TEST_CASE("embed_text caches single strings too") {
    TempDir dir;
    EmbeddingCache cache(dir.path);
    LocalHashBackend inner(16);
    CountingBackend counting(inner);
    auto v1 = embed_text("the query", counting, &cache);
    auto v2 = embed_text("the query", counting, &cache);
    CHECK(counting.calls == 1);
    CHECK(v1.values == v2.values);
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "coa/chunking.hpp"

namespace coa {

struct EmbeddingVector {
    std::vector<float> values;
    int dim() const { return static_cast<int>(values.size()); }
};

struct DimensionMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ZeroVector : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct BackendUnavailable : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimensionDrift : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual std::string model_name() const = 0;
    // One vector per input text, order-aligned.
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
};

// Deterministic offline backend: hashed bag-of-words projected onto a fixed
// dimension with signed buckets, L2-normalized. A pure function of the text
// bytes, stable across platforms.
class LocalHashBackend : public EmbeddingBackend {
public:
    explicit LocalHashBackend(int dim = 256);
    std::string model_name() const override { return model_; }
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
    EmbeddingVector embed_one(const std::string& text) const;

private:
    int dim_;
    std::string model_;
};

struct EmbeddingBackendConfig {
    enum class Kind { HttpService, LocalHash };
    Kind kind = Kind::LocalHash;
    std::string endpoint;                    // e.g. http://127.0.0.1:8080/v1/embeddings
    std::string model = "local-hash";
    std::string api_key_env = "EMBED_API_KEY";
    int batch_size = 16;
    int max_retries = 3;
    int local_dim = 256;                     // LocalHash only
    std::optional<int> expected_dim;         // declared dim; drift check
    std::filesystem::path cache_path;        // empty = no cache
};

// POST {"model": str, "input": [str]} -> {"data": [{"embedding": [float]}]},
// order-aligned. The API key is read from the configured environment variable
// and never logged.
class HttpEmbeddingBackend : public EmbeddingBackend {
public:
    explicit HttpEmbeddingBackend(EmbeddingBackendConfig cfg);
    std::string model_name() const override { return cfg_.model; }
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

private:
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& batch);
    EmbeddingBackendConfig cfg_;
};

std::unique_ptr<EmbeddingBackend> make_embedding_backend(const EmbeddingBackendConfig& cfg);

// Content-addressed file store. Key is a hash of model name + text; each
// entry is a one-line JSON header {"dim": int, "model": str} followed by the
// raw little-endian f32 vector. Writes go through a temp file and an atomic
// rename so concurrent readers never see a torn entry.
class EmbeddingCache {
public:
    explicit EmbeddingCache(std::filesystem::path dir);

    std::optional<EmbeddingVector> load(const std::string& model, const std::string& text) const;
    void store(const std::string& model, const std::string& text, const EmbeddingVector& vec) const;

    struct Stats {
        size_t entries = 0;
        uintmax_t total_bytes = 0;
    };
    Stats stats() const;
    size_t clear() const; // returns number of entries removed

    const std::filesystem::path& dir() const { return dir_; }
    static std::string entry_key(const std::string& model, const std::string& text);

private:
    std::filesystem::path dir_;
};

// Embeds chunks through the cache when one is given: hits skip the backend
// entirely, misses are embedded in one pass and written back.
std::vector<EmbeddingVector> embed_chunks(const std::vector<Chunk>& chunks,
                                          EmbeddingBackend& backend,
                                          const EmbeddingCache* cache = nullptr);

EmbeddingVector embed_text(const std::string& text, EmbeddingBackend& backend,
                           const EmbeddingCache* cache = nullptr);

} // namespace coa

#include "coa/embedding.hpp"

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace coa {

namespace {

// FNV-1a, fixed constants; std::hash is not stable across implementations.
uint64_t fnv1a64(std::string_view data, uint64_t seed = 14695981039346656037ull) {
    uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[v & 0xF];
        v >>= 4;
    }
    return s;
}

} // namespace

LocalHashBackend::LocalHashBackend(int dim) : dim_(dim) {
    if (dim_ < 1) throw std::invalid_argument("embedding dim must be >= 1");
    model_ = "local-hash-" + std::to_string(dim_);
}

EmbeddingVector LocalHashBackend::embed_one(const std::string& text) const {
    std::vector<double> acc(static_cast<size_t>(dim_), 0.0);
    size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && !std::isalnum(static_cast<unsigned char>(text[i]))) ++i;
        size_t j = i;
        std::string word;
        while (j < text.size() && std::isalnum(static_cast<unsigned char>(text[j]))) {
            word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[j]))));
            ++j;
        }
        if (!word.empty()) {
            uint64_t h = fnv1a64(word);
            size_t bucket = static_cast<size_t>(h % static_cast<uint64_t>(dim_));
            double sign = (h >> 63) ? -1.0 : 1.0;
            acc[bucket] += sign;
        }
        i = j;
    }
    double norm2 = 0.0;
    for (double v : acc) norm2 += v * v;
    if (norm2 == 0.0) {
        // No word tokens (or everything cancelled): fall back to a byte-level
        // feature so the vector is never all-zero.
        uint64_t h = fnv1a64(text, 0x9e3779b97f4a7c15ull);
        acc[static_cast<size_t>(h % static_cast<uint64_t>(dim_))] = 1.0;
        norm2 = 1.0;
    }
    double inv = 1.0 / std::sqrt(norm2);
    EmbeddingVector out;
    out.values.resize(static_cast<size_t>(dim_));
    for (int k = 0; k < dim_; ++k) out.values[static_cast<size_t>(k)] = static_cast<float>(acc[static_cast<size_t>(k)] * inv);
    return out;
}

std::vector<EmbeddingVector> LocalHashBackend::embed(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
}

HttpEmbeddingBackend::HttpEmbeddingBackend(EmbeddingBackendConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.endpoint.empty()) throw std::invalid_argument("http embedding backend needs an endpoint");
    if (cfg_.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
}

std::vector<EmbeddingVector> HttpEmbeddingBackend::embed_batch(const std::vector<std::string>& batch) {
    nlohmann::json body{{"model", cfg_.model}, {"input", batch}};
    const std::string payload = body.dump();

    // endpoint = scheme://host[:port]/path
    auto scheme_end = cfg_.endpoint.find("://");
    if (scheme_end == std::string::npos) throw std::invalid_argument("endpoint must include scheme");
    auto path_start = cfg_.endpoint.find('/', scheme_end + 3);
    std::string base = path_start == std::string::npos ? cfg_.endpoint : cfg_.endpoint.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : cfg_.endpoint.substr(path_start);

    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(100ll << (attempt - 1)));
        }
        httplib::Client client(base);
        client.set_read_timeout(120, 0);
        httplib::Headers headers;
        if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = "no response (" + httplib::to_string(res.error()) + ")";
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
        if (j.is_discarded() || !j.contains("data") || !j["data"].is_array() ||
            j["data"].size() != batch.size()) {
            last_error = "malformed embedding response";
            continue;
        }
        std::vector<EmbeddingVector> out;
        out.reserve(batch.size());
        for (const auto& item : j["data"]) {
            EmbeddingVector v;
            for (const auto& x : item.at("embedding")) v.values.push_back(x.get<float>());
            if (cfg_.expected_dim && v.dim() != *cfg_.expected_dim) {
                throw DimensionDrift("embedding service returned dim " + std::to_string(v.dim()) +
                                     ", expected " + std::to_string(*cfg_.expected_dim));
            }
            if (!out.empty() && v.dim() != out.front().dim()) {
                throw DimensionDrift("embedding dims differ within one response");
            }
            out.push_back(std::move(v));
        }
        return out;
    }
    throw BackendUnavailable("embedding backend failed after " + std::to_string(cfg_.max_retries + 1) +
                             " attempts: " + last_error);
}

std::vector<EmbeddingVector> HttpEmbeddingBackend::embed(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (size_t i = 0; i < texts.size(); i += static_cast<size_t>(cfg_.batch_size)) {
        size_t end = std::min(texts.size(), i + static_cast<size_t>(cfg_.batch_size));
        std::vector<std::string> batch(texts.begin() + static_cast<long>(i), texts.begin() + static_cast<long>(end));
        auto vecs = embed_batch(batch);
        for (auto& v : vecs) out.push_back(std::move(v));
    }
    return out;
}

std::unique_ptr<EmbeddingBackend> make_embedding_backend(const EmbeddingBackendConfig& cfg) {
    if (cfg.kind == EmbeddingBackendConfig::Kind::LocalHash)
        return std::make_unique<LocalHashBackend>(cfg.local_dim);
    return std::make_unique<HttpEmbeddingBackend>(cfg);
}

EmbeddingCache::EmbeddingCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::string EmbeddingCache::entry_key(const std::string& model, const std::string& text) {
    std::string material = model;
    material.push_back('\0');
    material += text;
    return hex64(fnv1a64(material));
}

std::optional<EmbeddingVector> EmbeddingCache::load(const std::string& model,
                                                    const std::string& text) const {
    auto path = dir_ / (entry_key(model, text) + ".emb");
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::string header;
    if (!std::getline(in, header)) return std::nullopt;
    nlohmann::json j = nlohmann::json::parse(header, nullptr, false);
    if (j.is_discarded() || !j.contains("dim") || j.value("model", "") != model) return std::nullopt;
    int dim = j["dim"].get<int>();
    if (dim < 1) return std::nullopt;
    std::string raw(static_cast<size_t>(dim) * 4, '\0');
    in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) return std::nullopt;
    EmbeddingVector v;
    v.values.resize(static_cast<size_t>(dim));
    for (int i = 0; i < dim; ++i) {
        const auto* p = reinterpret_cast<const unsigned char*>(raw.data()) + static_cast<size_t>(i) * 4;
        uint32_t bits = static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
                        static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
        float f;
        std::memcpy(&f, &bits, 4);
        v.values[static_cast<size_t>(i)] = f;
    }
    return v;
}

void EmbeddingCache::store(const std::string& model, const std::string& text,
                           const EmbeddingVector& vec) const {
    auto final_path = dir_ / (entry_key(model, text) + ".emb");
    auto tmp_path = final_path;
    tmp_path += ".tmp" + std::to_string(
        std::chrono::steady_clock::now().time_since_epoch().count());
    {
        std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write cache entry: " + tmp_path.string());
        nlohmann::json header{{"dim", vec.dim()}, {"model", model}};
        out << header.dump() << '\n';
        for (float f : vec.values) {
            uint32_t bits;
            std::memcpy(&bits, &f, 4);
            unsigned char b[4] = {static_cast<unsigned char>(bits & 0xFF),
                                  static_cast<unsigned char>((bits >> 8) & 0xFF),
                                  static_cast<unsigned char>((bits >> 16) & 0xFF),
                                  static_cast<unsigned char>((bits >> 24) & 0xFF)};
            out.write(reinterpret_cast<const char*>(b), 4);
        }
    }
    std::filesystem::rename(tmp_path, final_path);
}

EmbeddingCache::Stats EmbeddingCache::stats() const {
    Stats s;
    if (!std::filesystem::exists(dir_)) return s;
    for (const auto& e : std::filesystem::directory_iterator(dir_)) {
        if (e.is_regular_file() && e.path().extension() == ".emb") {
            ++s.entries;
            s.total_bytes += e.file_size();
        }
    }
    return s;
}

size_t EmbeddingCache::clear() const {
    size_t removed = 0;
    if (!std::filesystem::exists(dir_)) return removed;
    for (const auto& e : std::filesystem::directory_iterator(dir_)) {
        if (e.is_regular_file() && e.path().extension() == ".emb") {
            std::filesystem::remove(e.path());
            ++removed;
        }
    }
    return removed;
}

namespace {

std::vector<EmbeddingVector> embed_texts_cached(const std::vector<std::string>& texts,
                                                EmbeddingBackend& backend,
                                                const EmbeddingCache* cache) {
    std::vector<EmbeddingVector> out(texts.size());
    std::vector<size_t> misses;
    if (cache) {
        for (size_t i = 0; i < texts.size(); ++i) {
            if (auto hit = cache->load(backend.model_name(), texts[i])) {
                out[i] = std::move(*hit);
            } else {
                misses.push_back(i);
            }
        }
    } else {
        for (size_t i = 0; i < texts.size(); ++i) misses.push_back(i);
    }
    if (!misses.empty()) {
        std::vector<std::string> miss_texts;
        miss_texts.reserve(misses.size());
        for (size_t i : misses) miss_texts.push_back(texts[i]);
        auto vecs = backend.embed(miss_texts);
        if (vecs.size() != misses.size())
            throw BackendUnavailable("backend returned wrong number of embeddings");
        for (size_t k = 0; k < misses.size(); ++k) {
            if (cache) cache->store(backend.model_name(), miss_texts[k], vecs[k]);
            out[misses[k]] = std::move(vecs[k]);
        }
    }
    return out;
}

} // namespace

std::vector<EmbeddingVector> embed_chunks(const std::vector<Chunk>& chunks,
                                          EmbeddingBackend& backend,
                                          const EmbeddingCache* cache) {
    std::vector<std::string> texts;
    texts.reserve(chunks.size());
    for (const auto& c : chunks) texts.push_back(c.text);
    return embed_texts_cached(texts, backend, cache);
}

EmbeddingVector embed_text(const std::string& text, EmbeddingBackend& backend,
                           const EmbeddingCache* cache) {
    return embed_texts_cached({text}, backend, cache)[0];
}

} // namespace coa

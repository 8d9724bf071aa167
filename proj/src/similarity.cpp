#include "coa/similarity.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace coa {

std::string to_string(SimilarityKind kind) {
    switch (kind) {
    case SimilarityKind::DenseCosine: return "dense-cosine";
    case SimilarityKind::Bm25Symmetric: return "bm25-symmetric";
    case SimilarityKind::Custom: return "custom";
    }
    return "custom";
}

SimilarityMatrix SimilarityMatrix::zeros(int n, SimilarityKind kind) {
    SimilarityMatrix m;
    m.n = n;
    m.kind = kind;
    m.values.assign(static_cast<size_t>(n) * static_cast<size_t>(n), 0.0);
    return m;
}

bool SimilarityMatrix::is_symmetric() const {
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (at(i, j) != at(j, i)) return false;
    return true;
}

double inner_product(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.dim() != v.dim())
        throw DimensionMismatch("inner product on dims " + std::to_string(u.dim()) + " vs " +
                                std::to_string(v.dim()));
    double dot = 0.0;
    for (size_t k = 0; k < u.values.size(); ++k)
        dot += static_cast<double>(u.values[k]) * static_cast<double>(v.values[k]);
    return dot;
}

double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.dim() != v.dim())
        throw DimensionMismatch("cosine on dims " + std::to_string(u.dim()) + " vs " +
                                std::to_string(v.dim()));
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (size_t k = 0; k < u.values.size(); ++k) {
        double a = u.values[k], b = v.values[k];
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if (nu == 0.0 || nv == 0.0) throw ZeroVector("cosine undefined for an all-zero vector");
    return dot / (std::sqrt(nu) * std::sqrt(nv));
}

SimilarityMatrix build_similarity_matrix(const std::vector<EmbeddingVector>& embeddings,
                                         bool raw_inner_product) {
    int n = static_cast<int>(embeddings.size());
    if (n < 2) throw std::invalid_argument("need at least 2 embeddings");
    auto m = SimilarityMatrix::zeros(n, raw_inner_product ? SimilarityKind::Custom
                                                          : SimilarityKind::DenseCosine);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double s = raw_inner_product ? inner_product(embeddings[i], embeddings[j])
                                         : cosine(embeddings[i], embeddings[j]);
            m.set(i, j, s);
        }
    }
    return m;
}

std::vector<double> query_similarity(const EmbeddingVector& query_embedding,
                                     const std::vector<EmbeddingVector>& chunk_embeddings) {
    std::vector<double> scores;
    scores.reserve(chunk_embeddings.size());
    for (const auto& e : chunk_embeddings) scores.push_back(cosine(query_embedding, e));
    return scores;
}

namespace {

std::vector<std::string> bm25_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

struct Bm25Index {
    std::vector<std::unordered_map<std::string, int>> tf; // per doc
    std::vector<int> doc_len;
    std::unordered_map<std::string, int> df;
    double avgdl = 0.0;
    int n = 0;

    explicit Bm25Index(const std::vector<std::vector<std::string>>& docs) {
        n = static_cast<int>(docs.size());
        tf.resize(docs.size());
        doc_len.resize(docs.size());
        long total = 0;
        for (size_t d = 0; d < docs.size(); ++d) {
            doc_len[d] = static_cast<int>(docs[d].size());
            total += doc_len[d];
            for (const auto& t : docs[d]) ++tf[d][t];
            for (const auto& [t, _] : tf[d]) ++df[t];
        }
        avgdl = docs.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(docs.size());
    }

    double idf(const std::string& term) const {
        auto it = df.find(term);
        int d = it == df.end() ? 0 : it->second;
        // Lucene form: strictly positive even for terms in every document.
        return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
    }

    // Sum over the query's distinct terms.
    double score(const std::vector<std::string>& query, int doc) const {
        std::unordered_set<std::string> seen;
        double s = 0.0;
        const auto& dtf = tf[static_cast<size_t>(doc)];
        for (const auto& term : query) {
            if (!seen.insert(term).second) continue;
            auto it = dtf.find(term);
            if (it == dtf.end()) continue;
            double f = it->second;
            double denom = f + k1 * (1.0 - b + b * doc_len[static_cast<size_t>(doc)] / avgdl);
            s += idf(term) * f * (k1 + 1.0) / denom;
        }
        return s;
    }

    double k1 = 1.2;
    double b = 0.75;
};

} // namespace

SimilarityMatrix bm25_symmetric(const std::vector<Chunk>& chunks, const Bm25Params& params) {
    int n = static_cast<int>(chunks.size());
    if (n < 2) throw std::invalid_argument("need at least 2 chunks");

    std::vector<std::vector<std::string>> docs;
    docs.reserve(chunks.size());
    for (const auto& c : chunks) docs.push_back(bm25_tokens(c.text));

    Bm25Index index(docs);
    index.k1 = params.k1;
    index.b = params.b;

    std::vector<std::vector<double>> directed(static_cast<size_t>(n),
                                              std::vector<double>(static_cast<size_t>(n), 0.0));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) directed[static_cast<size_t>(i)][static_cast<size_t>(j)] = index.score(docs[static_cast<size_t>(i)], j);

    auto m = SimilarityMatrix::zeros(n, SimilarityKind::Bm25Symmetric);
    if (params.combine == Bm25Params::Combine::ScoreMean) {
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                m.set(i, j, (directed[static_cast<size_t>(i)][static_cast<size_t>(j)] +
                             directed[static_cast<size_t>(j)][static_cast<size_t>(i)]) / 2.0);
    } else {
        // Rank positions of j in row i, descending score, ties by index.
        // Turned back into a similarity so higher still means closer.
        std::vector<std::vector<double>> rank(static_cast<size_t>(n),
                                              std::vector<double>(static_cast<size_t>(n), 0.0));
        for (int i = 0; i < n; ++i) {
            std::vector<int> others;
            for (int j = 0; j < n; ++j)
                if (j != i) others.push_back(j);
            std::sort(others.begin(), others.end(), [&](int a, int c) {
                double sa = directed[static_cast<size_t>(i)][static_cast<size_t>(a)];
                double sc = directed[static_cast<size_t>(i)][static_cast<size_t>(c)];
                if (sa != sc) return sa > sc;
                return a < c;
            });
            for (size_t pos = 0; pos < others.size(); ++pos)
                rank[static_cast<size_t>(i)][static_cast<size_t>(others[pos])] = static_cast<double>(pos + 1);
        }
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                double mean_rank = (rank[static_cast<size_t>(i)][static_cast<size_t>(j)] +
                                    rank[static_cast<size_t>(j)][static_cast<size_t>(i)]) / 2.0;
                m.set(i, j, static_cast<double>(n) - mean_rank);
            }
    }
    return m;
}

std::vector<double> bm25_query_scores(const std::string& query, const std::vector<Chunk>& chunks,
                                      const Bm25Params& params) {
    std::vector<std::vector<std::string>> docs;
    docs.reserve(chunks.size());
    for (const auto& c : chunks) docs.push_back(bm25_tokens(c.text));
    Bm25Index index(docs);
    index.k1 = params.k1;
    index.b = params.b;
    auto q = bm25_tokens(query);
    std::vector<double> scores;
    scores.reserve(chunks.size());
    for (int j = 0; j < static_cast<int>(chunks.size()); ++j) scores.push_back(index.score(q, j));
    return scores;
}

} // namespace coa

#pragma once

#include <string>
#include <vector>

#include "coa/chunking.hpp"
#include "coa/embedding.hpp"

namespace coa {

enum class SimilarityKind { DenseCosine, Bm25Symmetric, Custom };

std::string to_string(SimilarityKind kind);

// Symmetric pairwise chunk-relatedness scores: the edge weights of the
// complete chunk graph. The diagonal is zero by convention; no consumer reads
// it and spanning-tree code must never pick a self loop.
struct SimilarityMatrix {
    int n = 0;
    std::vector<double> values; // n*n row-major
    SimilarityKind kind = SimilarityKind::Custom;

    static SimilarityMatrix zeros(int n, SimilarityKind kind = SimilarityKind::Custom);

    double at(int i, int j) const { return values[static_cast<size_t>(i) * n + j]; }
    // Writes both (i,j) and (j,i) so symmetry holds bit for bit.
    void set(int i, int j, double v) {
        values[static_cast<size_t>(i) * n + j] = v;
        values[static_cast<size_t>(j) * n + i] = v;
    }
    bool is_symmetric() const;
};

// u.v / (|u||v|), accumulated in double.
double cosine(const EmbeddingVector& u, const EmbeddingVector& v);
double inner_product(const EmbeddingVector& u, const EmbeddingVector& v);

// Pairwise matrix over embeddings. raw_inner_product swaps cosine for the
// unnormalized dot product (kind becomes Custom).
SimilarityMatrix build_similarity_matrix(const std::vector<EmbeddingVector>& embeddings,
                                         bool raw_inner_product = false);

// One cosine score per chunk embedding, order-aligned.
std::vector<double> query_similarity(const EmbeddingVector& query_embedding,
                                     const std::vector<EmbeddingVector>& chunk_embeddings);

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
    // BM25 is asymmetric; the symmetric score is the mean of the two directed
    // scores. RankMean averages the directed rank positions instead.
    enum class Combine { ScoreMean, RankMean };
    Combine combine = Combine::ScoreMean;
};

// Symmetric BM25 over the chunk set as its own corpus:
// values[i][j] = (bm25(query=x_i, doc=x_j) + bm25(query=x_j, doc=x_i)) / 2.
SimilarityMatrix bm25_symmetric(const std::vector<Chunk>& chunks, const Bm25Params& params = {});

// Directed BM25 of a free-text query against each chunk; used for root
// selection and the dense baseline when the lexical backend is active.
std::vector<double> bm25_query_scores(const std::string& query, const std::vector<Chunk>& chunks,
                                      const Bm25Params& params = {});

} // namespace coa

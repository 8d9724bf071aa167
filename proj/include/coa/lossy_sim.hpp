#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coa/ordering.hpp"

namespace coa {

// Desk-scale stand-in for an evidence chunk: named facts plus the planted
// dependency group they belong to.
struct Fact {
    std::string key;
    std::string value;
};

struct FactChunk {
    std::string chunk_id;
    std::vector<Fact> facts; // keys unique within one chunk
    int cluster_id = 0;
};

struct LossySimParams {
    int capacity = 8; // max facts retained in memory
    int window = 3;   // cluster activates when two of its facts land within
                      // this many consecutive steps (gap <= window - 1)
};

// Processes chunks in the given order through a capacity-bounded memory.
// A fact is kept only once its cluster has activated; activation flushes the
// cluster's earlier sightings into memory in sighting order. Memory evicts
// its oldest facts beyond capacity. Returns how many relevance keys survive
// in the final memory.
int simulate_lossy_pipeline(const std::vector<FactChunk>& chunks, const Ordering& order,
                            const LossySimParams& params,
                            const std::vector<std::string>& relevance_keys);

// Synthetic clustered corpus: chunks assigned round-robin to clusters, one
// similarity matrix with high intra-cluster and low inter-cluster weights,
// and query scores concentrated on cluster 0.
struct ClusteredCorpusParams {
    int num_chunks = 12;
    int num_clusters = 4;
    int facts_per_chunk = 1;
    double intra_sim = 0.75;
    double inter_sim = 0.15;
    double sim_noise = 0.08;
};

struct ClusteredCorpus {
    std::vector<FactChunk> chunks;
    SimilarityMatrix sim;
    std::vector<double> query_scores;
    std::vector<std::string> relevance_keys; // every planted fact key
};

ClusteredCorpus make_clustered_corpus(const ClusteredCorpusParams& params, uint64_t seed);

// Deterministic per-seed shuffle used for the random-order baseline.
Ordering random_order(int n, uint64_t seed);

// One-sided sign test: probability of at least `wins` successes out of
// wins + losses fair coin flips. Ties are dropped before calling.
double sign_test_p_one_sided(int wins, int losses);

} // namespace coa

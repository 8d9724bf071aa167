#include "coa/lossy_sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace coa {

namespace {

struct Memory {
    explicit Memory(int capacity) : capacity(capacity) {}
    int capacity;
    std::vector<Fact> facts; // oldest first

    void insert(const Fact& f) {
        auto it = std::find_if(facts.begin(), facts.end(),
                               [&](const Fact& g) { return g.key == f.key; });
        if (it != facts.end()) facts.erase(it); // re-seen key refreshes to newest
        facts.push_back(f);
        while (static_cast<int>(facts.size()) > capacity) facts.erase(facts.begin());
    }
};

} // namespace

int simulate_lossy_pipeline(const std::vector<FactChunk>& chunks, const Ordering& order,
                            const LossySimParams& params,
                            const std::vector<std::string>& relevance_keys) {
    if (params.capacity < 1) throw std::invalid_argument("capacity must be >= 1");
    if (params.window < 1) throw std::invalid_argument("window must be >= 1");
    if (order.permutation.size() != chunks.size())
        throw std::invalid_argument("order does not cover the chunk set");

    Memory memory(params.capacity);
    std::unordered_map<int, int> last_sighting;          // cluster -> step
    std::unordered_set<int> active;                      // activated clusters
    std::unordered_map<int, std::vector<Fact>> pending;  // sightings before activation

    for (int step = 0; step < static_cast<int>(order.permutation.size()); ++step) {
        const FactChunk& chunk = chunks[static_cast<size_t>(order.permutation[static_cast<size_t>(step)])];
        int cluster = chunk.cluster_id;
        for (const Fact& fact : chunk.facts) {
            if (!active.count(cluster)) {
                auto it = last_sighting.find(cluster);
                if (it != last_sighting.end() && step - it->second <= params.window - 1) {
                    active.insert(cluster);
                    for (const Fact& earlier : pending[cluster]) memory.insert(earlier);
                    pending.erase(cluster);
                }
            }
            last_sighting[cluster] = step;
            if (active.count(cluster)) {
                memory.insert(fact);
            } else {
                pending[cluster].push_back(fact);
            }
        }
    }

    std::unordered_set<std::string> retained;
    for (const Fact& f : memory.facts) retained.insert(f.key);
    int hits = 0;
    std::unordered_set<std::string> counted;
    for (const auto& key : relevance_keys)
        if (retained.count(key) && counted.insert(key).second) ++hits;
    return hits;
}

namespace {

// Implementation-independent uniform double in [0, 1); distributions from
// <random> are not pinned by the standard.
double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<uint64_t>(hi - lo + 1));
}

} // namespace

ClusteredCorpus make_clustered_corpus(const ClusteredCorpusParams& params, uint64_t seed) {
    if (params.num_chunks < 2 || params.num_clusters < 1 || params.facts_per_chunk < 1)
        throw std::invalid_argument("bad clustered corpus parameters");

    std::mt19937_64 rng(seed);
    ClusteredCorpus corpus;

    for (int i = 0; i < params.num_chunks; ++i) {
        FactChunk chunk;
        chunk.chunk_id = "chunk-" + std::to_string(i);
        chunk.cluster_id = i % params.num_clusters;
        for (int f = 0; f < params.facts_per_chunk; ++f) {
            Fact fact;
            fact.key = "c" + std::to_string(chunk.cluster_id) + "_k" + std::to_string(i) + "_" +
                       std::to_string(f);
            fact.value = "v" + std::to_string(i) + "_" + std::to_string(f);
            corpus.relevance_keys.push_back(fact.key);
            chunk.facts.push_back(std::move(fact));
        }
        corpus.chunks.push_back(std::move(chunk));
    }

    corpus.sim = SimilarityMatrix::zeros(params.num_chunks, SimilarityKind::Custom);
    for (int i = 0; i < params.num_chunks; ++i) {
        for (int j = i + 1; j < params.num_chunks; ++j) {
            bool same = corpus.chunks[static_cast<size_t>(i)].cluster_id ==
                        corpus.chunks[static_cast<size_t>(j)].cluster_id;
            double base = same ? params.intra_sim : params.inter_sim;
            corpus.sim.set(i, j, base + params.sim_noise * uniform01(rng));
        }
    }

    // The query leans on cluster 0; everything else scores lower with noise.
    corpus.query_scores.resize(static_cast<size_t>(params.num_chunks));
    for (int i = 0; i < params.num_chunks; ++i) {
        bool target = corpus.chunks[static_cast<size_t>(i)].cluster_id == 0;
        corpus.query_scores[static_cast<size_t>(i)] =
            target ? 0.7 + 0.2 * uniform01(rng) : 0.1 + 0.4 * uniform01(rng);
    }
    return corpus;
}

Ordering random_order(int n, uint64_t seed) {
    Ordering out = default_order(n);
    std::mt19937_64 rng(seed);
    // Fisher-Yates with the pinned uniform_int so shuffles are reproducible
    // across standard library implementations.
    for (int i = n - 1; i > 0; --i) {
        int j = uniform_int(rng, 0, i);
        std::swap(out.permutation[static_cast<size_t>(i)], out.permutation[static_cast<size_t>(j)]);
    }
    return out;
}

double sign_test_p_one_sided(int wins, int losses) {
    if (wins < 0 || losses < 0) throw std::invalid_argument("counts must be nonnegative");
    int n = wins + losses;
    if (n == 0) return 1.0;
    double log_half_n = -static_cast<double>(n) * std::log(2.0);
    double p = 0.0;
    for (int k = wins; k <= n; ++k) {
        double log_choose = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
        p += std::exp(log_choose + log_half_n);
    }
    return std::min(1.0, p);
}

} // namespace coa

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "coa/similarity.hpp"

namespace coa {

struct TreeEdge {
    int a = 0;
    int b = 0;
    double weight = 0.0;
};

// Maximum-weight spanning tree over the chunk similarity graph, with a
// query-selected traversal root once one has been assigned.
struct DependencyTree {
    int n = 0;
    std::vector<TreeEdge> edges; // exactly n-1 entries
    std::optional<int> root;

    // Canonical summation order so equal trees always report equal weights.
    double total_weight() const;
};

enum class Strategy { Default, Dense, DfsGreedy, ClOrder };

std::string strategy_name(Strategy s);
Strategy parse_strategy(std::string_view name);

struct Ordering {
    std::vector<int> permutation;
    Strategy strategy = Strategy::Default;
};

// Kruskal on edges sorted by (weight desc, (min,max) asc). The tie order
// makes the selected edge set a pure function of the matrix. Root is left
// unset. n == 1 yields an empty edge set.
DependencyTree max_spanning_tree(const SimilarityMatrix& sim);

// Argmax of the query scores, ties to the lowest index.
int select_root(const std::vector<double>& query_scores);

// Breadth-first traversal from root. Siblings are visited by descending
// parent-edge weight, then ascending index, so the strongest dependency sits
// closest in the sequence.
Ordering bfs_order(const DependencyTree& tree, int root);

// Greedy walk on the complete similarity graph: from the current chunk, hop
// to the most similar unvisited one (ties to the lowest index).
Ordering dfs_greedy_order(const SimilarityMatrix& sim, int root);

// Chunks ranked by descending query score, ties ascending index.
Ordering dense_order(const std::vector<double>& query_scores);

// Original document order.
Ordering default_order(int n);

// JSON dump consumed by external systems: {"strategy", "root", "edges", "order"}.
nlohmann::json ordering_dump(const Ordering& ordering, const DependencyTree* tree);

// Indented ASCII rendering of the rooted tree for humans.
std::string render_tree(const DependencyTree& tree, int root);

} // namespace coa

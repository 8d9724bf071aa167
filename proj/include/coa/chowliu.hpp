#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "coa/ordering.hpp"

namespace coa {

// Exact discrete joint distribution over a handful of small variables.
// Outcomes are stored row-major with variable 0 as the slowest index.
struct DiscreteJoint {
    std::vector<int> cardinalities;
    std::vector<double> probabilities;

    int num_vars() const { return static_cast<int>(cardinalities.size()); }
    size_t table_size() const;
    size_t index_of(const std::vector<int>& assignment) const;
    void assignment_of(size_t index, std::vector<int>& out) const;

    // Nonnegative and summing to 1 within 1e-12.
    void validate() const;
};

// I(X_i; X_j) in nats. Terms with zero joint mass contribute 0.
double pairwise_mutual_information(const DiscreteJoint& joint, int i, int j);

// All pairwise MIs as edge weights (diagonal 0).
SimilarityMatrix mutual_information_matrix(const DiscreteJoint& joint);

// The tree maximizing total pairwise MI, i.e. the KL-optimal tree-structured
// approximation; realized as the maximum-weight spanning tree of the MI
// matrix. Root is left unset.
DependencyTree chow_liu_tree(const DiscreteJoint& joint);

struct UndefinedKL : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// KL(P || P_T) where P_T(x) = p(x_root) * prod p(x_child | x_parent) with all
// factors taken from P's own marginals. Throws UndefinedKL when P puts mass
// where P_T has none instead of clamping.
double tree_distribution_kl(const DiscreteJoint& joint, const DependencyTree& tree);

struct TooLarge : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using EdgeSet = std::vector<std::pair<int, int>>;

// All n^(n-2) labeled spanning trees on n nodes via Prufer decoding, each
// exactly once, edges as (min,max) pairs sorted within a tree. 2 <= n <= 7.
std::vector<EdgeSet> enumerate_spanning_trees(int n);

} // namespace coa

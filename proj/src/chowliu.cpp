#include "coa/chowliu.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace coa {

size_t DiscreteJoint::table_size() const {
    size_t s = 1;
    for (int c : cardinalities) s *= static_cast<size_t>(c);
    return s;
}

size_t DiscreteJoint::index_of(const std::vector<int>& assignment) const {
    size_t idx = 0;
    for (size_t v = 0; v < cardinalities.size(); ++v)
        idx = idx * static_cast<size_t>(cardinalities[v]) + static_cast<size_t>(assignment[v]);
    return idx;
}

void DiscreteJoint::assignment_of(size_t index, std::vector<int>& out) const {
    out.resize(cardinalities.size());
    for (size_t v = cardinalities.size(); v-- > 0;) {
        out[v] = static_cast<int>(index % static_cast<size_t>(cardinalities[v]));
        index /= static_cast<size_t>(cardinalities[v]);
    }
}

void DiscreteJoint::validate() const {
    if (cardinalities.empty()) throw std::invalid_argument("joint needs at least one variable");
    for (int c : cardinalities)
        if (c < 1) throw std::invalid_argument("cardinalities must be >= 1");
    if (probabilities.size() != table_size())
        throw std::invalid_argument("probability table size mismatch");
    double sum = 0.0;
    for (double p : probabilities) {
        if (p < 0.0) throw std::invalid_argument("negative probability");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("probabilities sum to " + std::to_string(sum));
}

namespace {

// Marginal over a subset of variables, indexed mixed-radix in subset order.
std::vector<double> marginal(const DiscreteJoint& joint, const std::vector<int>& vars) {
    size_t size = 1;
    for (int v : vars) size *= static_cast<size_t>(joint.cardinalities[static_cast<size_t>(v)]);
    std::vector<double> out(size, 0.0);
    std::vector<int> assign;
    for (size_t idx = 0; idx < joint.probabilities.size(); ++idx) {
        double p = joint.probabilities[idx];
        if (p == 0.0) continue;
        joint.assignment_of(idx, assign);
        size_t m = 0;
        for (int v : vars)
            m = m * static_cast<size_t>(joint.cardinalities[static_cast<size_t>(v)]) +
                static_cast<size_t>(assign[static_cast<size_t>(v)]);
        out[m] += p;
    }
    return out;
}

} // namespace

double pairwise_mutual_information(const DiscreteJoint& joint, int i, int j) {
    if (i == j) throw std::invalid_argument("MI needs two distinct variables");
    if (i < 0 || j < 0 || i >= joint.num_vars() || j >= joint.num_vars())
        throw std::invalid_argument("variable index out of range");

    auto pij = marginal(joint, {i, j});
    auto pi = marginal(joint, {i});
    auto pj = marginal(joint, {j});
    int ci = joint.cardinalities[static_cast<size_t>(i)];
    int cj = joint.cardinalities[static_cast<size_t>(j)];

    double mi = 0.0;
    for (int a = 0; a < ci; ++a) {
        for (int b = 0; b < cj; ++b) {
            double p = pij[static_cast<size_t>(a) * static_cast<size_t>(cj) + static_cast<size_t>(b)];
            if (p == 0.0) continue; // 0 * log(0/q) = 0
            mi += p * std::log(p / (pi[static_cast<size_t>(a)] * pj[static_cast<size_t>(b)]));
        }
    }
    return mi;
}

SimilarityMatrix mutual_information_matrix(const DiscreteJoint& joint) {
    int n = joint.num_vars();
    auto m = SimilarityMatrix::zeros(n, SimilarityKind::Custom);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            m.set(i, j, pairwise_mutual_information(joint, i, j));
    return m;
}

DependencyTree chow_liu_tree(const DiscreteJoint& joint) {
    if (joint.num_vars() < 2) throw std::invalid_argument("need at least 2 variables");
    return max_spanning_tree(mutual_information_matrix(joint));
}

double tree_distribution_kl(const DiscreteJoint& joint, const DependencyTree& tree) {
    if (tree.n != joint.num_vars()) throw std::invalid_argument("tree does not span the joint");
    if (static_cast<int>(tree.edges.size()) != tree.n - 1)
        throw std::invalid_argument("not a spanning tree");

    int root = tree.root.value_or(0);

    // Orient edges away from the root.
    std::vector<std::vector<int>> adj(static_cast<size_t>(tree.n));
    for (const auto& e : tree.edges) {
        adj[static_cast<size_t>(e.a)].push_back(e.b);
        adj[static_cast<size_t>(e.b)].push_back(e.a);
    }
    std::vector<int> parent(static_cast<size_t>(tree.n), -1);
    std::vector<int> order;
    std::deque<int> queue{root};
    std::vector<bool> seen(static_cast<size_t>(tree.n), false);
    seen[static_cast<size_t>(root)] = true;
    while (!queue.empty()) {
        int u = queue.front();
        queue.pop_front();
        order.push_back(u);
        for (int v : adj[static_cast<size_t>(u)]) {
            if (!seen[static_cast<size_t>(v)]) {
                seen[static_cast<size_t>(v)] = true;
                parent[static_cast<size_t>(v)] = u;
                queue.push_back(v);
            }
        }
    }
    if (static_cast<int>(order.size()) != tree.n)
        throw std::invalid_argument("tree is not connected");

    std::vector<std::vector<double>> singles(static_cast<size_t>(tree.n));
    for (int v = 0; v < tree.n; ++v) singles[static_cast<size_t>(v)] = marginal(joint, {v});
    // pair[(child)] over (child, parent) in that index order
    std::vector<std::vector<double>> pairs(static_cast<size_t>(tree.n));
    for (int v = 0; v < tree.n; ++v)
        if (parent[static_cast<size_t>(v)] >= 0) pairs[static_cast<size_t>(v)] = marginal(joint, {v, parent[static_cast<size_t>(v)]});

    double kl = 0.0;
    std::vector<int> assign;
    for (size_t idx = 0; idx < joint.probabilities.size(); ++idx) {
        double p = joint.probabilities[idx];
        if (p == 0.0) continue;
        joint.assignment_of(idx, assign);

        double log_pt = 0.0;
        double p_root = singles[static_cast<size_t>(root)][static_cast<size_t>(assign[static_cast<size_t>(root)])];
        if (p_root == 0.0) throw UndefinedKL("P_T assigns zero mass where P > 0");
        log_pt += std::log(p_root);
        for (int v : order) {
            int par = parent[static_cast<size_t>(v)];
            if (par < 0) continue;
            int cp = joint.cardinalities[static_cast<size_t>(par)];
            double p_pair = pairs[static_cast<size_t>(v)][static_cast<size_t>(assign[static_cast<size_t>(v)]) * static_cast<size_t>(cp) +
                                                          static_cast<size_t>(assign[static_cast<size_t>(par)])];
            double p_par = singles[static_cast<size_t>(par)][static_cast<size_t>(assign[static_cast<size_t>(par)])];
            if (p_pair == 0.0 || p_par == 0.0) throw UndefinedKL("P_T assigns zero mass where P > 0");
            log_pt += std::log(p_pair) - std::log(p_par);
        }
        kl += p * (std::log(p) - log_pt);
    }
    return kl;
}

std::vector<EdgeSet> enumerate_spanning_trees(int n) {
    if (n > 7) throw TooLarge("spanning tree enumeration capped at n = 7");
    if (n < 2) throw std::invalid_argument("need n >= 2");

    // Decode every Prufer sequence of length n-2.
    size_t count = 1;
    for (int k = 0; k < n - 2; ++k) count *= static_cast<size_t>(n);

    std::vector<EdgeSet> trees;
    trees.reserve(count);
    std::vector<int> seq(static_cast<size_t>(std::max(0, n - 2)), 0);
    for (size_t code = 0; code < count; ++code) {
        size_t c = code;
        for (size_t k = 0; k < seq.size(); ++k) {
            seq[k] = static_cast<int>(c % static_cast<size_t>(n));
            c /= static_cast<size_t>(n);
        }

        std::vector<int> degree(static_cast<size_t>(n), 1);
        for (int s : seq) ++degree[static_cast<size_t>(s)];

        EdgeSet edges;
        edges.reserve(static_cast<size_t>(n - 1));
        std::vector<bool> used(static_cast<size_t>(n), false);
        for (int s : seq) {
            int leaf = -1;
            for (int v = 0; v < n; ++v) {
                if (!used[static_cast<size_t>(v)] && degree[static_cast<size_t>(v)] == 1) {
                    leaf = v;
                    break;
                }
            }
            used[static_cast<size_t>(leaf)] = true;
            --degree[static_cast<size_t>(s)];
            edges.emplace_back(std::min(leaf, s), std::max(leaf, s));
        }
        int u = -1, v = -1;
        for (int w = 0; w < n; ++w) {
            if (!used[static_cast<size_t>(w)] && degree[static_cast<size_t>(w)] == 1) {
                if (u == -1)
                    u = w;
                else
                    v = w;
            }
        }
        edges.emplace_back(std::min(u, v), std::max(u, v));
        std::sort(edges.begin(), edges.end());
        trees.push_back(std::move(edges));
    }
    return trees;
}

} // namespace coa

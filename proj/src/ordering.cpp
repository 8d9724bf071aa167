#include "coa/ordering.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace coa {

std::string strategy_name(Strategy s) {
    switch (s) {
    case Strategy::Default: return "default";
    case Strategy::Dense: return "dense";
    case Strategy::DfsGreedy: return "dfs-greedy";
    case Strategy::ClOrder: return "cl-order";
    }
    return "default";
}

Strategy parse_strategy(std::string_view name) {
    if (name == "default") return Strategy::Default;
    if (name == "dense") return Strategy::Dense;
    if (name == "dfs-greedy") return Strategy::DfsGreedy;
    if (name == "cl-order") return Strategy::ClOrder;
    throw std::invalid_argument("unknown strategy: " + std::string(name));
}

double DependencyTree::total_weight() const {
    std::vector<TreeEdge> sorted = edges;
    std::sort(sorted.begin(), sorted.end(), [](const TreeEdge& x, const TreeEdge& y) {
        int xa = std::min(x.a, x.b), xb = std::max(x.a, x.b);
        int ya = std::min(y.a, y.b), yb = std::max(y.a, y.b);
        return xa != ya ? xa < ya : xb < yb;
    });
    double total = 0.0;
    for (const auto& e : sorted) total += e.weight;
    return total;
}

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(static_cast<size_t>(n)) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int x) {
        while (parent[static_cast<size_t>(x)] != x) {
            parent[static_cast<size_t>(x)] = parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
            x = parent[static_cast<size_t>(x)];
        }
        return x;
    }
    bool unite(int a, int b) {
        int ra = find(a), rb = find(b);
        if (ra == rb) return false;
        parent[static_cast<size_t>(rb)] = ra;
        return true;
    }
};

} // namespace

DependencyTree max_spanning_tree(const SimilarityMatrix& sim) {
    if (sim.n < 1) throw std::invalid_argument("similarity matrix must have n >= 1");

    DependencyTree tree;
    tree.n = sim.n;
    if (sim.n == 1) return tree;

    std::vector<TreeEdge> edges;
    edges.reserve(static_cast<size_t>(sim.n) * (sim.n - 1) / 2);
    for (int i = 0; i < sim.n; ++i)
        for (int j = i + 1; j < sim.n; ++j)
            edges.push_back({i, j, sim.at(i, j)});

    std::sort(edges.begin(), edges.end(), [](const TreeEdge& x, const TreeEdge& y) {
        if (x.weight != y.weight) return x.weight > y.weight;
        if (x.a != y.a) return x.a < y.a;
        return x.b < y.b;
    });

    UnionFind uf(sim.n);
    for (const auto& e : edges) {
        if (uf.unite(e.a, e.b)) {
            tree.edges.push_back(e);
            if (static_cast<int>(tree.edges.size()) == sim.n - 1) break;
        }
    }
    return tree;
}

int select_root(const std::vector<double>& query_scores) {
    if (query_scores.empty()) throw std::invalid_argument("query scores must be non-empty");
    int best = 0;
    for (int i = 1; i < static_cast<int>(query_scores.size()); ++i)
        if (query_scores[static_cast<size_t>(i)] > query_scores[static_cast<size_t>(best)]) best = i;
    return best;
}

namespace {

struct Neighbor {
    int node;
    double weight;
};

std::vector<std::vector<Neighbor>> adjacency(const DependencyTree& tree) {
    std::vector<std::vector<Neighbor>> adj(static_cast<size_t>(tree.n));
    for (const auto& e : tree.edges) {
        adj[static_cast<size_t>(e.a)].push_back({e.b, e.weight});
        adj[static_cast<size_t>(e.b)].push_back({e.a, e.weight});
    }
    return adj;
}

} // namespace

Ordering bfs_order(const DependencyTree& tree, int root) {
    if (root < 0 || root >= tree.n) throw std::invalid_argument("root out of range");
    if (static_cast<int>(tree.edges.size()) != tree.n - 1)
        throw std::invalid_argument("not a spanning tree");

    auto adj = adjacency(tree);
    Ordering out;
    out.strategy = Strategy::ClOrder;
    out.permutation.reserve(static_cast<size_t>(tree.n));

    std::vector<bool> visited(static_cast<size_t>(tree.n), false);
    std::deque<int> queue{root};
    visited[static_cast<size_t>(root)] = true;
    while (!queue.empty()) {
        int u = queue.front();
        queue.pop_front();
        out.permutation.push_back(u);
        std::vector<Neighbor> children;
        for (const auto& nb : adj[static_cast<size_t>(u)])
            if (!visited[static_cast<size_t>(nb.node)]) children.push_back(nb);
        std::sort(children.begin(), children.end(), [](const Neighbor& x, const Neighbor& y) {
            if (x.weight != y.weight) return x.weight > y.weight;
            return x.node < y.node;
        });
        for (const auto& c : children) {
            visited[static_cast<size_t>(c.node)] = true;
            queue.push_back(c.node);
        }
    }
    if (static_cast<int>(out.permutation.size()) != tree.n)
        throw std::invalid_argument("tree is not connected");
    return out;
}

Ordering dfs_greedy_order(const SimilarityMatrix& sim, int root) {
    if (sim.n < 1) throw std::invalid_argument("empty similarity matrix");
    if (root < 0 || root >= sim.n) throw std::invalid_argument("root out of range");

    Ordering out;
    out.strategy = Strategy::DfsGreedy;
    std::vector<bool> visited(static_cast<size_t>(sim.n), false);
    int current = root;
    visited[static_cast<size_t>(current)] = true;
    out.permutation.push_back(current);
    for (int step = 1; step < sim.n; ++step) {
        int best = -1;
        for (int j = 0; j < sim.n; ++j) {
            if (visited[static_cast<size_t>(j)]) continue;
            if (best == -1 || sim.at(current, j) > sim.at(current, best)) best = j;
        }
        visited[static_cast<size_t>(best)] = true;
        out.permutation.push_back(best);
        current = best;
    }
    return out;
}

Ordering dense_order(const std::vector<double>& query_scores) {
    if (query_scores.empty()) throw std::invalid_argument("query scores must be non-empty");
    Ordering out;
    out.strategy = Strategy::Dense;
    out.permutation.resize(query_scores.size());
    std::iota(out.permutation.begin(), out.permutation.end(), 0);
    std::sort(out.permutation.begin(), out.permutation.end(), [&](int a, int b) {
        double sa = query_scores[static_cast<size_t>(a)], sb = query_scores[static_cast<size_t>(b)];
        if (sa != sb) return sa > sb;
        return a < b;
    });
    return out;
}

Ordering default_order(int n) {
    if (n < 0) throw std::invalid_argument("n must be >= 0");
    Ordering out;
    out.strategy = Strategy::Default;
    out.permutation.resize(static_cast<size_t>(n));
    std::iota(out.permutation.begin(), out.permutation.end(), 0);
    return out;
}

nlohmann::json ordering_dump(const Ordering& ordering, const DependencyTree* tree) {
    nlohmann::json j;
    j["strategy"] = strategy_name(ordering.strategy);
    j["root"] = tree && tree->root ? nlohmann::json(*tree->root) : nlohmann::json(nullptr);
    auto edges = nlohmann::json::array();
    if (tree) {
        for (const auto& e : tree->edges)
            edges.push_back(nlohmann::json::array({e.a, e.b, e.weight}));
    }
    j["edges"] = edges;
    j["order"] = ordering.permutation;
    return j;
}

std::string render_tree(const DependencyTree& tree, int root) {
    auto adj = adjacency(tree);
    std::ostringstream os;

    // Same child order as bfs_order, rendered depth-first.
    std::vector<bool> visited(static_cast<size_t>(tree.n), false);
    struct Frame {
        int node;
        double weight;
        std::string prefix;
        bool last;
        bool is_root;
    };
    std::vector<Frame> stack{{root, 0.0, "", true, true}};
    visited[static_cast<size_t>(root)] = true;
    while (!stack.empty()) {
        Frame f = stack.back();
        stack.pop_back();
        if (f.is_root) {
            os << "[" << f.node << "] root\n";
        } else {
            os << f.prefix << (f.last ? "`-- " : "|-- ") << "[" << f.node << "] w="
               << f.weight << "\n";
        }
        std::vector<Neighbor> children;
        for (const auto& nb : adj[static_cast<size_t>(f.node)])
            if (!visited[static_cast<size_t>(nb.node)]) children.push_back(nb);
        std::sort(children.begin(), children.end(), [](const Neighbor& x, const Neighbor& y) {
            if (x.weight != y.weight) return x.weight > y.weight;
            return x.node < y.node;
        });
        for (const auto& c : children) visited[static_cast<size_t>(c.node)] = true;
        std::string child_prefix = f.is_root ? "" : f.prefix + (f.last ? "    " : "|   ");
        for (auto it = children.rbegin(); it != children.rend(); ++it) {
            bool last = (it == children.rbegin());
            stack.push_back({it->node, it->weight, child_prefix, last, false});
        }
    }
    return os.str();
}

} // namespace coa

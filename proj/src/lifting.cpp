#include "scmamba/lifting.hpp"

#include <algorithm>
#include <unordered_set>

namespace scmamba {

std::vector<std::pair<NodeId, NodeId>> canonical_edges(
    int n_nodes, const std::vector<std::pair<NodeId, NodeId>>& edges) {
    std::vector<std::pair<NodeId, NodeId>> out;
    out.reserve(edges.size());
    for (auto [u, v] : edges) {
        if (u == v) {
            raise(ErrorKind::invalid_argument,
                  "self-loop at node " + std::to_string(u));
        }
        if (u < 0 || v < 0 || u >= n_nodes || v >= n_nodes) {
            raise(ErrorKind::out_of_range,
                  "edge endpoint out of range [0, " + std::to_string(n_nodes) + ")");
        }
        if (u > v) std::swap(u, v);
        out.emplace_back(u, v);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

namespace {

struct Adjacency {
    std::vector<std::vector<NodeId>> nbrs;  // sorted

    bool connected(NodeId u, NodeId v) const {
        const auto& a = nbrs[u];
        return std::binary_search(a.begin(), a.end(), v);
    }
};

Adjacency build_adjacency(int n_nodes, const std::vector<std::pair<NodeId, NodeId>>& edges) {
    Adjacency adj;
    adj.nbrs.resize(n_nodes);
    for (auto [u, v] : edges) {
        adj.nbrs[u].push_back(v);
        adj.nbrs[v].push_back(u);
    }
    for (auto& a : adj.nbrs) std::sort(a.begin(), a.end());
    return adj;
}

// Bron-Kerbosch with pivoting. P and X are sorted vectors.
void bron_kerbosch(const Adjacency& adj, Cell& current, std::vector<NodeId>& P,
                   std::vector<NodeId>& X, std::vector<Cell>& out) {
    if (P.empty() && X.empty()) {
        out.push_back(current);
        return;
    }
    // pivot: vertex of P u X with the most neighbours inside P
    NodeId pivot = -1;
    std::size_t best = 0;
    bool have_pivot = false;
    for (const auto* set : {&P, &X}) {
        for (NodeId u : *set) {
            const auto& nu = adj.nbrs[u];
            std::size_t cnt = 0;
            for (NodeId w : P) {
                if (std::binary_search(nu.begin(), nu.end(), w)) ++cnt;
            }
            if (!have_pivot || cnt > best) {
                best = cnt;
                pivot = u;
                have_pivot = true;
            }
        }
    }
    std::vector<NodeId> candidates;
    for (NodeId v : P) {
        if (!adj.connected(pivot, v)) candidates.push_back(v);
    }
    for (NodeId v : candidates) {
        const auto& nv = adj.nbrs[v];
        std::vector<NodeId> Pn, Xn;
        std::set_intersection(P.begin(), P.end(), nv.begin(), nv.end(), std::back_inserter(Pn));
        std::set_intersection(X.begin(), X.end(), nv.begin(), nv.end(), std::back_inserter(Xn));
        current.push_back(v);
        bron_kerbosch(adj, current, Pn, Xn, out);
        current.pop_back();
        P.erase(std::find(P.begin(), P.end(), v));
        auto pos = std::lower_bound(X.begin(), X.end(), v);
        X.insert(pos, v);
    }
}

void expand_subsets(const Cell& clique, int subset_size, Cell& scratch, std::size_t start,
                    std::unordered_set<Cell, CellHash>& sink) {
    if (static_cast<int>(scratch.size()) == subset_size) {
        sink.insert(scratch);
        return;
    }
    const int needed = subset_size - static_cast<int>(scratch.size());
    for (std::size_t i = start; i + needed <= clique.size(); ++i) {
        scratch.push_back(clique[i]);
        expand_subsets(clique, subset_size, scratch, i + 1, sink);
        scratch.pop_back();
    }
}

// Linear-time core decomposition; returns the removal order (lowest remaining
// degree first).
std::vector<NodeId> degeneracy_order(const Adjacency& adj) {
    const int n = static_cast<int>(adj.nbrs.size());
    std::vector<int> deg(n);
    int max_deg = 0;
    for (int v = 0; v < n; ++v) {
        deg[v] = static_cast<int>(adj.nbrs[v].size());
        max_deg = std::max(max_deg, deg[v]);
    }
    std::vector<int> bin(max_deg + 2, 0);
    for (int v = 0; v < n; ++v) bin[deg[v]]++;
    int start = 0;
    for (int d = 0; d <= max_deg; ++d) {
        const int count = bin[d];
        bin[d] = start;
        start += count;
    }
    std::vector<NodeId> vert(n);
    std::vector<int> pos(n);
    for (NodeId v = 0; v < n; ++v) {
        pos[v] = bin[deg[v]]++;
        vert[pos[v]] = v;
    }
    for (int d = max_deg; d >= 1; --d) bin[d] = bin[d - 1];
    bin[0] = 0;

    for (int i = 0; i < n; ++i) {
        const NodeId v = vert[i];
        for (NodeId u : adj.nbrs[v]) {
            if (deg[u] > deg[v]) {
                // swap u with the first vertex of its degree bucket, then shrink it
                const int du = deg[u];
                const int pu = pos[u];
                const int pw = bin[du];
                const NodeId w = vert[pw];
                if (u != w) {
                    std::swap(vert[pu], vert[pw]);
                    pos[u] = pw;
                    pos[w] = pu;
                }
                bin[du]++;
                deg[u]--;
            }
        }
    }
    return vert;
}

}  // namespace

std::vector<Cell> maximal_cliques(int n_nodes,
                                  const std::vector<std::pair<NodeId, NodeId>>& edges) {
    Adjacency adj = build_adjacency(n_nodes, edges);
    // degeneracy-ordered outer loop keeps every pivoted subproblem no larger
    // than the core number of the graph
    std::vector<NodeId> order = degeneracy_order(adj);
    std::vector<int> rank(n_nodes);
    for (int i = 0; i < n_nodes; ++i) rank[order[i]] = i;

    std::vector<Cell> out;
    Cell current;
    for (NodeId v : order) {
        if (adj.nbrs[v].empty()) continue;
        std::vector<NodeId> P, X;
        for (NodeId u : adj.nbrs[v]) {
            (rank[u] > rank[v] ? P : X).push_back(u);
        }
        current.assign(1, v);
        bron_kerbosch(adj, current, P, X, out);
    }
    for (Cell& c : out) std::sort(c.begin(), c.end());
    std::sort(out.begin(), out.end());
    return out;
}

SimplicialComplex clique_lift(const FeaturedGraph& g, int max_rank,
                              const CliqueLiftOptions& opts) {
    if (max_rank < 1) {
        raise(ErrorKind::invalid_argument, "clique_lift: max_rank must be >= 1");
    }
    if (max_rank > opts.max_rank_limit) {
        raise(ErrorKind::out_of_range,
              "clique_lift: max_rank " + std::to_string(max_rank) +
                  " exceeds configured maximum " + std::to_string(opts.max_rank_limit));
    }
    auto edges = canonical_edges(g.n_nodes, g.edges);
    auto cliques = maximal_cliques(g.n_nodes, edges);

    std::vector<std::unordered_set<Cell, CellHash>> sets(max_rank + 1);
    Cell scratch;
    for (const Cell& c : cliques) {
        if (static_cast<int>(c.size()) > opts.clique_size_ceiling) {
            raise(ErrorKind::invalid_argument,
                  "clique_lift: clique of size " + std::to_string(c.size()) +
                      " exceeds ceiling " + std::to_string(opts.clique_size_ceiling));
        }
        const int top = std::min<int>(max_rank, static_cast<int>(c.size()) - 1);
        for (int r = 1; r <= top; ++r) {
            scratch.clear();
            expand_subsets(c, r + 1, scratch, 0, sets[r]);
        }
    }

    std::vector<std::vector<Cell>> sorted(max_rank + 1);
    for (int r = 1; r <= max_rank; ++r) {
        sorted[r].assign(sets[r].begin(), sets[r].end());
        std::sort(sorted[r].begin(), sorted[r].end());
    }
    return SimplicialComplex::from_canonical(g.n_nodes, max_rank, std::move(sorted));
}

}  // namespace scmamba

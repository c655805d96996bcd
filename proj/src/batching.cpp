#include "scmamba/batching.hpp"

#include <algorithm>

namespace scmamba {

namespace {

std::vector<NodeId> expand_node_set(const SimplicialComplex& X,
                                    const std::vector<NodeId>& seeds, int hops) {
    if (seeds.empty()) {
        raise(ErrorKind::invalid_argument, "subcomplex sampling: empty seed set");
    }
    if (hops < 1) {
        raise(ErrorKind::invalid_argument, "subcomplex sampling: hops must be >= 1");
    }
    const int n = X.num_nodes();
    std::vector<std::vector<NodeId>> adj(n);
    if (X.max_rank() >= 1) {
        for (const Cell& e : X.cells(1)) {
            adj[e[0]].push_back(e[1]);
            adj[e[1]].push_back(e[0]);
        }
    }
    std::vector<char> in_set(n, 0);
    std::vector<NodeId> frontier;
    for (NodeId s : seeds) {
        if (s < 0 || s >= n) {
            raise(ErrorKind::out_of_range, "subcomplex sampling: seed " + std::to_string(s) +
                                               " out of range [0, " + std::to_string(n) + ")");
        }
        if (!in_set[s]) {
            in_set[s] = 1;
            frontier.push_back(s);
        }
    }
    for (int h = 0; h < hops && !frontier.empty(); ++h) {
        std::vector<NodeId> next;
        for (NodeId v : frontier) {
            for (NodeId w : adj[v]) {
                if (!in_set[w]) {
                    in_set[w] = 1;
                    next.push_back(w);
                }
            }
        }
        frontier = std::move(next);
    }
    std::vector<NodeId> nodes;
    for (NodeId v = 0; v < n; ++v) {
        if (in_set[v]) nodes.push_back(v);
    }
    return nodes;
}

SubComplexBatch assemble(const SimplicialComplex& X, const std::vector<NodeId>& seeds,
                         std::vector<NodeId> nodes,
                         const std::vector<std::vector<char>>& keep_cell) {
    SubComplexBatch batch;
    batch.seed_nodes = seeds;
    batch.local_to_global = std::move(nodes);
    batch.global_to_local.reserve(batch.local_to_global.size() * 2);
    for (NodeId i = 0; i < static_cast<NodeId>(batch.local_to_global.size()); ++i) {
        batch.global_to_local.emplace(batch.local_to_global[i], i);
    }
    batch.seed_local.reserve(seeds.size());
    for (NodeId s : seeds) batch.seed_local.push_back(batch.global_to_local.at(s));

    // relabeling is monotone, so tuples stay sorted and the per-rank
    // lexicographic cell order is preserved
    std::vector<std::vector<Cell>> cells(X.max_rank() + 1);
    for (int r = 1; r <= X.max_rank(); ++r) {
        for (CellId j = 0; j < X.num_cells(r); ++j) {
            if (!keep_cell[r][j]) continue;
            Cell local;
            local.reserve(r + 1);
            for (NodeId v : X.cells(r)[j]) local.push_back(batch.global_to_local.at(v));
            cells[r].push_back(std::move(local));
        }
    }
    batch.sub = SimplicialComplex::from_canonical(
        static_cast<int>(batch.local_to_global.size()), X.max_rank(), std::move(cells));
    return batch;
}

}  // namespace

SubComplexBatch sample_subcomplex(const SimplicialComplex& X,
                                  const std::vector<NodeId>& seeds, int hops) {
    std::vector<NodeId> nodes = expand_node_set(X, seeds, hops);
    std::vector<char> in_set(X.num_nodes(), 0);
    for (NodeId v : nodes) in_set[v] = 1;

    std::vector<std::vector<char>> keep(X.max_rank() + 1);
    for (int r = 1; r <= X.max_rank(); ++r) {
        keep[r].assign(X.num_cells(r), 0);
        for (CellId j = 0; j < X.num_cells(r); ++j) {
            bool all = true;
            for (NodeId v : X.cells(r)[j]) {
                if (!in_set[v]) {
                    all = false;
                    break;
                }
            }
            keep[r][j] = all;
        }
    }
    return assemble(X, seeds, std::move(nodes), keep);
}

SubComplexBatch per_rank_prune(const SimplicialComplex& X,
                               const std::vector<NodeId>& seeds, int hops) {
    std::vector<NodeId> nodes = expand_node_set(X, seeds, hops);

    // nodes first, then each rank filtered against the survivors one rank
    // below through the boundary relation
    std::vector<std::vector<char>> keep(X.max_rank() + 1);
    keep[0].assign(X.num_cells(0), 0);
    for (NodeId v : nodes) keep[0][v] = 1;
    for (int r = 1; r <= X.max_rank(); ++r) {
        keep[r].assign(X.num_cells(r), 0);
        for (CellId j = 0; j < X.num_cells(r); ++j) {
            bool all = true;
            for (CellId f : X.faces(r, j)) {
                if (!keep[r - 1][f]) {
                    all = false;
                    break;
                }
            }
            keep[r][j] = all;
        }
    }
    return assemble(X, seeds, std::move(nodes), keep);
}

std::vector<std::vector<Cell>> batch_cells_global(const SubComplexBatch& batch) {
    std::vector<std::vector<Cell>> out(batch.sub.max_rank() + 1);
    for (int r = 0; r <= batch.sub.max_rank(); ++r) {
        for (const Cell& c : batch.sub.cells(r)) {
            Cell g;
            g.reserve(c.size());
            for (NodeId v : c) g.push_back(batch.local_to_global[v]);
            out[r].push_back(std::move(g));
        }
    }
    return out;
}

}  // namespace scmamba

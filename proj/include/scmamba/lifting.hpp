#pragma once

#include "scmamba/common.hpp"
#include "scmamba/complex.hpp"

#include <optional>

namespace scmamba {

/// Undirected graph with per-node features. Edges are stored in canonical
/// form (u < v), deduplicated, no self-loops.
struct FeaturedGraph {
    int n_nodes = 0;
    std::vector<std::pair<NodeId, NodeId>> edges;
    MatD node_features;  // n_nodes x d_in

    int feature_dim() const { return static_cast<int>(node_features.cols()); }
};

/// Canonicalize an edge list: orient u < v, drop duplicates, reject
/// self-loops and out-of-range endpoints.
std::vector<std::pair<NodeId, NodeId>> canonical_edges(
    int n_nodes, const std::vector<std::pair<NodeId, NodeId>>& edges);

struct CliqueLiftOptions {
    // A maximal clique larger than this aborts the lift; the subset expansion
    // of an m-clique creates C(m, r+1) cells per rank.
    int clique_size_ceiling = 25;
    int max_rank_limit = 16;
};

/// Clique lifting: rank-1 cells are exactly the input edges; every
/// (r+1)-subset of every clique becomes a rank-r cell, for r <= max_rank.
/// The result always carries max_rank ranks, trailing ones possibly empty.
SimplicialComplex clique_lift(const FeaturedGraph& g, int max_rank,
                              const CliqueLiftOptions& opts = {});

/// All maximal cliques of the graph, each as a sorted vertex tuple.
std::vector<Cell> maximal_cliques(int n_nodes,
                                  const std::vector<std::pair<NodeId, NodeId>>& edges);

/// Per-rank feature matrices H^(r), all sharing one width within a pass.
template <class T>
struct FeatureStore {
    std::vector<Mat<T>> h;  // h[r]: n_r x d

    int max_rank() const { return static_cast<int>(h.size()) - 1; }
    int dim() const { return h.empty() ? 0 : static_cast<int>(h[0].cols()); }
};

/// Sum lifting: H^(0) = H0 and, per ascending rank, each cell's feature is
/// the sum of its faces' features (unsigned incidence; a signed sum would
/// cancel contributions of faces with matching features).
template <class T>
FeatureStore<T> feature_lift(const SimplicialComplex& X, const Mat<T>& H0) {
    if (H0.rows() != X.num_nodes()) {
        raise(ErrorKind::shape_mismatch,
              "feature_lift: H0 has " + std::to_string(H0.rows()) + " rows, complex has " +
                  std::to_string(X.num_nodes()) + " nodes");
    }
    FeatureStore<T> F;
    F.h.resize(X.max_rank() + 1);
    F.h[0] = H0;
    for (int r = 1; r <= X.max_rank(); ++r) {
        F.h[r].setZero(X.num_cells(r), H0.cols());
        for (CellId j = 0; j < X.num_cells(r); ++j) {
            auto f = X.faces(r, j);
            for (CellId i : f) F.h[r].row(j) += F.h[r - 1].row(i);
        }
    }
    return F;
}

/// Reverse-mode companion of feature_lift: cascades cotangents from the top
/// rank down and returns the gradient with respect to H0. dF is consumed.
template <class T>
Mat<T> feature_lift_backward(const SimplicialComplex& X, FeatureStore<T>&& dF) {
    for (int r = X.max_rank(); r >= 1; --r) {
        if (dF.h[r].size() == 0) continue;
        for (CellId j = 0; j < X.num_cells(r); ++j) {
            auto f = X.faces(r, j);
            for (CellId i : f) dF.h[r - 1].row(i) += dF.h[r].row(j);
        }
    }
    return std::move(dF.h[0]);
}

}  // namespace scmamba

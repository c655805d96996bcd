#pragma once

#include "scmamba/complex.hpp"

#include <unordered_map>

namespace scmamba {

/// An induced subcomplex over a sampled node set, relabeled to dense local
/// ids. Every cell of the source complex whose vertices are all sampled is
/// present; immutable once built.
struct SubComplexBatch {
    std::vector<NodeId> seed_nodes;       // global ids, as given
    SimplicialComplex sub;                // over local ids
    std::vector<NodeId> local_to_global;  // ascending
    std::unordered_map<NodeId, NodeId> global_to_local;
    std::vector<NodeId> seed_local;
};

/// Expand the seeds by `hops` steps over the 1-skeleton and take the induced
/// subcomplex. With hops >= the number of stacked blocks, seed-row model
/// outputs match the full-complex forward (every node's sequence only reads
/// cells whose vertices are its 1-hop neighbours).
SubComplexBatch sample_subcomplex(const SimplicialComplex& X,
                                  const std::vector<NodeId>& seeds, int hops);

/// Baseline producing the same induced subcomplex by filtering each rank
/// sequentially against the surviving cells one rank below (nodes first, then
/// edges, then triangles, ...). Exists for benchmarking against
/// sample_subcomplex.
SubComplexBatch per_rank_prune(const SimplicialComplex& X,
                               const std::vector<NodeId>& seeds, int hops);

/// Cells of the batch complex mapped back to global vertex ids, per rank.
std::vector<std::vector<Cell>> batch_cells_global(const SubComplexBatch& batch);

}  // namespace scmamba

#pragma once

#include "scmamba/common.hpp"

#include <iosfwd>
#include <span>
#include <unordered_map>
#include <utility>

namespace scmamba {

/// Column-compressed sparse matrix with entries in {-1, 0, +1}.
/// Row indices are sorted within each column.
struct SparseSigned {
    int rows = 0;
    int cols = 0;
    std::vector<int> col_ptr;  // size cols + 1
    std::vector<int> row_idx;
    std::vector<std::int8_t> values;

    int nnz() const { return static_cast<int>(row_idx.size()); }
};

/// Signed boundary operator B_r mapping rank-r cells to their rank-(r-1)
/// faces. Column j carries (-1)^i at the face omitting the i-th vertex of
/// the sorted cell, so consecutive operators compose to zero.
struct BoundaryMatrix {
    int rank = 0;
    SparseSigned mat;  // n_{r-1} x n_r
};

/// Entrywise absolute value of the boundary operator; all entries +1.
struct IncidenceMatrix {
    int rank = 0;
    SparseSigned mat;
};

/// Node incidence: one sparse n_0 x n* matrix relating nodes to every cell
/// of rank >= 1, with columns ordered rank-major (all rank-1 columns first).
struct NodeIncidence {
    SparseSigned mat;
    std::vector<std::pair<int, CellId>> column_rank;  // column -> (rank, within-rank id)
    std::vector<int> rank_col_start;  // size max_rank + 2; columns of rank r are
                                      // [rank_col_start[r], rank_col_start[r+1])
};

/// Immutable simplicial complex: per rank, an ordered (lexicographic) list of
/// cells stored as strictly increasing vertex tuples. Closure-complete: every
/// drop-one-vertex face of every cell is present one rank below. Safe for
/// concurrent reads after construction.
class SimplicialComplex {
public:
    SimplicialComplex() = default;

    int num_nodes() const { return n_nodes_; }
    int max_rank() const { return max_rank_; }

    int num_cells(int r) const {
        check_rank(r);
        return static_cast<int>(cells_[r].size());
    }

    const std::vector<Cell>& cells(int r) const {
        check_rank(r);
        return cells_[r];
    }

    /// Dense id of a cell given its sorted vertex tuple, or -1 if absent.
    CellId find_cell(int r, const Cell& verts) const;

    /// Face ids of cell j at rank r (r >= 1). Entry i is the id, within rank
    /// r-1, of the face obtained by omitting the i-th vertex.
    std::span<const CellId> faces(int r, CellId j) const;

    /// Ids of rank-r cells containing node v, ascending. r in [1, max_rank].
    std::span<const CellId> cells_with_node(int r, NodeId v) const;

    /// Construct from already canonical input: per-rank lists of sorted,
    /// deduplicated tuples in lexicographic order, closure-complete.
    static SimplicialComplex from_canonical(int n_nodes, int max_rank,
                                            std::vector<std::vector<Cell>> cells);

private:
    void check_rank(int r) const {
        if (r < 0 || r > max_rank_) {
            raise(ErrorKind::out_of_range,
                  "rank " + std::to_string(r) + " out of range [0, " +
                      std::to_string(max_rank_) + "]");
        }
    }

    int n_nodes_ = 0;
    int max_rank_ = 0;
    std::vector<std::vector<Cell>> cells_;  // [r][j]
    std::vector<std::unordered_map<Cell, CellId, CellHash>> index_;
    // faces_[r] is flat with stride r+1 (empty for r = 0)
    std::vector<std::vector<CellId>> faces_;
    // node_to_cells_[r]: CSR over nodes listing incident rank-r cell ids
    struct Csr {
        std::vector<int> offsets;
        std::vector<CellId> ids;
    };
    std::vector<Csr> node_to_cells_;
};

struct ComplexBuildOptions {
    int max_rank_limit = 16;
};

/// Canonicalize (sort tuples, dedup), closure-complete and index the given
/// cells. cells_by_rank[r] holds rank-r cells as (r+1)-tuples of distinct
/// vertices in any order; the rank-0 list may be empty (every node in
/// [0, n_nodes) is a 0-cell regardless).
SimplicialComplex build_complex(int n_nodes,
                                std::vector<std::vector<Cell>> cells_by_rank,
                                const ComplexBuildOptions& opts = {});

BoundaryMatrix boundary_matrix(const SimplicialComplex& X, int r);
IncidenceMatrix incidence_matrix(const SimplicialComplex& X, int r);
NodeIncidence node_incidence(const SimplicialComplex& X);

/// Rank-r cells containing the given node (copy of the internal list).
std::vector<CellId> incident_cells(const SimplicialComplex& X, NodeId node, int r);

/// Sparse dump: header "rank r rows n cols m nnz k" then one "row col value"
/// line per entry, ordered column-major then by row.
void dump_sparse(std::ostream& os, int rank, const SparseSigned& m);

}  // namespace scmamba

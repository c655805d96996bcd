#include "scmamba/complex.hpp"

#include <algorithm>
#include <ostream>
#include <unordered_set>

namespace scmamba {

CellId SimplicialComplex::find_cell(int r, const Cell& verts) const {
    check_rank(r);
    auto it = index_[r].find(verts);
    return it == index_[r].end() ? CellId{-1} : it->second;
}

std::span<const CellId> SimplicialComplex::faces(int r, CellId j) const {
    check_rank(r);
    if (r < 1) raise(ErrorKind::out_of_range, "faces: rank must be >= 1");
    if (j < 0 || j >= static_cast<CellId>(cells_[r].size())) {
        raise(ErrorKind::out_of_range, "faces: cell id " + std::to_string(j) +
                                           " out of range at rank " + std::to_string(r));
    }
    const int stride = r + 1;
    return {faces_[r].data() + static_cast<std::size_t>(j) * stride,
            static_cast<std::size_t>(stride)};
}

std::span<const CellId> SimplicialComplex::cells_with_node(int r, NodeId v) const {
    check_rank(r);
    if (r < 1) raise(ErrorKind::out_of_range, "cells_with_node: rank must be >= 1");
    if (v < 0 || v >= n_nodes_) {
        raise(ErrorKind::out_of_range, "cells_with_node: node " + std::to_string(v) +
                                           " out of range [0, " + std::to_string(n_nodes_) + ")");
    }
    const auto& csr = node_to_cells_[r];
    return {csr.ids.data() + csr.offsets[v],
            static_cast<std::size_t>(csr.offsets[v + 1] - csr.offsets[v])};
}

SimplicialComplex SimplicialComplex::from_canonical(int n_nodes, int max_rank,
                                                    std::vector<std::vector<Cell>> cells) {
    SimplicialComplex X;
    X.n_nodes_ = n_nodes;
    X.max_rank_ = max_rank;
    cells.resize(max_rank + 1);

    // rank-0 cells are always the full node set
    cells[0].clear();
    cells[0].reserve(n_nodes);
    for (NodeId v = 0; v < n_nodes; ++v) cells[0].push_back({v});

    X.cells_ = std::move(cells);
    X.index_.resize(max_rank + 1);
    for (int r = 0; r <= max_rank; ++r) {
        X.index_[r].reserve(X.cells_[r].size() * 2);
        for (CellId j = 0; j < static_cast<CellId>(X.cells_[r].size()); ++j) {
            X.index_[r].emplace(X.cells_[r][j], j);
        }
    }

    // face ids, drop-i order; requires closure
    X.faces_.resize(max_rank + 1);
    for (int r = 1; r <= max_rank; ++r) {
        const auto& cs = X.cells_[r];
        X.faces_[r].resize(cs.size() * (r + 1));
        Cell face(r);
        for (CellId j = 0; j < static_cast<CellId>(cs.size()); ++j) {
            const Cell& c = cs[j];
            for (int i = 0; i <= r; ++i) {
                face.clear();
                for (int k = 0; k <= r; ++k) {
                    if (k != i) face.push_back(c[k]);
                }
                auto it = X.index_[r - 1].find(face);
                if (it == X.index_[r - 1].end()) {
                    raise(ErrorKind::invalid_argument,
                          "from_canonical: missing face at rank " + std::to_string(r - 1));
                }
                X.faces_[r][static_cast<std::size_t>(j) * (r + 1) + i] = it->second;
            }
        }
    }

    // per-rank CSR of node -> incident cells (cell ids ascending by construction)
    X.node_to_cells_.resize(max_rank + 1);
    for (int r = 1; r <= max_rank; ++r) {
        auto& csr = X.node_to_cells_[r];
        csr.offsets.assign(n_nodes + 1, 0);
        for (const Cell& c : X.cells_[r]) {
            for (NodeId v : c) csr.offsets[v + 1]++;
        }
        for (int v = 0; v < n_nodes; ++v) csr.offsets[v + 1] += csr.offsets[v];
        csr.ids.resize(X.cells_[r].size() * (r + 1));
        std::vector<int> cursor(csr.offsets.begin(), csr.offsets.end() - 1);
        for (CellId j = 0; j < static_cast<CellId>(X.cells_[r].size()); ++j) {
            for (NodeId v : X.cells_[r][j]) csr.ids[cursor[v]++] = j;
        }
    }
    return X;
}

SimplicialComplex build_complex(int n_nodes,
                                std::vector<std::vector<Cell>> cells_by_rank,
                                const ComplexBuildOptions& opts) {
    if (n_nodes < 0) raise(ErrorKind::invalid_argument, "build_complex: negative node count");
    int max_rank = static_cast<int>(cells_by_rank.size()) - 1;
    if (max_rank < 0) max_rank = 0;
    if (max_rank > opts.max_rank_limit) {
        raise(ErrorKind::out_of_range,
              "build_complex: rank " + std::to_string(max_rank) +
                  " exceeds configured maximum " + std::to_string(opts.max_rank_limit));
    }

    std::vector<std::unordered_set<Cell, CellHash>> sets(max_rank + 1);
    for (int r = 0; r < static_cast<int>(cells_by_rank.size()); ++r) {
        for (Cell c : cells_by_rank[r]) {
            std::sort(c.begin(), c.end());
            if (std::adjacent_find(c.begin(), c.end()) != c.end()) {
                raise(ErrorKind::invalid_argument,
                      "build_complex: cell with repeated vertex at rank " + std::to_string(r));
            }
            if (static_cast<int>(c.size()) != r + 1) {
                raise(ErrorKind::invalid_argument,
                      "build_complex: rank " + std::to_string(r) + " cell with " +
                          std::to_string(c.size()) + " vertices");
            }
            if (!c.empty() && (c.front() < 0 || c.back() >= n_nodes)) {
                raise(ErrorKind::out_of_range,
                      "build_complex: vertex index out of range [0, " +
                          std::to_string(n_nodes) + ")");
            }
            if (r >= 1) sets[r].insert(std::move(c));
        }
    }

    // closure completion: add every drop-one-vertex face, top rank down
    for (int r = max_rank; r >= 2; --r) {
        for (const Cell& c : sets[r]) {
            Cell face(r);
            for (int i = 0; i <= r; ++i) {
                face.clear();
                for (int k = 0; k <= r; ++k) {
                    if (k != i) face.push_back(c[k]);
                }
                sets[r - 1].insert(face);
            }
        }
    }

    std::vector<std::vector<Cell>> sorted(max_rank + 1);
    for (int r = 1; r <= max_rank; ++r) {
        sorted[r].assign(sets[r].begin(), sets[r].end());
        std::sort(sorted[r].begin(), sorted[r].end());
    }
    return SimplicialComplex::from_canonical(n_nodes, max_rank, std::move(sorted));
}

BoundaryMatrix boundary_matrix(const SimplicialComplex& X, int r) {
    if (r < 1 || r > X.max_rank()) {
        raise(ErrorKind::out_of_range,
              "boundary_matrix: rank " + std::to_string(r) + " out of range [1, " +
                  std::to_string(X.max_rank()) + "]");
    }
    BoundaryMatrix B;
    B.rank = r;
    B.mat.rows = X.num_cells(r - 1);
    B.mat.cols = X.num_cells(r);
    B.mat.col_ptr.assign(B.mat.cols + 1, 0);

    std::vector<std::pair<int, std::int8_t>> col(r + 1);
    for (CellId j = 0; j < B.mat.cols; ++j) {
        auto f = X.faces(r, j);
        for (int i = 0; i <= r; ++i) {
            col[i] = {f[i], static_cast<std::int8_t>(i % 2 == 0 ? 1 : -1)};
        }
        std::sort(col.begin(), col.end());
        for (auto& [row, v] : col) {
            B.mat.row_idx.push_back(row);
            B.mat.values.push_back(v);
        }
        B.mat.col_ptr[j + 1] = static_cast<int>(B.mat.row_idx.size());
    }
    return B;
}

IncidenceMatrix incidence_matrix(const SimplicialComplex& X, int r) {
    BoundaryMatrix B = boundary_matrix(X, r);
    IncidenceMatrix I;
    I.rank = r;
    I.mat = std::move(B.mat);
    for (auto& v : I.mat.values) v = static_cast<std::int8_t>(v < 0 ? -v : v);
    return I;
}

NodeIncidence node_incidence(const SimplicialComplex& X) {
    NodeIncidence N;
    const int R = X.max_rank();
    int total = 0;
    N.rank_col_start.assign(R + 2, 0);
    for (int r = 1; r <= R; ++r) {
        N.rank_col_start[r] = total;
        total += X.num_cells(r);
    }
    N.rank_col_start[R + 1] = total;

    N.mat.rows = X.num_nodes();
    N.mat.cols = total;
    N.mat.col_ptr.assign(total + 1, 0);
    N.column_rank.reserve(total);

    int col = 0;
    for (int r = 1; r <= R; ++r) {
        for (CellId j = 0; j < X.num_cells(r); ++j, ++col) {
            N.column_rank.emplace_back(r, j);
            for (NodeId v : X.cells(r)[j]) {  // tuples sorted, so rows ascend
                N.mat.row_idx.push_back(v);
                N.mat.values.push_back(1);
            }
            N.mat.col_ptr[col + 1] = static_cast<int>(N.mat.row_idx.size());
        }
    }
    return N;
}

std::vector<CellId> incident_cells(const SimplicialComplex& X, NodeId node, int r) {
    auto span = X.cells_with_node(r, node);
    return {span.begin(), span.end()};
}

void dump_sparse(std::ostream& os, int rank, const SparseSigned& m) {
    os << "rank " << rank << " rows " << m.rows << " cols " << m.cols
       << " nnz " << m.nnz() << "\n";
    for (int j = 0; j < m.cols; ++j) {
        for (int k = m.col_ptr[j]; k < m.col_ptr[j + 1]; ++k) {
            os << m.row_idx[k] << " " << j << " " << static_cast<int>(m.values[k]) << "\n";
        }
    }
}

}  // namespace scmamba

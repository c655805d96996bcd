#pragma once

#include "scmamba/lifting.hpp"

namespace scmamba {

enum class Aggregator { sum, mean, max };

/// One fixed-length sequence per node. The sequence for node A occupies rows
/// [A*seq_len, (A+1)*seq_len) of data. Position 0 holds the rank-R aggregate,
/// position R-r the rank-r aggregate, and the last position the node's own
/// feature vector. Length is max_rank+1 regardless of which ranks are
/// populated; empty aggregates are zero.
template <class T>
struct SequenceBatch {
    Mat<T> data;  // (n_nodes * seq_len) x d
    int n_nodes = 0;
    int seq_len = 0;

    int dim() const { return static_cast<int>(data.cols()); }
    auto node_rows(int node) { return data.middleRows(node * seq_len, seq_len); }
    auto node_rows(int node) const { return data.middleRows(node * seq_len, seq_len); }
};

/// Bookkeeping needed to backpropagate through mean/max aggregation.
struct AggCache {
    std::vector<int> counts;     // per (node*seq_len + pos)
    std::vector<CellId> argmax;  // per ((node*seq_len + pos) * d + channel), -1 if empty
};

template <class T>
RowVec<T> aggregate_rank(const SimplicialComplex& X, const FeatureStore<T>& F,
                         NodeId node, int r, Aggregator agg = Aggregator::sum) {
    auto ids = X.cells_with_node(r, node);
    const int d = F.dim();
    RowVec<T> out = RowVec<T>::Zero(d);
    if (ids.empty()) return out;
    switch (agg) {
        case Aggregator::sum:
            for (CellId j : ids) out += F.h[r].row(j);
            break;
        case Aggregator::mean:
            for (CellId j : ids) out += F.h[r].row(j);
            out /= static_cast<T>(ids.size());
            break;
        case Aggregator::max:
            out = F.h[r].row(ids[0]);
            for (std::size_t k = 1; k < ids.size(); ++k) {
                out = out.cwiseMax(F.h[r].row(ids[k]));
            }
            break;
    }
    return out;
}

template <class T>
void check_store_matches(const SimplicialComplex& X, const FeatureStore<T>& F) {
    if (F.max_rank() != X.max_rank()) {
        raise(ErrorKind::shape_mismatch, "feature store rank count does not match complex");
    }
    for (int r = 0; r <= X.max_rank(); ++r) {
        if (F.h[r].rows() != X.num_cells(r)) {
            raise(ErrorKind::shape_mismatch,
                  "feature store rank " + std::to_string(r) + " has " +
                      std::to_string(F.h[r].rows()) + " rows, complex has " +
                      std::to_string(X.num_cells(r)) + " cells");
        }
        if (F.h[r].cols() != F.h[0].cols()) {
            raise(ErrorKind::shape_mismatch, "feature widths differ across ranks");
        }
    }
}

/// Assemble the raw (pre-normalization) per-node sequences, descending rank,
/// the node's own vector last.
template <class T>
SequenceBatch<T> build_sequences(const SimplicialComplex& X, const FeatureStore<T>& F,
                                 Aggregator agg = Aggregator::sum,
                                 AggCache* cache = nullptr) {
    check_store_matches(X, F);
    const int R = X.max_rank();
    const int P = R + 1;
    const int n = X.num_nodes();
    const int d = F.dim();

    SequenceBatch<T> S;
    S.n_nodes = n;
    S.seq_len = P;
    S.data.setZero(static_cast<Eigen::Index>(n) * P, d);
    if (cache) {
        cache->counts.assign(static_cast<std::size_t>(n) * P, 0);
        if (agg == Aggregator::max) {
            cache->argmax.assign(static_cast<std::size_t>(n) * P * d, CellId{-1});
        }
    }

    for (NodeId A = 0; A < n; ++A) {
        const Eigen::Index base = static_cast<Eigen::Index>(A) * P;
        for (int r = R; r >= 1; --r) {
            const int pos = R - r;
            auto ids = X.cells_with_node(r, A);
            if (cache) cache->counts[base + pos] = static_cast<int>(ids.size());
            if (ids.empty()) continue;
            auto row = S.data.row(base + pos);
            if (agg == Aggregator::max) {
                row = F.h[r].row(ids[0]);
                if (cache) {
                    for (int c = 0; c < d; ++c) {
                        cache->argmax[(base + pos) * d + c] = ids[0];
                    }
                }
                for (std::size_t k = 1; k < ids.size(); ++k) {
                    for (int c = 0; c < d; ++c) {
                        const T v = F.h[r](ids[k], c);
                        if (v > row(c)) {
                            row(c) = v;
                            if (cache) cache->argmax[(base + pos) * d + c] = ids[k];
                        }
                    }
                }
            } else {
                for (CellId j : ids) row += F.h[r].row(j);
                if (agg == Aggregator::mean) row /= static_cast<T>(ids.size());
            }
        }
        S.data.row(base + R) = F.h[0].row(A);
    }
    return S;
}

/// Scatter sequence cotangents back onto a feature store (reverse of
/// build_sequences). d_raw has the same layout as SequenceBatch::data.
template <class T>
FeatureStore<T> sequences_backward(const SimplicialComplex& X, const Mat<T>& d_raw,
                                   Aggregator agg, const AggCache* cache) {
    const int R = X.max_rank();
    const int P = R + 1;
    const int n = X.num_nodes();
    const int d = static_cast<int>(d_raw.cols());
    if (d_raw.rows() != static_cast<Eigen::Index>(n) * P) {
        raise(ErrorKind::shape_mismatch, "sequences_backward: bad row count");
    }
    FeatureStore<T> dF;
    dF.h.resize(R + 1);
    for (int r = 0; r <= R; ++r) dF.h[r].setZero(X.num_cells(r), d);

    for (NodeId A = 0; A < n; ++A) {
        const Eigen::Index base = static_cast<Eigen::Index>(A) * P;
        for (int r = R; r >= 1; --r) {
            const int pos = R - r;
            auto ids = X.cells_with_node(r, A);
            if (ids.empty()) continue;
            switch (agg) {
                case Aggregator::sum:
                    for (CellId j : ids) dF.h[r].row(j) += d_raw.row(base + pos);
                    break;
                case Aggregator::mean: {
                    const T inv = T(1) / static_cast<T>(cache->counts[base + pos]);
                    for (CellId j : ids) dF.h[r].row(j) += d_raw.row(base + pos) * inv;
                    break;
                }
                case Aggregator::max:
                    for (int c = 0; c < d; ++c) {
                        const CellId j = cache->argmax[(base + pos) * d + c];
                        if (j >= 0) dF.h[r](j, c) += d_raw(base + pos, c);
                    }
                    break;
            }
        }
        dF.h[0].row(A) += d_raw.row(base + R);
    }
    return dF;
}

// ---------------------------------------------------------------------------
// Row-wise layer normalization (each row is one sequence position).

inline constexpr double kLayerNormEps = 1e-5;

template <class T>
struct LayerNormParams {
    RowVec<T> gamma, beta;

    static LayerNormParams identity(int d) {
        LayerNormParams p;
        p.gamma = RowVec<T>::Ones(d);
        p.beta = RowVec<T>::Zero(d);
        return p;
    }
};

template <class T>
struct LayerNormCache {
    Mat<T> x;  // pre-normalization input
    std::vector<T> mean, inv_std;
};

template <class T>
Mat<T> layer_norm_rows(const Mat<T>& x, const LayerNormParams<T>& p,
                       LayerNormCache<T>* cache = nullptr) {
    const int d = static_cast<int>(x.cols());
    if (p.gamma.size() != d || p.beta.size() != d) {
        raise(ErrorKind::shape_mismatch, "layer_norm: parameter width mismatch");
    }
    const T eps = static_cast<T>(kLayerNormEps);
    Mat<T> out(x.rows(), d);
    if (cache) {
        cache->x = x;
        cache->mean.resize(x.rows());
        cache->inv_std.resize(x.rows());
    }
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const T mu = x.row(i).mean();
        const T var = (x.row(i).array() - mu).square().sum() / static_cast<T>(d);
        const T inv = T(1) / std::sqrt(var + eps);
        out.row(i) = (((x.row(i).array() - mu) * inv) * p.gamma.array() + p.beta.array()).matrix();
        if (cache) {
            cache->mean[i] = mu;
            cache->inv_std[i] = inv;
        }
    }
    return out;
}

template <class T>
Mat<T> layer_norm_rows_backward(const LayerNormCache<T>& c, const LayerNormParams<T>& p,
                                const Mat<T>& d_out, LayerNormParams<T>& grads) {
    const int d = static_cast<int>(c.x.cols());
    Mat<T> dx(c.x.rows(), d);
    for (Eigen::Index i = 0; i < c.x.rows(); ++i) {
        auto xhat = ((c.x.row(i).array() - c.mean[i]) * c.inv_std[i]).eval();
        auto g = (d_out.row(i).array() * p.gamma.array()).eval();
        const T g_mean = g.mean();
        const T gx_mean = (g * xhat).mean();
        dx.row(i) = (c.inv_std[i] * (g - g_mean - xhat * gx_mean)).matrix();
        grads.gamma.array() += d_out.row(i).array() * xhat;
        grads.beta.array() += d_out.row(i).array();
    }
    return dx;
}

}  // namespace scmamba

// Test-only reference implementations, kept deliberately naive and separate
// from the library code paths they are used to check.
#pragma once

#include "scmamba/common.hpp"
#include "scmamba/complex.hpp"
#include "scmamba/ssm.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracles {

using scmamba::Cell;
using scmamba::CellId;
using scmamba::NodeId;
using scmamba::SimplicialComplex;
using scmamba::SparseSigned;

// Dense int product of two sparse signed matrices (small instances only).
inline std::vector<std::vector<int>> sparse_product_dense(const SparseSigned& a,
                                                          const SparseSigned& b) {
    std::vector<std::vector<int>> A(a.rows, std::vector<int>(a.cols, 0));
    for (int j = 0; j < a.cols; ++j) {
        for (int k = a.col_ptr[j]; k < a.col_ptr[j + 1]; ++k) {
            A[a.row_idx[k]][j] = a.values[k];
        }
    }
    std::vector<std::vector<int>> B(b.rows, std::vector<int>(b.cols, 0));
    for (int j = 0; j < b.cols; ++j) {
        for (int k = b.col_ptr[j]; k < b.col_ptr[j + 1]; ++k) {
            B[b.row_idx[k]][j] = b.values[k];
        }
    }
    std::vector<std::vector<int>> C(a.rows, std::vector<int>(b.cols, 0));
    for (int i = 0; i < a.rows; ++i) {
        for (int j = 0; j < b.cols; ++j) {
            int s = 0;
            for (int k = 0; k < a.cols; ++k) s += A[i][k] * B[k][j];
            C[i][j] = s;
        }
    }
    return C;
}

// Brute-force closure check: every drop-one-vertex face of every cell exists.
inline bool closure_holds(const SimplicialComplex& X) {
    for (int r = 1; r <= X.max_rank(); ++r) {
        for (const Cell& c : X.cells(r)) {
            for (std::size_t i = 0; i < c.size(); ++i) {
                Cell face;
                for (std::size_t k = 0; k < c.size(); ++k) {
                    if (k != i) face.push_back(c[k]);
                }
                if (X.find_cell(r - 1, face) < 0) return false;
            }
        }
    }
    return true;
}

// Factorial lifting identity oracle: the expected feature of a rank-r cell is
// r! times the sum of its vertices' node features.
inline double factorial(int n) {
    double f = 1;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

// Central finite difference of a scalar function at x.
inline double central_diff(const std::function<double(double)>& f, double x,
                           double h = 1e-5) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline bool rel_close(double analytic, double fd, double rtol = 1e-4,
                      double floor_ = 1e-6) {
    double denom = std::max({std::abs(analytic), std::abs(fd), floor_});
    return std::abs(analytic - fd) / denom <= rtol;
}

// Pairwise ROC-AUC: concordant pairs count 1, ties 0.5.
inline double brute_force_auc(const std::vector<double>& scores,
                              const std::vector<int>& labels) {
    double num = 0;
    long pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[i] == 1 && labels[j] == 0) {
                ++pairs;
                if (scores[i] > scores[j]) num += 1.0;
                else if (scores[i] == scores[j]) num += 0.5;
            }
        }
    }
    return num / static_cast<double>(pairs);
}

// Naive step-by-step selective-scan recurrence with raw loops, independent of
// the library's vectorized path.
inline scmamba::MatD naive_selective_scan(const scmamba::SsmParams<double>& p,
                                          const scmamba::MatD& seq) {
    const int L = static_cast<int>(seq.rows());
    const int d = p.d;
    const int N = p.n_state;
    std::vector<std::vector<double>> h(d, std::vector<double>(N, 0.0));
    scmamba::MatD out(L, d);
    for (int t = 0; t < L; ++t) {
        std::vector<double> B(N, 0.0), C(N, 0.0);
        for (int n = 0; n < N; ++n) {
            for (int c = 0; c < d; ++c) {
                B[n] += p.W_B(n, c) * seq(t, c);
                C[n] += p.W_C(n, c) * seq(t, c);
            }
        }
        double z = p.b_dt(0, 0);
        for (int c = 0; c < d; ++c) z += p.w_dt(c) * seq(t, c);
        const double delta = z > 30 ? z : std::log1p(std::exp(z));
        for (int c = 0; c < d; ++c) {
            for (int n = 0; n < N; ++n) {
                const double A = -std::exp(p.A_log(c, n));
                h[c][n] = std::exp(delta * A) * h[c][n] + delta * B[n] * seq(t, c);
            }
        }
        for (int c = 0; c < d; ++c) {
            double y = 0;
            for (int n = 0; n < N; ++n) y += C[n] * h[c][n];
            y += p.D(c) * seq(t, c);
            double g = p.b_g(c);
            for (int cc = 0; cc < d; ++cc) g += p.W_g(c, cc) * seq(t, cc);
            const double sg = 1.0 / (1.0 + std::exp(-g));
            out(t, c) = y * (g * sg);
        }
    }
    return out;
}

// Random closure-complete complex: a handful of random tuples per rank fed
// through build_complex (which completes the closure).
inline SimplicialComplex random_complex(std::mt19937& rng, int max_nodes = 30,
                                        int max_rank = 3) {
    std::uniform_int_distribution<int> nd(4, max_nodes);
    std::uniform_int_distribution<int> rd(1, max_rank);
    const int n = nd(rng);
    const int R = rd(rng);
    std::vector<std::vector<Cell>> cells(R + 1);
    std::uniform_int_distribution<int> vd(0, n - 1);
    std::uniform_int_distribution<int> cd(1, 6);
    for (int r = 1; r <= R; ++r) {
        const int count = cd(rng);
        for (int c = 0; c < count; ++c) {
            std::vector<NodeId> verts;
            while (static_cast<int>(verts.size()) < r + 1) {
                NodeId v = vd(rng);
                if (std::find(verts.begin(), verts.end(), v) == verts.end()) {
                    verts.push_back(v);
                }
            }
            cells[r].push_back(verts);
        }
    }
    return scmamba::build_complex(n, std::move(cells));
}

}  // namespace oracles

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "scmamba/lifting.hpp"
#include "oracles.hpp"

#include <random>
#include <set>

using namespace scmamba;

namespace {

FeaturedGraph complete_graph(int n) {
    FeaturedGraph g;
    g.n_nodes = n;
    for (NodeId u = 0; u < n; ++u) {
        for (NodeId v = u + 1; v < n; ++v) g.edges.emplace_back(u, v);
    }
    g.node_features = MatD::Zero(n, 1);
    return g;
}

long binom(int n, int k) {
    if (k < 0 || k > n) return 0;
    long r = 1;
    for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
    return r;
}

}  // namespace

TEST_CASE("clique lift of K4 yields binomial counts per rank") {
    auto X = clique_lift(complete_graph(4), 3);
    CHECK(X.num_cells(0) == 4);
    CHECK(X.num_cells(1) == 6);
    CHECK(X.num_cells(2) == 4);
    CHECK(X.num_cells(3) == 1);
}

TEST_CASE("clique lift of complete graphs matches binomial coefficients") {
    for (int n = 3; n <= 8; ++n) {
        auto X = clique_lift(complete_graph(n), 3);
        for (int r = 1; r <= 3; ++r) {
            CHECK(X.num_cells(r) == binom(n, r + 1));
        }
    }
}

TEST_CASE("a path has no triangles") {
    FeaturedGraph g;
    g.n_nodes = 3;
    g.edges = {{0, 1}, {1, 2}};
    g.node_features = MatD::Zero(3, 1);
    auto X = clique_lift(g, 2);
    CHECK(X.num_cells(1) == 2);
    CHECK(X.num_cells(2) == 0);
    CHECK(X.max_rank() == 2);
}

TEST_CASE("rank-1 cells are exactly the input edges") {
    std::mt19937 rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        std::uniform_int_distribution<int> nd(5, 40);
        const int n = nd(rng);
        FeaturedGraph g;
        g.n_nodes = n;
        std::uniform_int_distribution<int> vd(0, n - 1);
        for (int e = 0; e < 3 * n; ++e) {
            NodeId u = vd(rng), v = vd(rng);
            if (u != v) g.edges.emplace_back(u, v);
        }
        g.node_features = MatD::Zero(n, 1);
        auto want = canonical_edges(n, g.edges);
        for (int R : {1, 2, 3}) {
            auto X = clique_lift(g, R);
            REQUIRE(X.num_cells(1) == static_cast<int>(want.size()));
            for (auto [u, v] : want) CHECK(X.find_cell(1, {u, v}) >= 0);
        }
    }
}

TEST_CASE("clique lift is invariant to edge ordering") {
    FeaturedGraph g;
    g.n_nodes = 5;
    g.edges = {{0, 1}, {1, 2}, {0, 2}, {2, 3}, {3, 4}, {2, 4}};
    g.node_features = MatD::Zero(5, 1);
    auto A = clique_lift(g, 2);
    std::reverse(g.edges.begin(), g.edges.end());
    for (auto& [u, v] : g.edges) std::swap(u, v);
    auto B = clique_lift(g, 2);
    for (int r = 0; r <= 2; ++r) {
        REQUIRE(A.num_cells(r) == B.num_cells(r));
        CHECK(A.cells(r) == B.cells(r));
    }
}

TEST_CASE("lifting the 1-skeleton again reproduces the structure") {
    std::mt19937 rng(23);
    for (int trial = 0; trial < 5; ++trial) {
        FeaturedGraph g;
        g.n_nodes = 15;
        std::uniform_int_distribution<int> vd(0, 14);
        for (int e = 0; e < 40; ++e) {
            NodeId u = vd(rng), v = vd(rng);
            if (u != v) g.edges.emplace_back(u, v);
        }
        g.node_features = MatD::Zero(15, 1);
        auto X = clique_lift(g, 3);
        FeaturedGraph skel;
        skel.n_nodes = X.num_nodes();
        for (const Cell& e : X.cells(1)) skel.edges.emplace_back(e[0], e[1]);
        skel.node_features = MatD::Zero(skel.n_nodes, 1);
        auto Y = clique_lift(skel, 3);
        for (int r = 0; r <= 3; ++r) CHECK(X.cells(r) == Y.cells(r));
    }
}

TEST_CASE("maximal cliques match a brute-force enumeration") {
    std::mt19937 rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 9;
        std::vector<std::pair<NodeId, NodeId>> edges;
        std::bernoulli_distribution ed(0.35);
        std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
        for (NodeId u = 0; u < n; ++u) {
            for (NodeId v = u + 1; v < n; ++v) {
                if (ed(rng)) {
                    edges.emplace_back(u, v);
                    adj[u][v] = adj[v][u] = true;
                }
            }
        }
        // brute force over all vertex subsets
        std::vector<Cell> want;
        for (unsigned mask = 1; mask < (1u << n); ++mask) {
            Cell c;
            for (int v = 0; v < n; ++v) {
                if (mask & (1u << v)) c.push_back(v);
            }
            bool clique = true;
            for (std::size_t i = 0; i < c.size() && clique; ++i) {
                for (std::size_t j = i + 1; j < c.size(); ++j) {
                    if (!adj[c[i]][c[j]]) {
                        clique = false;
                        break;
                    }
                }
            }
            if (!clique) continue;
            bool maximal = true;
            for (int v = 0; v < n && maximal; ++v) {
                if (mask & (1u << v)) continue;
                bool extends = true;
                for (NodeId u : c) {
                    if (!adj[u][v]) {
                        extends = false;
                        break;
                    }
                }
                if (extends) maximal = false;
            }
            if (maximal && c.size() >= 2) want.push_back(c);
        }
        std::sort(want.begin(), want.end());

        auto got = maximal_cliques(n, edges);
        std::erase_if(got, [](const Cell& c) { return c.size() < 2; });
        CHECK(got == want);
    }
}

TEST_CASE("clique size ceiling aborts the lift") {
    auto g = complete_graph(6);
    CliqueLiftOptions opts;
    opts.clique_size_ceiling = 5;
    CHECK_THROWS_WITH_AS(clique_lift(g, 3, opts),
                         doctest::Contains("clique of size 6"), Error);
}

TEST_CASE("canonical edges rejects self-loops") {
    CHECK_THROWS_AS(canonical_edges(5, {{4, 4}}), Error);
}

TEST_CASE("feature lift sums endpoint features along an edge") {
    auto X = build_complex(2, {{}, {{0, 1}}});
    MatD H0(2, 2);
    H0 << 1, 2, 3, 4;
    auto F = feature_lift(X, H0);
    CHECK(F.h[1](0, 0) == 4);
    CHECK(F.h[1](0, 1) == 6);
}

TEST_CASE("feature lift on K3 with unit scalar features") {
    auto X = build_complex(3, {{}, {}, {{0, 1, 2}}});
    MatD H0 = MatD::Ones(3, 1);
    auto F = feature_lift(X, H0);
    for (int j = 0; j < 3; ++j) CHECK(F.h[1](j, 0) == 2);
    CHECK(F.h[2](0, 0) == 6);
}

TEST_CASE("zero node features lift to zero everywhere") {
    auto X = build_complex(4, {{}, {}, {}, {{0, 1, 2, 3}}});
    MatD H0 = MatD::Zero(4, 3);
    auto F = feature_lift(X, H0);
    for (int r = 1; r <= 3; ++r) CHECK(F.h[r].cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("feature lift rejects mismatched shapes") {
    auto X = build_complex(3, {{}, {{0, 1}}});
    MatD bad = MatD::Zero(5, 2);
    CHECK_THROWS_AS(feature_lift(X, bad), Error);
}

TEST_CASE("lifted features equal rank factorial times the vertex sum") {
    std::mt19937 rng(29);
    std::uniform_int_distribution<int> fd(0, 8);
    for (int trial = 0; trial < 15; ++trial) {
        auto X = oracles::random_complex(rng, 50, 3);
        MatD H0(X.num_nodes(), 2);
        for (int i = 0; i < H0.rows(); ++i) {
            for (int j = 0; j < H0.cols(); ++j) H0(i, j) = fd(rng);
        }
        auto F = feature_lift(X, H0);
        for (int r = 1; r <= X.max_rank(); ++r) {
            const double rf = oracles::factorial(r);
            for (CellId j = 0; j < X.num_cells(r); ++j) {
                MatD want = MatD::Zero(1, 2);
                for (NodeId v : X.cells(r)[j]) want += H0.row(v);
                want *= rf;
                // integer-valued inputs keep both routes exact in doubles
                CHECK(F.h[r].row(j) == want.row(0));
            }
        }
    }
}

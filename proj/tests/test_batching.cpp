#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "scmamba/batching.hpp"
#include "scmamba/model.hpp"
#include "oracles.hpp"

#include <numeric>
#include <random>

using namespace scmamba;

namespace {

FeaturedGraph random_graph(int n, int m, std::mt19937& rng) {
    FeaturedGraph g;
    g.n_nodes = n;
    std::uniform_int_distribution<int> vd(0, n - 1);
    for (int e = 0; e < m; ++e) {
        NodeId u = vd(rng), v = vd(rng);
        if (u != v) g.edges.emplace_back(u, v);
    }
    g.node_features = MatD::Zero(n, 1);
    return g;
}

template <class T>
Mat<T> random_features(int n, int d, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Mat<T> m(n, d);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) m(i, j) = static_cast<T>(dist(rng));
    }
    return m;
}

}  // namespace

TEST_CASE("seeding every node reproduces the whole complex") {
    std::mt19937 rng(61);
    auto g = random_graph(12, 30, rng);
    auto X = clique_lift(g, 3);
    std::vector<NodeId> all(12);
    std::iota(all.begin(), all.end(), 0);
    auto batch = sample_subcomplex(X, all, 1);
    for (int r = 0; r <= 3; ++r) CHECK(batch.sub.cells(r) == X.cells(r));
    for (int v = 0; v < 12; ++v) CHECK(batch.local_to_global[v] == v);
}

TEST_CASE("one hop from a K4 corner captures the whole K4") {
    FeaturedGraph g;
    g.n_nodes = 4;
    g.edges = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
    g.node_features = MatD::Zero(4, 1);
    auto X = clique_lift(g, 3);
    auto batch = sample_subcomplex(X, {0}, 1);
    CHECK(batch.local_to_global.size() == 4);
    for (int r = 0; r <= 3; ++r) CHECK(batch.sub.cells(r) == X.cells(r));
}

TEST_CASE("one hop into a path keeps a single edge") {
    FeaturedGraph g;
    g.n_nodes = 3;
    g.edges = {{0, 1}, {1, 2}};
    g.node_features = MatD::Zero(3, 1);
    auto X = clique_lift(g, 2);
    auto batch = sample_subcomplex(X, {0}, 1);
    CHECK(batch.local_to_global == std::vector<NodeId>{0, 1});
    CHECK(batch.sub.num_cells(1) == 1);
    CHECK(batch.sub.num_cells(2) == 0);
}

TEST_CASE("empty seed sets are rejected by both samplers") {
    auto X = build_complex(4, {{}, {{0, 1}}});
    CHECK_THROWS_AS(sample_subcomplex(X, {}, 1), Error);
    CHECK_THROWS_AS(per_rank_prune(X, {}, 1), Error);
}

TEST_CASE("per-rank pruning produces the identical subcomplex") {
    std::mt19937 rng(67);
    for (int trial = 0; trial < 20; ++trial) {
        auto g = random_graph(20, 45, rng);
        auto X = clique_lift(g, 3);
        std::uniform_int_distribution<int> sd(0, 19);
        std::vector<NodeId> seeds = {static_cast<NodeId>(sd(rng)), static_cast<NodeId>(sd(rng))};
        std::uniform_int_distribution<int> hd(1, 3);
        const int hops = hd(rng);
        auto a = sample_subcomplex(X, seeds, hops);
        auto b = per_rank_prune(X, seeds, hops);
        CHECK(a.local_to_global == b.local_to_global);
        CHECK(batch_cells_global(a) == batch_cells_global(b));
    }
}

TEST_CASE("seed rows of a one-block model match the full forward") {
    std::mt19937 rng(71);
    for (int trial = 0; trial < 8; ++trial) {
        auto g = random_graph(15, 35, rng);
        auto X = clique_lift(g, 2);
        ModelConfig cfg;
        cfg.d_in = 3;
        cfg.d_h = 6;
        cfg.d_out = 2;
        cfg.n_blocks = 1;
        cfg.state_size = 3;
        cfg.max_rank = 2;
        cfg.dropout = 0;
        auto m = model_init<float>(cfg, 100 + trial);
        MatF H = random_features<float>(15, 3, 200 + trial);
        MatF full = model_forward(m, X, H);

        std::uniform_int_distribution<int> sd(0, 14);
        std::vector<NodeId> seeds = {static_cast<NodeId>(sd(rng)),
                                     static_cast<NodeId>(sd(rng)),
                                     static_cast<NodeId>(sd(rng))};
        auto batch = sample_subcomplex(X, seeds, 1);
        MatF Hs(batch.local_to_global.size(), 3);
        for (std::size_t i = 0; i < batch.local_to_global.size(); ++i) {
            Hs.row(i) = H.row(batch.local_to_global[i]);
        }
        MatF sub = model_forward(m, batch.sub, Hs);
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            CHECK((sub.row(batch.seed_local[i]) - full.row(seeds[i])).cwiseAbs().maxCoeff() <=
                  1e-6f);
        }
    }
}

TEST_CASE("hops equal to the block count keeps multi-block models exact") {
    std::mt19937 rng(73);
    for (int L : {2, 3}) {
        auto g = random_graph(14, 30, rng);
        auto X = clique_lift(g, 2);
        ModelConfig cfg;
        cfg.d_in = 2;
        cfg.d_h = 6;
        cfg.d_out = 2;
        cfg.n_blocks = L;
        cfg.state_size = 3;
        cfg.max_rank = 2;
        cfg.dropout = 0;
        auto md = model_init<double>(cfg, 300 + L);
        MatD H = random_features<double>(14, 2, 400 + L);
        MatD full = model_forward(md, X, H);

        std::vector<NodeId> seeds = {1, 7};
        auto batch = sample_subcomplex(X, seeds, L);
        MatD Hs(batch.local_to_global.size(), 2);
        for (std::size_t i = 0; i < batch.local_to_global.size(); ++i) {
            Hs.row(i) = H.row(batch.local_to_global[i]);
        }
        MatD sub = model_forward(md, batch.sub, Hs);
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            CHECK((sub.row(batch.seed_local[i]) - full.row(seeds[i])).cwiseAbs().maxCoeff() <=
                  1e-12);
        }
    }
}

TEST_CASE("partitioning the nodes into batches covers the full-batch output") {
    std::mt19937 rng(79);
    auto g = random_graph(17, 40, rng);
    auto X = clique_lift(g, 2);
    ModelConfig cfg;
    cfg.d_in = 2;
    cfg.d_h = 5;
    cfg.d_out = 3;
    cfg.n_blocks = 2;
    cfg.state_size = 2;
    cfg.max_rank = 2;
    cfg.dropout = 0;
    auto m = model_init<float>(cfg, 83);
    MatF H = random_features<float>(17, 2, 84);
    MatF full = model_forward(m, X, H);

    std::vector<NodeId> order(17);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    MatF stitched(17, 3);
    for (std::size_t start = 0; start < order.size(); start += 5) {
        std::vector<NodeId> seeds(order.begin() + start,
                                  order.begin() + std::min(order.size(), start + 5));
        auto batch = sample_subcomplex(X, seeds, cfg.n_blocks);
        MatF Hs(batch.local_to_global.size(), 2);
        for (std::size_t i = 0; i < batch.local_to_global.size(); ++i) {
            Hs.row(i) = H.row(batch.local_to_global[i]);
        }
        MatF sub = model_forward(m, batch.sub, Hs);
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            stitched.row(seeds[i]) = sub.row(batch.seed_local[i]);
        }
    }
    CHECK((stitched - full).cwiseAbs().maxCoeff() <= 1e-6f);
}

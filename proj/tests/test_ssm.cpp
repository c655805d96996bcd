#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "scmamba/ssm.hpp"
#include "oracles.hpp"

#include <random>

using namespace scmamba;

namespace {

SsmParams<double> random_ssm(int d, int N, unsigned seed) {
    std::mt19937 rng(seed);
    return ssm_init<double>(d, N, rng);
}

MatD random_mat(int r, int c, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    MatD m(r, c);
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) m(i, j) = dist(rng);
    }
    return m;
}

}  // namespace

TEST_CASE("all-zero input yields all-zero output") {
    auto p = random_ssm(4, 3, 1);
    MatD seq = MatD::Zero(5, 4);
    auto out = selective_scan(p, seq);
    CHECK(out.cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("single-step scan matches the hand-unrolled recurrence") {
    const int d = 3, N = 2;
    auto p = random_ssm(d, N, 2);
    MatD seq = random_mat(1, d, 3);
    auto out = selective_scan(p, seq);

    for (int c = 0; c < d; ++c) {
        double z = p.b_dt(0, 0);
        for (int j = 0; j < d; ++j) z += p.w_dt(j) * seq(0, j);
        const double delta = std::log1p(std::exp(z));
        double y = 0;
        for (int n = 0; n < N; ++n) {
            double B = 0, C = 0;
            for (int j = 0; j < d; ++j) {
                B += p.W_B(n, j) * seq(0, j);
                C += p.W_C(n, j) * seq(0, j);
            }
            y += C * delta * B * seq(0, c);  // h_1 = delta * B ⊗ x
        }
        y += p.D(c) * seq(0, c);
        double g = p.b_g(c);
        for (int j = 0; j < d; ++j) g += p.W_g(c, j) * seq(0, j);
        const double expect = y * g / (1.0 + std::exp(-g));
        CHECK(out(0, c) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("vectorized scan equals the naive recurrence oracle") {
    std::mt19937 rng(5);
    std::uniform_int_distribution<int> Ld(1, 16), dd(1, 8), Nd(1, 4);
    for (int trial = 0; trial < 50; ++trial) {
        const int L = Ld(rng), d = dd(rng), N = Nd(rng);
        auto p = ssm_init<double>(d, N, rng);
        MatD seq = 2.0 * MatD::Random(L, d);
        auto got = selective_scan(p, seq);
        auto want = oracles::naive_selective_scan(p, seq);
        CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("scan output at position t ignores later inputs") {
    auto p = random_ssm(5, 3, 7);
    MatD seq = random_mat(6, 5, 8);
    auto base = selective_scan(p, seq);
    MatD mod = seq;
    mod.row(4).setConstant(9.0);
    mod.row(5).setConstant(-3.0);
    auto out = selective_scan(p, mod);
    for (int t = 0; t < 4; ++t) CHECK(out.row(t) == base.row(t));
    CHECK(out.row(4) != base.row(4));
}

TEST_CASE("state decay factors stay strictly inside the unit interval") {
    auto p = random_ssm(6, 4, 9);
    MatD A = p.transition();
    CHECK((A.array() < 0.0).all());
    for (double delta : {1e-4, 0.1, 1.0, 25.0}) {
        MatD abar = (delta * A.array()).exp().matrix();
        CHECK((abar.array() > 0.0).all());
        CHECK((abar.array() < 1.0).all());
    }
}

TEST_CASE("zero upstream produces zero gradients") {
    auto p = random_ssm(3, 2, 11);
    MatD seq = random_mat(4, 3, 12);
    MatD up = MatD::Zero(4, 3);
    auto g = selective_scan_grad(p, seq, up);
    CHECK(g.input.cwiseAbs().maxCoeff() == 0);
    std::vector<ParamView<double>> views;
    auto q = g.params;
    collect_params(q, "ssm", views);
    for (auto& v : views) {
        for (std::ptrdiff_t i = 0; i < v.size; ++i) CHECK(v.data[i] == 0);
    }
}

TEST_CASE("scan gradients match central finite differences for every tensor") {
    const int L = 5, d = 4, N = 3;
    auto p = random_ssm(d, N, 13);
    MatD seq = random_mat(L, d, 14);
    MatD w = random_mat(L, d, 15);  // loss = sum(w .* scan(seq))

    auto g = selective_scan_grad(p, seq, w);

    auto loss_with = [&](const SsmParams<double>& q, const MatD& s) {
        return (w.array() * selective_scan(q, s).array()).sum();
    };
    const double h = 1e-5;

    std::vector<ParamView<double>> views, gviews;
    collect_params(p, "ssm", views);
    collect_params(g.params, "ssm", gviews);
    for (std::size_t k = 0; k < views.size(); ++k) {
        for (std::ptrdiff_t i = 0; i < views[k].size; ++i) {
            const double keep = views[k].data[i];
            views[k].data[i] = keep + h;
            const double lp = loss_with(p, seq);
            views[k].data[i] = keep - h;
            const double lm = loss_with(p, seq);
            views[k].data[i] = keep;
            const double fd = (lp - lm) / (2 * h);
            INFO(views[k].name, "[", i, "]");
            CHECK(oracles::rel_close(gviews[k].data[i], fd));
        }
    }
    for (int t = 0; t < L; ++t) {
        for (int c = 0; c < d; ++c) {
            MatD sp = seq, sm = seq;
            sp(t, c) += h;
            sm(t, c) -= h;
            const double fd = (loss_with(p, sp) - loss_with(p, sm)) / (2 * h);
            CHECK(oracles::rel_close(g.input(t, c), fd));
        }
    }
}

TEST_CASE("input gradients are causal") {
    const int L = 6, d = 3, N = 2;
    auto p = random_ssm(d, N, 17);
    MatD seq = random_mat(L, d, 18);
    // upstream supported only on positions before t = 3
    MatD w = MatD::Zero(L, d);
    w.topRows(3) = random_mat(3, d, 19);
    auto g = selective_scan_grad(p, seq, w);
    for (int t = 3; t < L; ++t) CHECK(g.input.row(t).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("non-finite intermediates raise a numeric error naming the step") {
    auto p = random_ssm(3, 2, 99);
    MatD seq = MatD::Zero(3, 3);
    seq(1, 0) = 1e308;
    seq(1, 1) = 1e308;
    try {
        selective_scan(p, seq);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::numeric);
        CHECK(std::string(e.what()).find("position") != std::string::npos);
    }
}

TEST_CASE("scan and block reject mismatched widths") {
    auto p = random_ssm(3, 2, 98);
    MatD seq = random_mat(4, 5, 97);
    CHECK_THROWS_AS(selective_scan(p, seq), Error);

    BlockParams<double> bp;
    bp.ln = LayerNormParams<double>::identity(3);
    bp.fwd_ssm = random_ssm(3, 2, 96);
    bp.bwd_ssm = random_ssm(3, 2, 95);
    SequenceBatch<double> S;
    S.n_nodes = 2;
    S.seq_len = 2;
    S.data = random_mat(4, 3, 94);
    MatD H0 = random_mat(2, 4, 93);  // wrong width
    CHECK_THROWS_AS(mamba_block(bp, S, H0, BlockFlags{}), Error);
}

TEST_CASE("gru: zero input and zero parameters give zero output") {
    auto p = GruParams<double>::zeros(4);
    MatD seq = MatD::Zero(3, 4);
    auto out = gru_scan(p, seq);
    CHECK(out.cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("gru single step matches the hand-unrolled update") {
    const int d = 3;
    std::mt19937 rng(21);
    auto p = gru_init<double>(d, rng);
    MatD seq = random_mat(1, d, 22);
    auto out = gru_scan(p, seq);
    for (int c = 0; c < d; ++c) {
        double az = p.b_z(c), ar = p.b_r(c), ah = p.b_h(c);
        for (int j = 0; j < d; ++j) {
            az += p.W_z(c, j) * seq(0, j);
            ar += p.W_r(c, j) * seq(0, j);
            ah += p.W_h(c, j) * seq(0, j);  // h_0 = 0, so U terms vanish
        }
        (void)ar;
        const double z = 1.0 / (1.0 + std::exp(-az));
        const double cand = std::tanh(ah);
        CHECK(out(0, c) == doctest::Approx(z * cand).epsilon(1e-12));
    }
}

TEST_CASE("gru gradients match central finite differences") {
    const int L = 4, d = 3;
    std::mt19937 rng(23);
    auto p = gru_init<double>(d, rng);
    MatD seq = random_mat(L, d, 24);
    MatD w = random_mat(L, d, 25);

    auto g = gru_scan_grad(p, seq, w);
    auto loss_with = [&](const GruParams<double>& q, const MatD& s) {
        return (w.array() * gru_scan(q, s).array()).sum();
    };
    const double h = 1e-5;
    std::vector<ParamView<double>> views, gviews;
    collect_params(p, "gru", views);
    collect_params(g.params, "gru", gviews);
    for (std::size_t k = 0; k < views.size(); ++k) {
        for (std::ptrdiff_t i = 0; i < views[k].size; ++i) {
            const double keep = views[k].data[i];
            views[k].data[i] = keep + h;
            const double lp = loss_with(p, seq);
            views[k].data[i] = keep - h;
            const double lm = loss_with(p, seq);
            views[k].data[i] = keep;
            INFO(views[k].name, "[", i, "]");
            CHECK(oracles::rel_close(gviews[k].data[i], (lp - lm) / (2 * h)));
        }
    }
    for (int t = 0; t < L; ++t) {
        for (int c = 0; c < d; ++c) {
            MatD sp = seq, sm = seq;
            sp(t, c) += h;
            sm(t, c) -= h;
            const double fd = (loss_with(p, sp) - loss_with(p, sm)) / (2 * h);
            CHECK(oracles::rel_close(g.input(t, c), fd));
        }
    }
}

TEST_CASE("block with zeroed scans is the identity on node features") {
    const int d = 4, N = 2, n = 5, P = 3;
    BlockParams<double> p;
    p.ln = LayerNormParams<double>::identity(d);
    p.fwd_ssm = SsmParams<double>::zeros(d, N);  // zero C, D and gate weights
    p.bwd_ssm = SsmParams<double>::zeros(d, N);
    SequenceBatch<double> S;
    S.n_nodes = n;
    S.seq_len = P;
    S.data = random_mat(n * P, d, 27);
    MatD H0 = random_mat(n, d, 28);
    auto out = mamba_block(p, S, H0, BlockFlags{});
    CHECK((out - H0).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("disabling the backward scan leaves only the forward pass") {
    const int d = 3, N = 2, P = 4;
    std::mt19937 rng(29);
    BlockParams<double> p;
    p.ln = LayerNormParams<double>::identity(d);
    p.fwd_ssm = ssm_init<double>(d, N, rng);
    p.bwd_ssm = ssm_init<double>(d, N, rng);
    MatD seq = random_mat(P, d, 30);
    BlockFlags off;
    off.use_backward_scan = false;
    auto fused = bidirectional_fused(p, seq, off);
    auto fwd_only = selective_scan(p.fwd_ssm, seq);
    CHECK((fused - fwd_only).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("block output permutes with its node inputs") {
    const int d = 3, N = 2, n = 6, P = 3;
    std::mt19937 rng(31);
    BlockParams<double> p;
    p.ln = LayerNormParams<double>::identity(d);
    p.fwd_ssm = ssm_init<double>(d, N, rng);
    p.bwd_ssm = ssm_init<double>(d, N, rng);
    SequenceBatch<double> S;
    S.n_nodes = n;
    S.seq_len = P;
    S.data = random_mat(n * P, d, 32);
    MatD H0 = random_mat(n, d, 33);
    auto base = mamba_block(p, S, H0, BlockFlags{});

    std::vector<int> perm{3, 1, 5, 0, 2, 4};
    SequenceBatch<double> Sp;
    Sp.n_nodes = n;
    Sp.seq_len = P;
    Sp.data.resize(n * P, d);
    MatD H0p(n, d);
    for (int v = 0; v < n; ++v) {
        Sp.node_rows(perm[v]) = S.node_rows(v);
        H0p.row(perm[v]) = H0.row(v);
    }
    auto out = mamba_block(p, Sp, H0p, BlockFlags{});
    for (int v = 0; v < n; ++v) CHECK(out.row(perm[v]) == base.row(v));
}

TEST_CASE("backward scan lets the node position influence higher ranks") {
    const int d = 3, N = 2, P = 4;
    std::mt19937 rng(37);
    BlockParams<double> p;
    p.ln = LayerNormParams<double>::identity(d);
    p.fwd_ssm = ssm_init<double>(d, N, rng);
    p.bwd_ssm = ssm_init<double>(d, N, rng);
    MatD seq = random_mat(P, d, 38);
    MatD pert = seq;
    pert.row(P - 1).array() += 0.5;  // the node's own position

    BlockFlags both;
    auto f1 = bidirectional_fused(p, seq, both);
    auto f2 = bidirectional_fused(p, pert, both);
    CHECK((f1.topRows(P - 1) - f2.topRows(P - 1)).cwiseAbs().maxCoeff() > 1e-8);

    BlockFlags fwd_only;
    fwd_only.use_backward_scan = false;
    auto g1 = bidirectional_fused(p, seq, fwd_only);
    auto g2 = bidirectional_fused(p, pert, fwd_only);
    CHECK((g1.topRows(P - 1) - g2.topRows(P - 1)).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("block node update equals skip plus the summed fused sequence") {
    const int d = 4, N = 3, n = 5, P = 3;
    std::mt19937 rng(81);
    BlockParams<double> p;
    p.ln = LayerNormParams<double>::identity(d);
    p.fwd_ssm = ssm_init<double>(d, N, rng);
    p.bwd_ssm = ssm_init<double>(d, N, rng);
    SequenceBatch<double> S;
    S.n_nodes = n;
    S.seq_len = P;
    S.data = random_mat(n * P, d, 82);
    MatD H0 = random_mat(n, d, 83);
    for (bool use_bwd : {true, false}) {
        BlockFlags flags;
        flags.use_backward_scan = use_bwd;
        MatD out = mamba_block(p, S, H0, flags);
        for (int v = 0; v < n; ++v) {
            MatD seq = S.node_rows(v);
            MatD fused = bidirectional_fused(p, seq, flags);
            RowVec<double> want = H0.row(v) + fused.colwise().sum();
            CHECK((out.row(v) - want).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}

TEST_CASE("block backward gradients match finite differences") {
    const int d = 3, N = 2, n = 4, P = 3;
    std::mt19937 rng(39);
    for (Backbone bb : {Backbone::ssm, Backbone::gru}) {
        for (bool use_bwd : {true, false}) {
            BlockParams<double> p;
            p.ln = LayerNormParams<double>::identity(d);
            if (bb == Backbone::ssm) {
                p.fwd_ssm = ssm_init<double>(d, N, rng);
                p.bwd_ssm = ssm_init<double>(d, N, rng);
            } else {
                p.fwd_gru = gru_init<double>(d, rng);
                p.bwd_gru = gru_init<double>(d, rng);
            }
            BlockFlags flags;
            flags.backbone = bb;
            flags.use_backward_scan = use_bwd;

            SequenceBatch<double> S;
            S.n_nodes = n;
            S.seq_len = P;
            S.data = random_mat(n * P, d, 40 + static_cast<int>(bb));
            MatD H0 = random_mat(n, d, 44);
            MatD w = random_mat(n, d, 45);

            BlockParams<double> grads;
            grads.ln = LayerNormParams<double>::identity(d);
            grads.ln.gamma.setZero();
            grads.ln.beta.setZero();
            grads.fwd_ssm = SsmParams<double>::zeros(d, N);
            grads.bwd_ssm = SsmParams<double>::zeros(d, N);
            grads.fwd_gru = GruParams<double>::zeros(d);
            grads.bwd_gru = GruParams<double>::zeros(d);
            MatD dH0 = MatD::Zero(n, d);
            MatD dS = mamba_block_backward(p, S, w, flags, grads, dH0);

            auto loss_with = [&](const BlockParams<double>& q, const SequenceBatch<double>& SS,
                                 const MatD& HH) {
                return (w.array() * mamba_block(q, SS, HH, flags).array()).sum();
            };
            const double h = 1e-5;

            std::vector<ParamView<double>> views, gviews;
            if (bb == Backbone::ssm) {
                collect_params(p.fwd_ssm, "f", views);
                collect_params(grads.fwd_ssm, "f", gviews);
                if (use_bwd) {
                    collect_params(p.bwd_ssm, "b", views);
                    collect_params(grads.bwd_ssm, "b", gviews);
                }
            } else {
                collect_params(p.fwd_gru, "f", views);
                collect_params(grads.fwd_gru, "f", gviews);
                if (use_bwd) {
                    collect_params(p.bwd_gru, "b", views);
                    collect_params(grads.bwd_gru, "b", gviews);
                }
            }
            for (std::size_t k = 0; k < views.size(); ++k) {
                for (std::ptrdiff_t i = 0; i < views[k].size; i += 3) {
                    const double keep = views[k].data[i];
                    views[k].data[i] = keep + h;
                    const double lp = loss_with(p, S, H0);
                    views[k].data[i] = keep - h;
                    const double lm = loss_with(p, S, H0);
                    views[k].data[i] = keep;
                    INFO(views[k].name, "[", i, "]");
                    CHECK(oracles::rel_close(gviews[k].data[i], (lp - lm) / (2 * h)));
                }
            }
            for (int t = 0; t < n * P; t += 2) {
                for (int c = 0; c < d; ++c) {
                    SequenceBatch<double> Sp = S, Sm = S;
                    Sp.data(t, c) += h;
                    Sm.data(t, c) -= h;
                    const double fd = (loss_with(p, Sp, H0) - loss_with(p, Sm, H0)) / (2 * h);
                    CHECK(oracles::rel_close(dS(t, c), fd));
                }
            }
            for (int v = 0; v < n; ++v) {
                for (int c = 0; c < d; ++c) {
                    MatD Hp = H0, Hm = H0;
                    Hp(v, c) += h;
                    Hm(v, c) -= h;
                    const double fd = (loss_with(p, S, Hp) - loss_with(p, S, Hm)) / (2 * h);
                    CHECK(oracles::rel_close(dH0(v, c), fd));
                }
            }
        }
    }
}

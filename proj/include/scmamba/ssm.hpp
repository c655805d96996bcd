#pragma once

#include "scmamba/sequencer.hpp"

#include <cmath>
#include <random>

namespace scmamba {

template <class T>
T stable_sigmoid(T z) {
    if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
    const T e = std::exp(z);
    return e / (T(1) + e);
}

template <class T>
T softplus(T z) {
    return z > T(30) ? z : std::log1p(std::exp(z));
}

/// Parameters of one selective-scan layer. The diagonal state transition is
/// A = -exp(A_log) (strictly negative, so exp(delta*A) stays inside the unit
/// interval for every positive step size). B_t, C_t and the scalar step
/// delta_t are input-dependent projections of the current token; D is a
/// per-channel skip gain and W_g/b_g feed the elementwise SiLU gate.
template <class T>
struct SsmParams {
    int d = 0;
    int n_state = 0;
    Mat<T> A_log;    // d x N
    Mat<T> W_B;      // N x d
    Mat<T> W_C;      // N x d
    RowVec<T> w_dt;  // 1 x d
    Mat<T> b_dt;     // 1 x 1
    RowVec<T> D;     // 1 x d
    Mat<T> W_g;      // d x d
    RowVec<T> b_g;   // 1 x d

    Mat<T> transition() const { return (-A_log.array().exp()).matrix(); }

    static SsmParams zeros(int d, int n_state) {
        SsmParams p;
        p.d = d;
        p.n_state = n_state;
        p.A_log = Mat<T>::Zero(d, n_state);
        p.W_B = Mat<T>::Zero(n_state, d);
        p.W_C = Mat<T>::Zero(n_state, d);
        p.w_dt = RowVec<T>::Zero(d);
        p.b_dt = Mat<T>::Zero(1, 1);
        p.D = RowVec<T>::Zero(d);
        p.W_g = Mat<T>::Zero(d, d);
        p.b_g = RowVec<T>::Zero(d);
        return p;
    }
};

template <class T>
void fill_uniform(Mat<T>& m, double scale, std::mt19937& rng) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<T>(dist(rng));
    }
}

template <class T>
void fill_uniform(RowVec<T>& v, double scale, std::mt19937& rng) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = static_cast<T>(dist(rng));
}

/// A initialized to -(1..N) per channel, D to ones, projections uniform in
/// +-sqrt(1/fan_in), biases zero.
template <class T>
SsmParams<T> ssm_init(int d, int n_state, std::mt19937& rng) {
    SsmParams<T> p = SsmParams<T>::zeros(d, n_state);
    for (int c = 0; c < d; ++c) {
        for (int n = 0; n < n_state; ++n) {
            p.A_log(c, n) = static_cast<T>(std::log(static_cast<double>(n + 1)));
        }
    }
    const double s = std::sqrt(1.0 / d);
    fill_uniform(p.W_B, s, rng);
    fill_uniform(p.W_C, s, rng);
    fill_uniform(p.w_dt, s, rng);
    p.D = RowVec<T>::Ones(d);
    fill_uniform(p.W_g, s, rng);
    return p;
}

/// Per-token input projections, computable for a whole batch of sequences in
/// four matrix products.
template <class T>
struct SsmProjections {
    Mat<T> B;         // L x N
    Mat<T> C;         // L x N
    Mat<T> gate_pre;  // L x d
    Mat<T> z_raw;     // L x 1
    Mat<T> delta;     // L x 1
};

template <class T>
SsmProjections<T> ssm_project(const SsmParams<T>& p, const Mat<T>& tokens) {
    if (tokens.cols() != p.d) {
        raise(ErrorKind::shape_mismatch,
              "selective_scan: token width " + std::to_string(tokens.cols()) +
                  " does not match layer width " + std::to_string(p.d));
    }
    SsmProjections<T> proj;
    proj.B = tokens * p.W_B.transpose();
    proj.C = tokens * p.W_C.transpose();
    proj.gate_pre = (tokens * p.W_g.transpose()).rowwise() + p.b_g;
    proj.z_raw = tokens * p.w_dt.transpose();
    proj.z_raw.array() += p.b_dt(0, 0);
    proj.delta = proj.z_raw.unaryExpr([](T z) { return softplus(z); });
    return proj;
}

/// Token-space gradient buffers accumulated across sequences of one batch and
/// turned into parameter gradients by a handful of matrix products.
template <class T>
struct SsmBackwardBuffers {
    Mat<T> dB, dC, dGatePre, dZraw;
    Mat<T> dA;   // d x N (w.r.t. A itself, mapped onto A_log at finalize)
    RowVec<T> dD;

    void init(Eigen::Index rows, int d, int n_state) {
        dB.setZero(rows, n_state);
        dC.setZero(rows, n_state);
        dGatePre.setZero(rows, d);
        dZraw.setZero(rows, 1);
        dA.setZero(d, n_state);
        dD.setZero(d);
    }
};

/// Reusable per-sequence scratch space. Buffers are only resized here; every
/// consumer writes before it reads.
template <class T>
struct SsmWorkspace {
    std::vector<Mat<T>> hs;  // recurrent state after each step
    Mat<T> ypre;             // pre-gate outputs, processing order
    Mat<T> dy;
    Mat<T> scratch_out;
    Mat<T> h, abar, dh, dAbar;

    void ensure(int len, int d, int n_state) {
        if (static_cast<int>(hs.size()) < len) hs.resize(len);
        for (int k = 0; k < len; ++k) hs[k].resize(d, n_state);
        ypre.resize(len, d);
        dy.resize(len, d);
        scratch_out.resize(len, d);
        h.resize(d, n_state);
        abar.resize(d, n_state);
        dh.resize(d, n_state);
        dAbar.resize(d, n_state);
    }
};

namespace detail {

template <class T>
inline RowVec<T> silu_row(const RowVec<T>& g) {
    return g.unaryExpr([](T z) { return z * stable_sigmoid(z); });
}

}  // namespace detail

/// One selective scan over tokens rows [base, base+len). Processing order is
/// ascending token index, or descending when reversed; outputs land at
/// out rows [out_base, out_base+len) in processing order. When keep_states is
/// set, the per-step states and pre-gate outputs stay in the workspace for a
/// following backward sweep.
template <class T>
void ssm_scan_seq(const SsmParams<T>& p, const Mat<T>& A, const Mat<T>& tokens,
                  const SsmProjections<T>& proj, Eigen::Index base, int len,
                  bool reversed, Mat<T>& out, Eigen::Index out_base,
                  SsmWorkspace<T>& ws, bool keep_states = false) {
    const int d = p.d;
    const int N = p.n_state;
    ws.ensure(len, d, N);
    ws.h.setZero(d, N);
    for (int k = 0; k < len; ++k) {
        const Eigen::Index t = reversed ? base + len - 1 - k : base + k;
        const T delta = proj.delta(t, 0);
        if (!std::isfinite(delta)) {
            raise(ErrorKind::numeric,
                  "selective_scan: non-finite step size at position " + std::to_string(k));
        }
        ws.abar = (delta * A.array()).exp().matrix();
        ws.h = (ws.abar.array() * ws.h.array()).matrix() +
               (delta * tokens.row(t).transpose()) * proj.B.row(t);
        RowVec<T> ypre = (ws.h * proj.C.row(t).transpose()).transpose() +
                         p.D.cwiseProduct(tokens.row(t));
        RowVec<T> gated = ypre.cwiseProduct(detail::silu_row<T>(proj.gate_pre.row(t)));
        if (!gated.allFinite()) {
            raise(ErrorKind::numeric,
                  "selective_scan: non-finite output at position " + std::to_string(k));
        }
        out.row(out_base + k) = gated;
        if (keep_states) {
            ws.hs[k] = ws.h;
            ws.ypre.row(k) = ypre;
        }
    }
}

/// Reverse sweep matching ssm_scan_seq. d_out rows are in processing order.
/// Accumulates token-space gradients into bufs and direct (D-skip and
/// recurrence) input gradients into d_tokens.
template <class T>
void ssm_scan_seq_backward(const SsmParams<T>& p, const Mat<T>& A, const Mat<T>& tokens,
                           const SsmProjections<T>& proj, Eigen::Index base, int len,
                           bool reversed, const Mat<T>& d_out, Eigen::Index dout_base,
                           SsmBackwardBuffers<T>& bufs, Mat<T>& d_tokens,
                           SsmWorkspace<T>& ws) {
    const int d = p.d;
    const int N = p.n_state;
    // forward recompute, retaining states
    ssm_scan_seq(p, A, tokens, proj, base, len, reversed, ws.scratch_out, 0, ws, true);

    for (int k = 0; k < len; ++k) {
        const Eigen::Index t = reversed ? base + len - 1 - k : base + k;
        const RowVec<T> gpre = proj.gate_pre.row(t);
        RowVec<T> sig = gpre.unaryExpr([](T z) { return stable_sigmoid(z); });
        RowVec<T> silu = gpre.cwiseProduct(sig);
        ws.dy.row(k) = d_out.row(dout_base + k).cwiseProduct(silu);
        // silu'(g) = sig * (1 + g * (1 - sig))
        RowVec<T> silu_p =
            (sig.array() * (T(1) + gpre.array() * (T(1) - sig.array()))).matrix();
        bufs.dGatePre.row(t) +=
            d_out.row(dout_base + k).cwiseProduct(ws.ypre.row(k)).cwiseProduct(silu_p);
    }

    ws.dh.setZero(d, N);
    for (int k = len - 1; k >= 0; --k) {
        const Eigen::Index t = reversed ? base + len - 1 - k : base + k;
        const T delta = proj.delta(t, 0);
        ws.abar = (delta * A.array()).exp().matrix();

        // output stage: ypre = h * C^T + D .* x
        ws.dh += ws.dy.row(k).transpose() * proj.C.row(t);
        bufs.dC.row(t) += ws.dy.row(k) * ws.hs[k];
        bufs.dD += ws.dy.row(k).cwiseProduct(tokens.row(t));
        d_tokens.row(t) += ws.dy.row(k).cwiseProduct(p.D);

        // recurrence stage: h_k = abar .* h_{k-1} + delta * x ⊗ B
        T ddelta = 0;
        if (k > 0) {
            ws.dAbar = (ws.dh.array() * ws.hs[k - 1].array()).matrix();
            ddelta += (ws.dAbar.array() * ws.abar.array() * A.array()).sum();
            bufs.dA += (delta * (ws.dAbar.array() * ws.abar.array())).matrix();
        }
        ddelta += tokens.row(t) * ws.dh * proj.B.row(t).transpose();
        bufs.dB.row(t) += delta * (tokens.row(t) * ws.dh);
        d_tokens.row(t) += delta * (ws.dh * proj.B.row(t).transpose()).transpose();
        ws.dh = (ws.dh.array() * ws.abar.array()).matrix();

        bufs.dZraw(t, 0) += ddelta * stable_sigmoid(proj.z_raw(t, 0));
    }
}

/// Fold token-space gradients into parameter gradients and the
/// projection-mediated part of the input gradient.
template <class T>
void ssm_finalize_grads(const SsmParams<T>& p, const Mat<T>& A, const Mat<T>& tokens,
                        const SsmBackwardBuffers<T>& bufs, SsmParams<T>& grads,
                        Mat<T>& d_tokens) {
    grads.A_log += (bufs.dA.array() * A.array()).matrix();  // dA_log = dA .* A
    grads.W_B += bufs.dB.transpose() * tokens;
    d_tokens += bufs.dB * p.W_B;
    grads.W_C += bufs.dC.transpose() * tokens;
    d_tokens += bufs.dC * p.W_C;
    grads.w_dt += bufs.dZraw.transpose() * tokens;
    grads.b_dt(0, 0) += bufs.dZraw.sum();
    d_tokens += bufs.dZraw * p.w_dt;
    grads.W_g += bufs.dGatePre.transpose() * tokens;
    grads.b_g += bufs.dGatePre.colwise().sum();
    d_tokens += bufs.dGatePre * p.W_g;
    grads.D += bufs.dD;
}

/// Selective scan over one sequence (rows of seq are tokens, oldest first).
template <class T>
Mat<T> selective_scan(const SsmParams<T>& p, const Mat<T>& seq) {
    if (seq.rows() < 1) raise(ErrorKind::invalid_argument, "selective_scan: empty sequence");
    auto proj = ssm_project(p, seq);
    Mat<T> A = p.transition();
    Mat<T> out(seq.rows(), seq.cols());
    SsmWorkspace<T> ws;
    ssm_scan_seq(p, A, seq, proj, 0, static_cast<int>(seq.rows()), false, out, 0, ws);
    return out;
}

/// Exact reverse-mode gradients of selective_scan with respect to every
/// parameter and the input sequence.
template <class T>
struct ScanGradResult {
    SsmParams<T> params;
    Mat<T> input;
};

template <class T>
ScanGradResult<T> selective_scan_grad(const SsmParams<T>& p, const Mat<T>& seq,
                                      const Mat<T>& upstream) {
    if (upstream.rows() != seq.rows() || upstream.cols() != seq.cols()) {
        raise(ErrorKind::shape_mismatch, "selective_scan_grad: upstream shape mismatch");
    }
    auto proj = ssm_project(p, seq);
    Mat<T> A = p.transition();
    ScanGradResult<T> res;
    res.params = SsmParams<T>::zeros(p.d, p.n_state);
    res.input = Mat<T>::Zero(seq.rows(), seq.cols());
    SsmBackwardBuffers<T> bufs;
    bufs.init(seq.rows(), p.d, p.n_state);
    SsmWorkspace<T> ws;
    ssm_scan_seq_backward(p, A, seq, proj, 0, static_cast<int>(seq.rows()), false,
                          upstream, 0, bufs, res.input, ws);
    ssm_finalize_grads(p, A, seq, bufs, res.params, res.input);
    return res;
}

// ---------------------------------------------------------------------------
// Gated-recurrent-unit backbone, a drop-in replacement for the selective scan.
// Convention: h_t = (1 - z_t) .* h_{t-1} + z_t .* c_t.

template <class T>
struct GruParams {
    int d = 0;
    Mat<T> W_z, U_z, W_r, U_r, W_h, U_h;  // d x d
    RowVec<T> b_z, b_r, b_h;

    static GruParams zeros(int d) {
        GruParams p;
        p.d = d;
        for (Mat<T>* m : {&p.W_z, &p.U_z, &p.W_r, &p.U_r, &p.W_h, &p.U_h}) {
            m->setZero(d, d);
        }
        for (RowVec<T>* v : {&p.b_z, &p.b_r, &p.b_h}) v->setZero(d);
        return p;
    }
};

template <class T>
GruParams<T> gru_init(int d, std::mt19937& rng) {
    GruParams<T> p = GruParams<T>::zeros(d);
    const double s = std::sqrt(1.0 / d);
    for (Mat<T>* m : {&p.W_z, &p.U_z, &p.W_r, &p.U_r, &p.W_h, &p.U_h}) {
        fill_uniform(*m, s, rng);
    }
    return p;
}

template <class T>
struct GruWorkspace {
    Mat<T> h_prev, z, r, c;  // per-step rows, written before read
    Mat<T> scratch_out;

    void ensure(int len, int d) {
        h_prev.resize(len, d);
        z.resize(len, d);
        r.resize(len, d);
        c.resize(len, d);
        scratch_out.resize(len, d);
    }
};

template <class T>
void gru_scan_seq(const GruParams<T>& p, const Mat<T>& tokens, Eigen::Index base, int len,
                  bool reversed, Mat<T>& out, Eigen::Index out_base, GruWorkspace<T>& ws,
                  bool keep_states = false) {
    RowVec<T> h = RowVec<T>::Zero(p.d);
    auto sigm = [](T v) { return stable_sigmoid(v); };
    for (int k = 0; k < len; ++k) {
        const Eigen::Index t = reversed ? base + len - 1 - k : base + k;
        const RowVec<T> x = tokens.row(t);
        RowVec<T> z = (x * p.W_z.transpose() + h * p.U_z.transpose() + p.b_z).unaryExpr(sigm);
        RowVec<T> r = (x * p.W_r.transpose() + h * p.U_r.transpose() + p.b_r).unaryExpr(sigm);
        RowVec<T> c = (x * p.W_h.transpose() + h.cwiseProduct(r) * p.U_h.transpose() + p.b_h)
                          .unaryExpr([](T v) { return std::tanh(v); });
        if (keep_states) {
            ws.h_prev.row(k) = h;
            ws.z.row(k) = z;
            ws.r.row(k) = r;
            ws.c.row(k) = c;
        }
        h = (RowVec<T>::Ones(p.d) - z).cwiseProduct(h) + z.cwiseProduct(c);
        if (!h.allFinite()) {
            raise(ErrorKind::numeric,
                  "gru_scan: non-finite state at position " + std::to_string(k));
        }
        out.row(out_base + k) = h;
    }
}

template <class T>
void gru_scan_seq_backward(const GruParams<T>& p, const Mat<T>& tokens, Eigen::Index base,
                           int len, bool reversed, const Mat<T>& d_out,
                           Eigen::Index dout_base, GruParams<T>& grads, Mat<T>& d_tokens,
                           GruWorkspace<T>& ws) {
    ws.ensure(len, p.d);
    gru_scan_seq(p, tokens, base, len, reversed, ws.scratch_out, 0, ws, true);

    RowVec<T> dh_carry = RowVec<T>::Zero(p.d);
    for (int k = len - 1; k >= 0; --k) {
        const Eigen::Index t = reversed ? base + len - 1 - k : base + k;
        const RowVec<T> x = tokens.row(t);
        const RowVec<T> h_prev = ws.h_prev.row(k);
        const RowVec<T> z = ws.z.row(k);
        const RowVec<T> r = ws.r.row(k);
        const RowVec<T> c = ws.c.row(k);

        RowVec<T> dh = d_out.row(dout_base + k) + dh_carry;
        RowVec<T> dz = dh.cwiseProduct(c - h_prev);
        RowVec<T> dc = dh.cwiseProduct(z);
        RowVec<T> dh_prev = dh.cwiseProduct(RowVec<T>::Ones(p.d) - z);

        RowVec<T> da_h = dc.cwiseProduct((T(1) - c.array().square()).matrix());
        grads.W_h += da_h.transpose() * x;
        grads.U_h += da_h.transpose() * h_prev.cwiseProduct(r);
        grads.b_h += da_h;
        d_tokens.row(t) += da_h * p.W_h;
        RowVec<T> drh = da_h * p.U_h;
        RowVec<T> dr = drh.cwiseProduct(h_prev);
        dh_prev += drh.cwiseProduct(r);

        RowVec<T> da_z = dz.cwiseProduct(z).cwiseProduct(RowVec<T>::Ones(p.d) - z);
        grads.W_z += da_z.transpose() * x;
        grads.U_z += da_z.transpose() * h_prev;
        grads.b_z += da_z;
        d_tokens.row(t) += da_z * p.W_z;
        dh_prev += da_z * p.U_z;

        RowVec<T> da_r = dr.cwiseProduct(r).cwiseProduct(RowVec<T>::Ones(p.d) - r);
        grads.W_r += da_r.transpose() * x;
        grads.U_r += da_r.transpose() * h_prev;
        grads.b_r += da_r;
        d_tokens.row(t) += da_r * p.W_r;
        dh_prev += da_r * p.U_r;

        dh_carry = dh_prev;
    }
}

template <class T>
Mat<T> gru_scan(const GruParams<T>& p, const Mat<T>& seq) {
    if (seq.rows() < 1) raise(ErrorKind::invalid_argument, "gru_scan: empty sequence");
    if (seq.cols() != p.d) raise(ErrorKind::shape_mismatch, "gru_scan: width mismatch");
    Mat<T> out(seq.rows(), seq.cols());
    GruWorkspace<T> ws;
    gru_scan_seq(p, seq, 0, static_cast<int>(seq.rows()), false, out, 0, ws);
    return out;
}

template <class T>
struct GruGradResult {
    GruParams<T> params;
    Mat<T> input;
};

template <class T>
GruGradResult<T> gru_scan_grad(const GruParams<T>& p, const Mat<T>& seq,
                               const Mat<T>& upstream) {
    if (upstream.rows() != seq.rows() || upstream.cols() != seq.cols()) {
        raise(ErrorKind::shape_mismatch, "gru_scan_grad: upstream shape mismatch");
    }
    GruGradResult<T> res;
    res.params = GruParams<T>::zeros(p.d);
    res.input = Mat<T>::Zero(seq.rows(), seq.cols());
    GruWorkspace<T> ws;
    gru_scan_seq_backward(p, seq, 0, static_cast<int>(seq.rows()), false, upstream, 0,
                          res.params, res.input, ws);
    return res;
}

// ---------------------------------------------------------------------------
// Parameter enumeration in declaration order (drives the optimizer, the
// checkpoint layout and gradient checks).

template <class T>
void collect_params(SsmParams<T>& p, const std::string& prefix,
                    std::vector<ParamView<T>>& out) {
    out.push_back({prefix + ".A_log", p.A_log.data(), p.A_log.size()});
    out.push_back({prefix + ".W_B", p.W_B.data(), p.W_B.size()});
    out.push_back({prefix + ".W_C", p.W_C.data(), p.W_C.size()});
    out.push_back({prefix + ".w_dt", p.w_dt.data(), p.w_dt.size()});
    out.push_back({prefix + ".b_dt", p.b_dt.data(), p.b_dt.size()});
    out.push_back({prefix + ".D", p.D.data(), p.D.size()});
    out.push_back({prefix + ".W_g", p.W_g.data(), p.W_g.size()});
    out.push_back({prefix + ".b_g", p.b_g.data(), p.b_g.size()});
}

template <class T>
void collect_params(GruParams<T>& p, const std::string& prefix,
                    std::vector<ParamView<T>>& out) {
    out.push_back({prefix + ".W_z", p.W_z.data(), p.W_z.size()});
    out.push_back({prefix + ".U_z", p.U_z.data(), p.U_z.size()});
    out.push_back({prefix + ".b_z", p.b_z.data(), p.b_z.size()});
    out.push_back({prefix + ".W_r", p.W_r.data(), p.W_r.size()});
    out.push_back({prefix + ".U_r", p.U_r.data(), p.U_r.size()});
    out.push_back({prefix + ".b_r", p.b_r.data(), p.b_r.size()});
    out.push_back({prefix + ".W_h", p.W_h.data(), p.W_h.size()});
    out.push_back({prefix + ".U_h", p.U_h.data(), p.U_h.size()});
    out.push_back({prefix + ".b_h", p.b_h.data(), p.b_h.size()});
}

template <class T>
void collect_params(LayerNormParams<T>& p, const std::string& prefix,
                    std::vector<ParamView<T>>& out) {
    out.push_back({prefix + ".gamma", p.gamma.data(), p.gamma.size()});
    out.push_back({prefix + ".beta", p.beta.data(), p.beta.size()});
}

// ---------------------------------------------------------------------------
// Bidirectional block: forward scan plus a separately parameterized scan over
// the reversed sequence, fused by summation, then a per-node sum and skip.

enum class Backbone { ssm, gru };

template <class T>
struct BlockParams {
    LayerNormParams<T> ln;
    SsmParams<T> fwd_ssm, bwd_ssm;
    GruParams<T> fwd_gru, bwd_gru;
};

struct BlockFlags {
    bool use_backward_scan = true;
    bool use_skip = true;
    Backbone backbone = Backbone::ssm;
};

/// The fused sequence S^1 + inv(S^2) for a single node's sequence; exposed
/// mainly so the cross-rank interaction pattern is observable.
template <class T>
Mat<T> bidirectional_fused(const BlockParams<T>& p, const Mat<T>& seq,
                           const BlockFlags& flags) {
    const int len = static_cast<int>(seq.rows());
    Mat<T> fwd(len, seq.cols()), bwd(len, seq.cols());
    if (flags.backbone == Backbone::ssm) {
        fwd = selective_scan(p.fwd_ssm, seq);
        if (flags.use_backward_scan) {
            Mat<T> rev = seq.colwise().reverse();
            bwd = selective_scan(p.bwd_ssm, rev);
        }
    } else {
        fwd = gru_scan(p.fwd_gru, seq);
        if (flags.use_backward_scan) {
            Mat<T> rev = seq.colwise().reverse();
            bwd = gru_scan(p.bwd_gru, rev);
        }
    }
    if (!flags.use_backward_scan) return fwd;
    return fwd + bwd.colwise().reverse();
}

/// Node update: per node, run the (bidirectional) scans over its normalized
/// sequence, sum every fused position and add the skip. Returns the new
/// n_nodes x d node features.
template <class T>
Mat<T> mamba_block(const BlockParams<T>& p, const SequenceBatch<T>& S, const Mat<T>& H0,
                   const BlockFlags& flags) {
    const int n = S.n_nodes;
    const int P = S.seq_len;
    const int d = S.dim();
    if (H0.rows() != n || H0.cols() != d) {
        raise(ErrorKind::shape_mismatch, "mamba_block: node feature shape mismatch");
    }
    Mat<T> out = flags.use_skip ? Mat<T>(H0) : Mat<T>(Mat<T>::Zero(n, d));

    if (flags.backbone == Backbone::ssm) {
        Mat<T> A_f = p.fwd_ssm.transition();
        auto proj_f = ssm_project(p.fwd_ssm, S.data);
        Mat<T> A_b;
        SsmProjections<T> proj_b;
        if (flags.use_backward_scan) {
            A_b = p.bwd_ssm.transition();
            proj_b = ssm_project(p.bwd_ssm, S.data);
        }
        SsmWorkspace<T> ws;
        Mat<T> scan_out(P, d);
        for (int node = 0; node < n; ++node) {
            const Eigen::Index base = static_cast<Eigen::Index>(node) * P;
            ssm_scan_seq(p.fwd_ssm, A_f, S.data, proj_f, base, P, false, scan_out, 0, ws);
            out.row(node) += scan_out.colwise().sum();
            if (flags.use_backward_scan) {
                ssm_scan_seq(p.bwd_ssm, A_b, S.data, proj_b, base, P, true, scan_out, 0, ws);
                out.row(node) += scan_out.colwise().sum();
            }
        }
    } else {
        GruWorkspace<T> ws;
        Mat<T> scan_out(P, d);
        for (int node = 0; node < n; ++node) {
            const Eigen::Index base = static_cast<Eigen::Index>(node) * P;
            gru_scan_seq(p.fwd_gru, S.data, base, P, false, scan_out, 0, ws);
            out.row(node) += scan_out.colwise().sum();
            if (flags.use_backward_scan) {
                gru_scan_seq(p.bwd_gru, S.data, base, P, true, scan_out, 0, ws);
                out.row(node) += scan_out.colwise().sum();
            }
        }
    }
    return out;
}

/// Reverse-mode pass of mamba_block. d_out is n_nodes x d. Accumulates scan
/// parameter gradients into grads (layer-norm gradients are the caller's
/// concern), the skip contribution into dH0 and returns the gradient with
/// respect to the normalized sequence batch.
template <class T>
Mat<T> mamba_block_backward(const BlockParams<T>& p, const SequenceBatch<T>& S,
                            const Mat<T>& d_out, const BlockFlags& flags,
                            BlockParams<T>& grads, Mat<T>& dH0) {
    const int n = S.n_nodes;
    const int P = S.seq_len;
    const int d = S.dim();
    Mat<T> d_tokens = Mat<T>::Zero(S.data.rows(), d);
    if (flags.use_skip) dH0 += d_out;

    // every fused position of node A receives d_out.row(A)
    Mat<T> up(P, d);

    if (flags.backbone == Backbone::ssm) {
        Mat<T> A_f = p.fwd_ssm.transition();
        auto proj_f = ssm_project(p.fwd_ssm, S.data);
        SsmBackwardBuffers<T> bufs_f;
        bufs_f.init(S.data.rows(), p.fwd_ssm.d, p.fwd_ssm.n_state);
        Mat<T> A_b;
        SsmProjections<T> proj_b;
        SsmBackwardBuffers<T> bufs_b;
        if (flags.use_backward_scan) {
            A_b = p.bwd_ssm.transition();
            proj_b = ssm_project(p.bwd_ssm, S.data);
            bufs_b.init(S.data.rows(), p.bwd_ssm.d, p.bwd_ssm.n_state);
        }
        SsmWorkspace<T> ws;
        for (int node = 0; node < n; ++node) {
            const Eigen::Index base = static_cast<Eigen::Index>(node) * P;
            up = d_out.row(node).replicate(P, 1);
            ssm_scan_seq_backward(p.fwd_ssm, A_f, S.data, proj_f, base, P, false, up, 0,
                                  bufs_f, d_tokens, ws);
            if (flags.use_backward_scan) {
                ssm_scan_seq_backward(p.bwd_ssm, A_b, S.data, proj_b, base, P, true, up, 0,
                                      bufs_b, d_tokens, ws);
            }
        }
        ssm_finalize_grads(p.fwd_ssm, A_f, S.data, bufs_f, grads.fwd_ssm, d_tokens);
        if (flags.use_backward_scan) {
            ssm_finalize_grads(p.bwd_ssm, A_b, S.data, bufs_b, grads.bwd_ssm, d_tokens);
        }
    } else {
        GruWorkspace<T> ws;
        for (int node = 0; node < n; ++node) {
            const Eigen::Index base = static_cast<Eigen::Index>(node) * P;
            up = d_out.row(node).replicate(P, 1);
            gru_scan_seq_backward(p.fwd_gru, S.data, base, P, false, up, 0, grads.fwd_gru,
                                  d_tokens, ws);
            if (flags.use_backward_scan) {
                gru_scan_seq_backward(p.bwd_gru, S.data, base, P, true, up, 0, grads.bwd_gru,
                                      d_tokens, ws);
            }
        }
    }
    return d_tokens;
}

}  // namespace scmamba

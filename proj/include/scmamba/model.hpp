#pragma once

#include "scmamba/ssm.hpp"

namespace scmamba {

enum class Task { classification, regression };

struct ModelConfig {
    int d_in = 0;
    int d_h = 64;
    int d_out = 0;
    int n_blocks = 2;
    int state_size = 16;
    int max_rank = 3;
    double dropout = 0.25;
    bool use_backward_scan = true;
    bool use_skip = true;
    bool head_activation = true;
    Backbone backbone = Backbone::ssm;
    Aggregator aggregator = Aggregator::sum;

    BlockFlags block_flags() const {
        return BlockFlags{use_backward_scan, use_skip, backbone};
    }
};

/// Feature encoder, n_blocks bidirectional scan blocks with feature
/// re-lifting in between, and a linear task head. Forward and backward are
/// pure given the parameters; training mutates them through one optimizer.
template <class T>
struct Model {
    ModelConfig cfg;
    Mat<T> W_in;      // d_h x d_in
    RowVec<T> b_in;   // 1 x d_h
    std::vector<BlockParams<T>> blocks;
    Mat<T> W_out;     // d_out x d_h
    RowVec<T> b_out;  // 1 x d_out
};

template <class T>
Model<T> model_zeros(const ModelConfig& cfg) {
    Model<T> m;
    m.cfg = cfg;
    m.W_in = Mat<T>::Zero(cfg.d_h, cfg.d_in);
    m.b_in = RowVec<T>::Zero(cfg.d_h);
    m.blocks.resize(cfg.n_blocks);
    for (auto& b : m.blocks) {
        b.ln.gamma = RowVec<T>::Zero(cfg.d_h);
        b.ln.beta = RowVec<T>::Zero(cfg.d_h);
        if (cfg.backbone == Backbone::ssm) {
            b.fwd_ssm = SsmParams<T>::zeros(cfg.d_h, cfg.state_size);
            if (cfg.use_backward_scan) {
                b.bwd_ssm = SsmParams<T>::zeros(cfg.d_h, cfg.state_size);
            }
        } else {
            b.fwd_gru = GruParams<T>::zeros(cfg.d_h);
            if (cfg.use_backward_scan) b.bwd_gru = GruParams<T>::zeros(cfg.d_h);
        }
    }
    m.W_out = Mat<T>::Zero(cfg.d_out, cfg.d_h);
    m.b_out = RowVec<T>::Zero(cfg.d_out);
    return m;
}

template <class T>
Model<T> model_init(const ModelConfig& cfg, unsigned seed) {
    if (cfg.d_in < 1 || cfg.d_h < 1 || cfg.d_out < 1 || cfg.n_blocks < 1) {
        raise(ErrorKind::invalid_argument, "model_init: widths and block count must be >= 1");
    }
    std::mt19937 rng(seed);
    Model<T> m = model_zeros<T>(cfg);
    fill_uniform(m.W_in, std::sqrt(1.0 / cfg.d_in), rng);
    for (auto& b : m.blocks) {
        b.ln = LayerNormParams<T>::identity(cfg.d_h);
        if (cfg.backbone == Backbone::ssm) {
            b.fwd_ssm = ssm_init<T>(cfg.d_h, cfg.state_size, rng);
            if (cfg.use_backward_scan) b.bwd_ssm = ssm_init<T>(cfg.d_h, cfg.state_size, rng);
        } else {
            b.fwd_gru = gru_init<T>(cfg.d_h, rng);
            if (cfg.use_backward_scan) b.bwd_gru = gru_init<T>(cfg.d_h, rng);
        }
    }
    fill_uniform(m.W_out, std::sqrt(1.0 / cfg.d_h), rng);
    return m;
}

template <class T>
std::vector<ParamView<T>> collect_params(Model<T>& m) {
    std::vector<ParamView<T>> out;
    out.push_back({"W_in", m.W_in.data(), m.W_in.size()});
    out.push_back({"b_in", m.b_in.data(), m.b_in.size()});
    for (std::size_t i = 0; i < m.blocks.size(); ++i) {
        const std::string prefix = "block" + std::to_string(i);
        collect_params(m.blocks[i].ln, prefix + ".ln", out);
        if (m.cfg.backbone == Backbone::ssm) {
            collect_params(m.blocks[i].fwd_ssm, prefix + ".fwd", out);
            if (m.cfg.use_backward_scan) {
                collect_params(m.blocks[i].bwd_ssm, prefix + ".bwd", out);
            }
        } else {
            collect_params(m.blocks[i].fwd_gru, prefix + ".fwd", out);
            if (m.cfg.use_backward_scan) {
                collect_params(m.blocks[i].bwd_gru, prefix + ".bwd", out);
            }
        }
    }
    out.push_back({"W_out", m.W_out.data(), m.W_out.size()});
    out.push_back({"b_out", m.b_out.data(), m.b_out.size()});
    return out;
}

template <class T>
Model<T> grads_like(const Model<T>& m) {
    Model<T> g = m;
    for (auto& v : collect_params(g)) std::fill(v.data, v.data + v.size, T(0));
    return g;
}

template <class T>
void zero_params(Model<T>& g) {
    for (auto& v : collect_params(g)) std::fill(v.data, v.data + v.size, T(0));
}

template <class To, class From>
Model<To> model_cast(const Model<From>& src) {
    Model<To> dst = model_zeros<To>(src.cfg);
    auto sv = collect_params(const_cast<Model<From>&>(src));
    auto dv = collect_params(dst);
    for (std::size_t k = 0; k < sv.size(); ++k) {
        for (std::ptrdiff_t i = 0; i < sv[k].size; ++i) {
            dv[k].data[i] = static_cast<To>(sv[k].data[i]);
        }
    }
    return dst;
}

// ---------------------------------------------------------------------------
// Forward / backward

template <class T>
struct BlockCache {
    Mat<T> input;  // node features entering the block
    AggCache agg;
    LayerNormCache<T> ln;
    SequenceBatch<T> seq_norm;
};

template <class T>
struct ForwardCache {
    Mat<T> enc_pre;    // pre-activation encoder output
    Mat<T> enc_mask;   // inverted dropout mask; empty in eval mode
    std::vector<BlockCache<T>> blocks;
    Mat<T> head_in;    // node features entering the head
    Mat<T> head_pre;   // pre-activation head output
    Mat<T> head_mask;
};

template <class T>
Mat<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::mt19937& rng) {
    Mat<T> mask(rows, cols);
    std::bernoulli_distribution keep(1.0 - rate);
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) mask(i, j) = keep(rng) ? scale : T(0);
    }
    return mask;
}

/// ReLU(H_in * W_in^T + b_in), then dropout when training.
template <class T>
Mat<T> encode_features(const Model<T>& m, const Mat<T>& H_in, bool train_mode = false,
                       std::mt19937* rng = nullptr, ForwardCache<T>* cache = nullptr) {
    if (H_in.cols() != m.cfg.d_in) {
        raise(ErrorKind::shape_mismatch,
              "encode_features: input width " + std::to_string(H_in.cols()) +
                  ", expected " + std::to_string(m.cfg.d_in));
    }
    Mat<T> pre = (H_in * m.W_in.transpose()).rowwise() + m.b_in;
    Mat<T> out = pre.cwiseMax(T(0));
    if (cache) cache->enc_pre = pre;
    if (train_mode && m.cfg.dropout > 0) {
        Mat<T> mask = dropout_mask<T>(out.rows(), out.cols(), m.cfg.dropout, *rng);
        out = out.cwiseProduct(mask);
        if (cache) cache->enc_mask = std::move(mask);
    }
    return out;
}

/// Full forward pass: encoder, n_blocks rounds of re-lift / sequence /
/// normalize / scan, then the task head.
template <class T>
Mat<T> model_forward(const Model<T>& m, const SimplicialComplex& X, const Mat<T>& H_in,
                     bool train_mode = false, std::mt19937* rng = nullptr,
                     ForwardCache<T>* cache = nullptr) {
    if (X.max_rank() != m.cfg.max_rank) {
        raise(ErrorKind::shape_mismatch,
              "model_forward: complex rank " + std::to_string(X.max_rank()) +
                  " does not match configured rank " + std::to_string(m.cfg.max_rank));
    }
    if (H_in.rows() != X.num_nodes()) {
        raise(ErrorKind::shape_mismatch, "model_forward: feature row count mismatch");
    }
    if (cache) cache->blocks.resize(m.cfg.n_blocks);

    Mat<T> H = encode_features(m, H_in, train_mode, rng, cache);
    const BlockFlags flags = m.cfg.block_flags();
    for (int i = 0; i < m.cfg.n_blocks; ++i) {
        BlockCache<T>* bc = cache ? &cache->blocks[i] : nullptr;
        if (bc) bc->input = H;
        FeatureStore<T> F = feature_lift(X, H);
        SequenceBatch<T> raw =
            build_sequences(X, F, m.cfg.aggregator, bc ? &bc->agg : nullptr);
        SequenceBatch<T> norm;
        norm.n_nodes = raw.n_nodes;
        norm.seq_len = raw.seq_len;
        norm.data = layer_norm_rows(raw.data, m.blocks[i].ln, bc ? &bc->ln : nullptr);
        H = mamba_block(m.blocks[i], norm, H, flags);
        if (bc) bc->seq_norm = std::move(norm);
    }

    if (cache) cache->head_in = H;
    Mat<T> pre = (H * m.W_out.transpose()).rowwise() + m.b_out;
    if (cache) cache->head_pre = pre;
    Mat<T> out = m.cfg.head_activation ? Mat<T>(pre.cwiseMax(T(0))) : pre;
    if (train_mode && m.cfg.dropout > 0) {
        Mat<T> mask = dropout_mask<T>(out.rows(), out.cols(), m.cfg.dropout, *rng);
        out = out.cwiseProduct(mask);
        if (cache) cache->head_mask = std::move(mask);
    }
    return out;
}

/// Accumulates parameter gradients for d_loss/d_output into grads.
template <class T>
void model_backward(const Model<T>& m, const SimplicialComplex& X, const Mat<T>& H_in,
                    const ForwardCache<T>& cache, const Mat<T>& d_out, Model<T>& grads) {
    const BlockFlags flags = m.cfg.block_flags();
    Mat<T> d = d_out;
    if (cache.head_mask.size() > 0) d = d.cwiseProduct(cache.head_mask);
    if (m.cfg.head_activation) {
        d = d.cwiseProduct(
            cache.head_pre.unaryExpr([](T v) { return v > T(0) ? T(1) : T(0); }));
    }
    grads.W_out += d.transpose() * cache.head_in;
    grads.b_out += d.colwise().sum();
    Mat<T> dH = d * m.W_out;

    for (int i = m.cfg.n_blocks - 1; i >= 0; --i) {
        const BlockCache<T>& bc = cache.blocks[i];
        Mat<T> dH_in = Mat<T>::Zero(dH.rows(), dH.cols());
        Mat<T> dSeqNorm =
            mamba_block_backward(m.blocks[i], bc.seq_norm, dH, flags, grads.blocks[i], dH_in);
        Mat<T> dRaw =
            layer_norm_rows_backward(bc.ln, m.blocks[i].ln, dSeqNorm, grads.blocks[i].ln);
        FeatureStore<T> dF = sequences_backward(X, dRaw, m.cfg.aggregator, &bc.agg);
        dH_in += feature_lift_backward(X, std::move(dF));
        dH = std::move(dH_in);
    }

    if (cache.enc_mask.size() > 0) dH = dH.cwiseProduct(cache.enc_mask);
    dH = dH.cwiseProduct(
        cache.enc_pre.unaryExpr([](T v) { return v > T(0) ? T(1) : T(0); }));
    grads.W_in += dH.transpose() * H_in;
    grads.b_in += dH.colwise().sum();
}

// ---------------------------------------------------------------------------
// Losses (averaged over the given rows; d_logits is allocated full-size and
// zero outside those rows)

template <class T>
T softmax_cross_entropy(const Mat<T>& logits, const std::vector<int>& labels,
                        const std::vector<int>& rows, Mat<T>* d_logits = nullptr) {
    if (static_cast<Eigen::Index>(labels.size()) != logits.rows()) {
        raise(ErrorKind::shape_mismatch, "cross_entropy: label count mismatch");
    }
    if (rows.empty()) raise(ErrorKind::invalid_argument, "cross_entropy: no rows selected");
    if (d_logits) d_logits->setZero(logits.rows(), logits.cols());
    const T inv_m = T(1) / static_cast<T>(rows.size());
    T loss = 0;
    for (int i : rows) {
        const int y = labels[i];
        if (y < 0 || y >= logits.cols()) {
            raise(ErrorKind::out_of_range, "cross_entropy: label out of range");
        }
        const T mx = logits.row(i).maxCoeff();
        RowVec<T> ex = (logits.row(i).array() - mx).exp();
        const T Z = ex.sum();
        loss += -(logits(i, y) - mx - std::log(Z)) * inv_m;
        if (d_logits) {
            d_logits->row(i) = (ex / Z) * inv_m;
            (*d_logits)(i, y) -= inv_m;
        }
    }
    return loss;
}

template <class T>
T mae_loss(const Mat<T>& pred, const std::vector<double>& targets,
           const std::vector<int>& rows, Mat<T>* d_pred = nullptr) {
    if (static_cast<Eigen::Index>(targets.size()) != pred.rows() || pred.cols() != 1) {
        raise(ErrorKind::shape_mismatch, "mae_loss: shape mismatch");
    }
    if (rows.empty()) raise(ErrorKind::invalid_argument, "mae_loss: no rows selected");
    if (d_pred) d_pred->setZero(pred.rows(), 1);
    const T inv_m = T(1) / static_cast<T>(rows.size());
    T loss = 0;
    for (int i : rows) {
        const T r = pred(i, 0) - static_cast<T>(targets[i]);
        loss += std::abs(r) * inv_m;
        if (d_pred) (*d_pred)(i, 0) = (r > T(0) ? inv_m : (r < T(0) ? -inv_m : T(0)));
    }
    return loss;
}

// ---------------------------------------------------------------------------
// Checkpoints: magic, format version, config block, then raw little-endian
// 32-bit parameter arrays in declaration order.

void save_checkpoint(const Model<float>& m, const std::string& path);
Model<float> load_checkpoint(const std::string& path);

}  // namespace scmamba
